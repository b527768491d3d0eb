// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/config.hpp"

#include <fstream>
#include <set>

#include "topicdiff/error.hpp"

namespace topicdiff::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError(where + ": unknown key '" + k + "'");
}

AblationSettings parse_ablation(const json& j) {
  reject_unknown(j, {"variants", "seeds", "pairs", "jobs"}, "ablation config");
  AblationSettings a;
  try {
    a.variants = j.value("variants", a.variants);
    a.seeds = j.value("seeds", a.seeds);
    if (j.contains("pairs")) {
      a.pairs.clear();
      for (const auto& p : j["pairs"]) {
        if (!p.is_array() || p.size() != 2) throw ParseError("ablation config: each pair must be [a, b]");
        a.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
      }
    }
    a.jobs = j.value("jobs", a.jobs);
  } catch (const json::exception& e) {
    throw ParseError(std::string("ablation config: ") + e.what());
  }
  return a;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema != "v1") throw ContractError("config: unsupported schema '" + schema + "'");
  if (!dataset) synth.validate();
  train.validate();
  diffusion.schedule();
  diffusion.langevin.validate(diffusion.schedule());
  if (model.gru_hidden == 0 || model.vae_hidden == 0 || model.latent_dim == 0 || model.head_hidden == 0 ||
      model.score_hidden == 0 || model.level_embed_dim == 0)
    throw ContractError("config: model sizes must be positive");
  if (!(model.dropout >= 0 && model.dropout < 1)) throw ContractError("config: dropout must lie in [0, 1)");
  ablation_plan();
  if (ablation.jobs == 0) throw ContractError("config: ablation jobs must be >= 1");
  if (out_dir.empty()) throw ContractError("config: out_dir must not be empty");
}

train::AblationPlan ExperimentConfig::ablation_plan() const {
  train::AblationPlan plan;
  if (ablation.variants.empty()) throw ContractError("config: ablation variant list must not be empty");
  if (ablation.seeds.empty()) throw ContractError("config: ablation seed list must not be empty");
  std::set<std::string> ids;
  for (const auto& id : ablation.variants) {
    plan.variants.push_back(train::parse_variant(id));
    if (!ids.insert(id).second) throw ContractError("config: variant '" + id + "' listed twice");
  }
  for (const auto& [a, b] : ablation.pairs)
    if (!ids.count(a) || !ids.count(b))
      throw ContractError("config: t-test pair " + a + " / " + b + " names a variant not in the list");
  plan.seeds = ablation.seeds;
  plan.pairs = ablation.pairs;
  plan.jobs = ablation.jobs;
  return plan;
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, {"schema", "seed", "data", "model", "diffusion", "train", "ablation", "out_dir"}, "config");
  ExperimentConfig c;
  try {
    c.schema = j.value("schema", c.schema);
    if (c.schema != "v1") throw ParseError("config: unsupported schema '" + c.schema + "'");
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"path", "synthetic"}, "data config");
      if (d.contains("path") && d.contains("synthetic"))
        throw ParseError("data config: give either 'path' or 'synthetic', not both");
      if (d.contains("path")) c.dataset = d["path"].get<std::string>();
      if (d.contains("synthetic")) {
        if (d["synthetic"].is_object() && d["synthetic"].contains("seed"))
          throw ParseError("data config: the synthetic seed follows the top-level 'seed'");
        from_json(d["synthetic"], c.synth);
      }
    }
    if (j.contains("model")) from_json(j["model"], c.model);
    if (j.contains("diffusion")) from_json(j["diffusion"], c.diffusion);
    if (j.contains("train")) {
      if (j["train"].is_object() && j["train"].contains("seed"))
        throw ParseError("train config: the training seed follows the top-level 'seed'");
      from_json(j["train"], c.train);
    }
    if (j.contains("ablation")) c.ablation = parse_ablation(j["ablation"]);
    c.out_dir = j.value("out_dir", c.out_dir.string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.synth.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& flags) {
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.train.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
  }
  if (flags.no_tdb) cfg.train.tdb_enabled = false;
  if (flags.modalities) cfg.train.modality_mask = train::parse_mask(*flags.modalities);
  if (flags.jobs) cfg.ablation.jobs = *flags.jobs;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
}

json resolved_json(const ExperimentConfig& cfg) {
  json data;
  if (cfg.dataset) {
    data["path"] = cfg.dataset->string();
  } else {
    json s = cfg.synth;
    s.erase("seed");
    data["synthetic"] = s;
  }
  json train = cfg.train;
  train.erase("seed");
  json pairs = json::array();
  for (const auto& [a, b] : cfg.ablation.pairs) pairs.push_back({a, b});
  return json{{"schema", cfg.schema},
              {"seed", cfg.seed},
              {"data", data},
              {"model", cfg.model},
              {"diffusion", cfg.diffusion},
              {"train", train},
              {"ablation",
               {{"variants", cfg.ablation.variants},
                {"seeds", cfg.ablation.seeds},
                {"pairs", pairs},
                {"jobs", cfg.ablation.jobs}}},
              {"out_dir", cfg.out_dir.string()}};
}

}  // namespace topicdiff::cli
