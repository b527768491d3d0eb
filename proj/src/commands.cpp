// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topicdiff/checkpoint.hpp"
#include "topicdiff/error.hpp"
#include "topicdiff/eval.hpp"
#include "topicdiff/log.hpp"
#include "topicdiff/oracles.hpp"
#include "topicdiff/trainer.hpp"

namespace topicdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void prepare_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir))
    throw IoError("cannot create output directory '" + cfg.out_dir.string() + "'");
  nlohmann::json resolved = resolved_json(cfg);
  resolved.erase("out_dir");
  write_json(cfg.out_dir / "config.json", resolved);
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string variant_dir(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == ':' || c == '/' || c == '\\') c = '-';
  return out;
}

Dataset resolve_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset) {
    log::info("loading dataset from " + cfg.dataset->string());
    return load_dataset(*cfg.dataset);
  }
  log::info("generating synthetic dataset (seed " + std::to_string(cfg.synth.seed) + ")");
  return generate_synthetic(cfg.synth);
}

std::string split_table(const Dataset& ds) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "split" << std::right << std::setw(15) << "conversations" << std::setw(12)
     << "utterances" << "\n";
  const std::pair<const char*, const std::vector<Conversation>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  SplitSizes total;
  for (const auto& [name, split] : splits) {
    const SplitSizes s = count(*split);
    total.conversations += s.conversations;
    total.utterances += s.utterances;
    os << std::left << std::setw(8) << name << std::right << std::setw(15) << s.conversations << std::setw(12)
       << s.utterances << "\n";
  }
  os << std::left << std::setw(8) << "total" << std::right << std::setw(15) << total.conversations << std::setw(12)
     << total.utterances << "\n";
  return os.str();
}

std::string cmd_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.dataset) throw ContractError("gen-data needs a synthetic data config, not a dataset path");
  const Dataset ds = generate_synthetic(cfg.synth);
  prepare_out_dir(cfg);
  save_dataset(ds, cfg.out_dir);
  return split_table(ds) + "content hash " + ds.content_hash() + "\n";
}

std::string cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset ds = resolve_dataset(cfg);
  prepare_out_dir(cfg);
  const train::Variant variant = train::variant_of(cfg.train);
  log::info("training " + variant.name + " (seed " + std::to_string(cfg.seed) + ")");
  const auto result = train::train_joint(ds, cfg.model, cfg.diffusion, cfg.train);
  nn::save_checkpoint(result.model.all_params(), cfg.out_dir / "checkpoint.bin");
  json history = result.history;
  history["variant"] = variant.name;
  history["seed"] = cfg.seed;
  write_json(cfg.out_dir / "history.json", history);

  const eval::MetricReport report = train::evaluate(result.model, ds.test, ds.meta, variant.name, cfg.seed);
  const eval::MetricReport reports[] = {report};
  eval::emit_report(reports, cfg.out_dir / "report", eval::ReportFormat::kBoth);

  std::ostringstream os;
  os << variant.name << " seed " << cfg.seed << ": W-F1 " << fixed2(report.weighted_f1) << ", accuracy "
     << fixed2(report.accuracy) << " (best epoch " << result.history.best_epoch << " of "
     << result.history.epochs.size() << ", stopped: " << result.history.stop_reason << ")\n";
  return os.str();
}

std::string cmd_ablate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto plan = cfg.ablation_plan();
  const Dataset ds = resolve_dataset(cfg);
  prepare_out_dir(cfg);
  const auto report = train::run_ablation(ds, cfg.model, cfg.diffusion, cfg.train, plan);

  write_json(cfg.out_dir / "ablation.json", report);
  eval::emit_report(report.rows, cfg.out_dir / "ablation", eval::ReportFormat::kCsv);
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    const fs::path dir = cfg.out_dir / "variants" / variant_dir(report.variants[v].id);
    fs::create_directories(dir);
    const std::span<const eval::MetricReport> rows(report.rows.data() + v * report.seeds.size(), report.seeds.size());
    eval::emit_report(rows, dir / "report", eval::ReportFormat::kBoth);
  }
  std::ostringstream csv;
  csv << "a,b,mean_diff,t,dof,p\r\n";
  for (const auto& t : report.tests)
    csv << eval::csv_field(t.a) << "," << eval::csv_field(t.b) << "," << std::setprecision(10) << t.result.mean_diff
        << "," << t.result.t << "," << t.result.dof << "," << t.result.p << "\r\n";
  write_text(cfg.out_dir / "ttest.csv", csv.str());

  std::ostringstream os;
  os << std::left << std::setw(28) << "variant" << std::right << std::setw(12) << "mean W-F1" << "\n";
  for (const auto& v : report.variants)
    os << std::left << std::setw(28) << v.name << std::right << std::setw(12) << fixed2(report.mean_score(v.id)) << "\n";
  for (const auto& t : report.tests)
    os << "t-test " << t.a << " vs " << t.b << ": diff " << fixed2(t.result.mean_diff) << ", t = " << fixed2(t.result.t)
       << ", p = " << std::setprecision(4) << t.result.p << "\n";
  os << "dataset hash " << report.dataset_hash << "\n";
  return os.str();
}

std::string cmd_diag(const ExperimentConfig& cfg, const std::string& name) {
  const auto report = oracles::run_diag(name, cfg.seed);
  prepare_out_dir(cfg);
  write_json(cfg.out_dir / ("diag-" + name + ".json"), report);
  std::string text = report.text();
  if (name == "grad-check") {
    double max_err = 0;
    for (const auto& c : report.checks) max_err = std::max(max_err, c.value);
    std::ostringstream os;
    os << "max rel err " << std::scientific << std::setprecision(3) << max_err << "\n";
    text += os.str();
  }
  if (!report.pass()) throw OracleError(text);
  return text;
}

}  // namespace topicdiff::cli
