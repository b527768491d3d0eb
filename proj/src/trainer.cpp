// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "topicdiff/error.hpp"
#include "topicdiff/log.hpp"

namespace topicdiff::train {

using nlohmann::json;

namespace {

constexpr std::size_t kEvalBatch = 32;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError(where + ": unknown key '" + k + "'");
}

template <typename Fn>
void parse_section(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::string subset_label(const ModalityMask& mask) {
  std::string out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (mask[m]) {
      if (!out.empty()) out += "+";
      out += kModalityKeys[m];
    }
  return out;
}

bool all_on(const ModalityMask& mask) { return mask[0] && mask[1] && mask[2]; }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (!(alpha >= 0) || !(beta >= 0)) throw ContractError("train config: alpha and beta must be >= 0");
  if (!(lr_vae >= 0) || !(lr_score >= 0)) throw ContractError("train config: learning rates must be >= 0");
  if (!(weight_decay_vae >= 0) || !(weight_decay_score >= 0))
    throw ContractError("train config: weight decay must be >= 0");
  if (max_epochs == 0) throw ContractError("train config: max_epochs must be >= 1");
  if (patience == 0 || patience > max_epochs) throw ContractError("train config: need 1 <= patience <= max_epochs");
  if (batch == 0) throw ContractError("train config: batch must be >= 1");
  if (!(clip_norm > 0)) throw ContractError("train config: clip_norm must be > 0");
  if (!modality_mask[0] && !modality_mask[1] && !modality_mask[2]) throw ContractError("train config: modality_mask must not be empty");
}

std::string mask_string(const ModalityMask& mask) {
  std::string out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (mask[m]) out += kModalityKeys[m];
  return out;
}

ModalityMask parse_mask(const std::string& text) {
  ModalityMask mask{false, false, false};
  if (text.empty()) throw ContractError("modality subset must not be empty");
  for (char ch : text) {
    const auto it = std::find(kModalityKeys.begin(), kModalityKeys.end(), ch);
    if (it == kModalityKeys.end())
      throw ContractError(std::string("modality subset: unknown modality '") + ch + "' (use a, v, l)");
    const auto m = static_cast<std::size_t>(it - kModalityKeys.begin());
    if (mask[m]) throw ContractError(std::string("modality subset: '") + ch + "' repeated");
    mask[m] = true;
  }
  return mask;
}

void Variant::apply(TrainConfig& cfg) const {
  cfg.topicdiff = topicdiff;
  cfg.tdb_enabled = tdb;
  cfg.modality_mask = mask;
}

Variant parse_variant(const std::string& id) {
  Variant v;
  const auto colon = id.find(':');
  const std::string base = id.substr(0, colon);
  if (base == "baseline") {
    v.topicdiff = false;
    v.tdb = false;
  } else if (base == "wo_tdb") {
    v.tdb = false;
  } else if (base != "full") {
    throw ContractError("unknown variant '" + id + "' (use baseline, wo_tdb or full, optionally :<avl subset>)");
  }
  if (colon != std::string::npos) {
    if (!v.topicdiff) throw ContractError("variant '" + id + "': baseline takes no modality subset");
    v.mask = parse_mask(id.substr(colon + 1));
  }
  v.id = id;
  v.name = !v.topicdiff ? "Baseline" : v.tdb ? "TopicDiff" : "TopicDiff w/o TDB";
  if (v.topicdiff && !all_on(v.mask)) v.name += " [" + subset_label(v.mask) + "]";
  return v;
}

Variant variant_of(const TrainConfig& cfg) {
  std::string id = !cfg.topicdiff ? "baseline" : cfg.tdb_enabled ? "full" : "wo_tdb";
  if (cfg.topicdiff && !all_on(cfg.modality_mask)) id += ":" + mask_string(cfg.modality_mask);
  return parse_variant(id);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"gru_hidden", c.gru_hidden},     {"vae_hidden", c.vae_hidden},
           {"latent_dim", c.latent_dim},     {"head_hidden", c.head_hidden},
           {"score_hidden", c.score_hidden}, {"level_embed_dim", c.level_embed_dim},
           {"dropout", c.dropout}};
}

void from_json(const json& j, ModelConfig& c) {
  reject_unknown(j, {"gru_hidden", "vae_hidden", "latent_dim", "head_hidden", "score_hidden", "level_embed_dim",
                     "dropout"},
                 "model config");
  parse_section("model config", [&] {
    c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
    c.vae_hidden = j.value("vae_hidden", c.vae_hidden);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.score_hidden = j.value("score_hidden", c.score_hidden);
    c.level_embed_dim = j.value("level_embed_dim", c.level_embed_dim);
    c.dropout = j.value("dropout", c.dropout);
  });
}

void to_json(json& j, const DiffusionConfig& c) {
  j = json{{"levels", c.levels},
           {"sigma_min", c.sigma_min},
           {"sigma_max", c.sigma_max},
           {"langevin",
            {{"steps_per_level", c.langevin.steps_per_level},
             {"step_scale", c.langevin.step_scale},
             {"start_level", c.langevin.start_level}}}};
}

void from_json(const json& j, DiffusionConfig& c) {
  reject_unknown(j, {"levels", "sigma_min", "sigma_max", "langevin"}, "diffusion config");
  parse_section("diffusion config", [&] {
    c.levels = j.value("levels", c.levels);
    c.sigma_min = j.value("sigma_min", c.sigma_min);
    c.sigma_max = j.value("sigma_max", c.sigma_max);
    if (j.contains("langevin")) {
      const auto& l = j["langevin"];
      reject_unknown(l, {"steps_per_level", "step_scale", "start_level"}, "langevin config");
      c.langevin.steps_per_level = l.value("steps_per_level", c.langevin.steps_per_level);
      c.langevin.step_scale = l.value("step_scale", c.langevin.step_scale);
      c.langevin.start_level = l.value("start_level", c.langevin.start_level);
    }
  });
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"alpha", c.alpha},
           {"beta", c.beta},
           {"lr_vae", c.lr_vae},
           {"lr_score", c.lr_score},
           {"weight_decay_vae", c.weight_decay_vae},
           {"weight_decay_score", c.weight_decay_score},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"batch", c.batch},
           {"seed", c.seed},
           {"topicdiff", c.topicdiff},
           {"tdb_enabled", c.tdb_enabled},
           {"modality_mask", mask_string(c.modality_mask)},
           {"clip_norm", c.clip_norm}};
}

void from_json(const json& j, TrainConfig& c) {
  reject_unknown(j, {"alpha", "beta", "lr_vae", "lr_score", "weight_decay_vae", "weight_decay_score", "max_epochs",
                     "patience", "batch", "seed", "topicdiff", "tdb_enabled", "modality_mask", "clip_norm"},
                 "train config");
  parse_section("train config", [&] {
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.lr_vae = j.value("lr_vae", c.lr_vae);
    c.lr_score = j.value("lr_score", c.lr_score);
    c.weight_decay_vae = j.value("weight_decay_vae", c.weight_decay_vae);
    c.weight_decay_score = j.value("weight_decay_score", c.weight_decay_score);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.topicdiff = j.value("topicdiff", c.topicdiff);
    c.tdb_enabled = j.value("tdb_enabled", c.tdb_enabled);
    if (j.contains("modality_mask")) {
      try {
        c.modality_mask = parse_mask(j["modality_mask"].get<std::string>());
      } catch (const ContractError& e) {
        throw ParseError(std::string("train config: ") + e.what());
      }
    }
    c.clip_norm = j.value("clip_norm", c.clip_norm);
  });
}

// ---------------------------------------------------------------------------
// Objective

double total_loss(double l_mce, const std::array<double, kNumModalities>& rec,
                  const std::array<double, kNumModalities>& kl, double alpha, double beta,
                  const ModalityMask& mask) {
  double rec_sum = 0, kl_sum = 0;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (mask[m]) {
      rec_sum += rec[m];
      kl_sum += kl[m];
    }
  return l_mce + alpha * rec_sum + beta * kl_sum;
}

Tensor total_loss(const Tensor& l_mce, std::span<const Tensor> rec, std::span<const Tensor> kl, double alpha,
                  double beta) {
  if (rec.size() != kl.size()) throw ContractError("total_loss: rec and kl lists differ in length");
  Tensor out = l_mce;
  for (std::size_t m = 0; m < rec.size(); ++m) {
    if (!rec[m].defined() || !kl[m].defined()) throw ContractError("total_loss: undefined component");
    out = out + alpha * rec[m] + beta * kl[m];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

TopicDiffModel::TopicDiffModel(const ModelConfig& model, const DiffusionConfig& diffusion, const TrainConfig& train,
                               const std::array<std::size_t, kNumModalities>& dims, std::size_t num_classes)
    : model_(model), diffusion_(diffusion), train_(train), schedule_(diffusion.schedule()) {
  train_.validate();
  if (num_classes < 2) throw ContractError("model: need at least two classes");
  if (tdb_enabled()) diffusion_.langevin.validate(schedule_);
  const std::uint64_t seed = train_.seed;
  std::size_t head_in = 0;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const std::string key(1, kModalityKeys[m]);
    Rng enc_rng(derive_seed(seed, "init/encoder/" + key));
    encoders_[m] = mce::ContextEncoder(dims[m], model.gru_hidden, enc_rng);
    head_in += encoders_[m].out_dim();
    if (!train_.topicdiff || !train_.modality_mask[m]) continue;
    vae::VaeConfig vc;
    vc.feature_dim = encoders_[m].out_dim();
    vc.hidden_dim = model.vae_hidden;
    vc.latent_dim = model.latent_dim;
    vc.dropout = model.dropout;
    Rng vae_rng(derive_seed(seed, "init/vae/" + key));
    vaes_[m].emplace(vc, vae_rng);
    head_in += model.latent_dim;
    if (tdb_enabled()) {
      Rng score_rng(derive_seed(seed, "init/score/" + key));
      scores_[m].emplace(tdb::ScoreNetConfig{model.latent_dim, model.score_hidden, model.level_embed_dim}, schedule_,
                         score_rng);
    }
  }
  Rng head_rng(derive_seed(seed, "init/head"));
  head_ = nn::Mlp({head_in, model.head_hidden, num_classes}, nn::Activation::kTanh, model.dropout, head_rng);
}

TopicDiffModel::Output TopicDiffModel::forward(const mce::ConversationBatch& batch, bool training,
                                               Streams& streams) const {
  Output out;
  const nn::ForwardMode mode{training, &streams.dropout};
  std::vector<Tensor> fused;
  std::vector<Tensor> rec, kl;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Tensor h = encoders_[m].encode(batch, m);
    if (!vaes_[m]) {
      fused.push_back(h);
      continue;
    }
    const auto& topic = *vaes_[m];
    const vae::Posterior post = vae::infer_posterior(topic.inference, h, mode);
    const Tensor z_hat = training ? vae::sample_posterior(post, streams.reparam).z_hat : post.mu;
    const Tensor z = scores_[m] ? tdb::enrich(z_hat, scores_[m]->as_score_fn(), schedule_, diffusion_.langevin,
                                              streams.tdb, true)
                                : z_hat;
    out.z_hat[m] = z_hat;
    out.rec[m] = vae::reconstruction_loss(topic.generative, z, h);
    out.kl[m] = vae::kl_loss(post.mu, post.log_sigma);
    rec.push_back(out.rec[m]);
    kl.push_back(out.kl[m]);
    fused.push_back(mce::fuse(h, z));
  }
  out.logits = mce::classify_logits(head_, fused, mode);
  out.l_mce = mce::mce_loss_from_logits(out.logits, batch.labels(), batch.lengths());
  out.l_total = total_loss(out.l_mce, rec, kl, train_.alpha, train_.beta);
  return out;
}

nn::ParamList TopicDiffModel::main_params() const {
  nn::ParamList out;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const std::string key(1, kModalityKeys[m]);
    encoders_[m].collect(out, "encoder/" + key);
    if (vaes_[m]) vaes_[m]->collect(out, "vae/" + key);
  }
  head_.collect(out, "head");
  return out;
}

nn::ParamList TopicDiffModel::score_params() const {
  nn::ParamList out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (scores_[m]) scores_[m]->collect(out, "score/" + std::string(1, kModalityKeys[m]));
  return out;
}

nn::ParamList TopicDiffModel::all_params() const {
  nn::ParamList out = main_params();
  for (auto& p : score_params()) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

TopicDiffModel::Streams eval_streams(std::uint64_t seed) {
  return {Rng(derive_seed(seed, "eval/dropout")), Rng(derive_seed(seed, "eval/reparam")),
          Rng(derive_seed(seed, "eval/tdb"))};
}

template <typename Fn>
void for_each_chunk(const std::vector<Conversation>& split, std::size_t chunk, Fn&& fn) {
  for (std::size_t i = 0; i < split.size(); i += chunk) {
    const std::size_t n = std::min(chunk, split.size() - i);
    fn(mce::ConversationBatch(std::span<const Conversation>(split.data() + i, n)));
  }
}

void accumulate(LossBreakdown& acc, const TopicDiffModel::Output& out, double weight) {
  acc.mce += weight * out.l_mce.item();
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (out.rec[m].defined()) {
      acc.rec += weight * out.rec[m].item();
      acc.kl += weight * out.kl[m].item();
    }
  acc.total += weight * out.l_total.item();
}

void normalize(LossBreakdown& acc, double total_weight) {
  acc.mce /= total_weight;
  acc.rec /= total_weight;
  acc.kl /= total_weight;
  acc.dsm /= total_weight;
  acc.total /= total_weight;
}

}  // namespace

LossBreakdown evaluate_loss(const TopicDiffModel& model, const std::vector<Conversation>& split) {
  if (split.empty()) throw ContractError("evaluate_loss: empty split");
  ad::NoGradGuard guard;
  auto streams = eval_streams(model.train_config().seed);
  LossBreakdown acc;
  double n = 0;
  for_each_chunk(split, kEvalBatch, [&](const mce::ConversationBatch& batch) {
    const auto out = model.forward(batch, false, streams);
    const auto w = static_cast<double>(batch.num_utterances());
    accumulate(acc, out, w);
    n += w;
  });
  normalize(acc, n);
  return acc;
}

std::vector<std::size_t> predict(const TopicDiffModel& model, const std::vector<Conversation>& split) {
  ad::NoGradGuard guard;
  auto streams = eval_streams(model.train_config().seed);
  std::vector<std::size_t> pred;
  for_each_chunk(split, kEvalBatch, [&](const mce::ConversationBatch& batch) {
    const auto out = model.forward(batch, false, streams);
    const std::size_t C = out.logits.cols();
    for (std::size_t r = 0; r < out.logits.rows(); ++r) pred.push_back(mce::argmax(out.logits.data().subspan(r * C, C)));
  });
  return pred;
}

eval::MetricReport evaluate(const TopicDiffModel& model, const std::vector<Conversation>& split,
                            const DatasetMeta& meta, const std::string& variant, std::uint64_t seed) {
  std::vector<std::size_t> gold;
  for (const auto& c : split)
    for (const auto& u : c.utterances) gold.push_back(u.label);
  eval::MetricReport report = eval::weighted_f1(gold, predict(model, split), meta.num_classes);
  report.variant = variant;
  report.seed = seed;
  report.class_names = meta.class_names;
  return report;
}

// ---------------------------------------------------------------------------
// Training

void to_json(json& j, const TrainHistory& h) {
  auto losses = [](const LossBreakdown& l) {
    return json{{"mce", l.mce}, {"rec", l.rec}, {"kl", l.kl}, {"dsm", l.dsm}, {"total", l.total}};
  };
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back(
        {{"epoch", e.epoch}, {"train", losses(e.train)}, {"val_total", e.val_total}, {"clipped_steps", e.clipped_steps}});
  j = json{{"initial_train", losses(h.initial_train)},
           {"epochs", epochs},
           {"best_epoch", h.best_epoch},
           {"stop_reason", h.stop_reason}};
}

TrainResult train_joint(const Dataset& data, const ModelConfig& model_cfg, const DiffusionConfig& diffusion,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty() || data.val.empty()) throw ContractError("train_joint: train and val splits must be non-empty");
  TrainResult result{TopicDiffModel(model_cfg, diffusion, cfg, data.meta.dims, data.meta.num_classes), {}};
  TopicDiffModel& model = result.model;
  TrainHistory& history = result.history;

  nn::ParamList main = model.main_params();
  nn::ParamList score = model.score_params();
  nn::Adam main_opt(main, {.lr = cfg.lr_vae, .weight_decay = cfg.weight_decay_vae});
  std::optional<nn::Adam> score_opt;
  if (!score.empty()) score_opt.emplace(score, nn::Adam::Options{.lr = cfg.lr_score, .weight_decay = cfg.weight_decay_score});

  TopicDiffModel::Streams streams{Rng(derive_seed(cfg.seed, "dropout")), Rng(derive_seed(cfg.seed, "reparam")),
                                  Rng(derive_seed(cfg.seed, "tdb"))};
  Rng dsm_rng(derive_seed(cfg.seed, "dsm"));
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  history.initial_train = evaluate_loss(model, data.train);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_val = std::numeric_limits<double>::infinity();
  nn::ParamList all = model.all_params();
  auto best = nn::snapshot(all);
  std::size_t since_best = 0;
  history.stop_reason = "max_epochs";

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += cfg.batch, ++step) {
      const std::string where = "epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
      std::vector<const Conversation*> picked;
      for (std::size_t i = start; i < std::min(start + cfg.batch, order.size()); ++i)
        picked.push_back(&data.train[order[i]]);
      const mce::ConversationBatch batch(picked);
      try {
        const auto out = model.forward(batch, true, streams);
        if (!std::isfinite(out.l_total.item())) throw NumericError("non-finite L_total");
        out.l_total.backward();
        if (nn::clip_grad_norm(main, cfg.clip_norm)) ++rec.clipped_steps;
        main_opt.step();
        main_opt.zero_grad();

        double dsm = 0;
        if (score_opt) {
          Tensor l_dsm;
          for (std::size_t m = 0; m < kNumModalities; ++m) {
            if (!out.z_hat[m].defined()) continue;
            const Tensor l = tdb::dsm_loss(model.score(m), out.z_hat[m], model.schedule(), dsm_rng);
            l_dsm = l_dsm.defined() ? l_dsm + l : l;
          }
          dsm = l_dsm.item();
          if (!std::isfinite(dsm)) throw NumericError("non-finite L_dsm");
          l_dsm.backward();
          if (nn::clip_grad_norm(score, cfg.clip_norm)) ++rec.clipped_steps;
          score_opt->step();
          score_opt->zero_grad();
        }
        const auto w = static_cast<double>(batch.num_utterances());
        accumulate(rec.train, out, w);
        rec.train.dsm += w * dsm;
        seen += w;
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at " + where + ": " + e.what());
      } catch (const DomainError& e) {
        throw TrainingError("training diverged at " + where + ": " + e.what());
      }
    }
    normalize(rec.train, seen);
    rec.val_total = evaluate_loss(model, data.val).total;
    if (!std::isfinite(rec.val_total))
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": non-finite validation loss");
    log::debug("epoch " + std::to_string(epoch) + " train " + std::to_string(rec.train.total) + " val " +
               std::to_string(rec.val_total));
    history.epochs.push_back(rec);
    if (rec.val_total < best_val) {
      best_val = rec.val_total;
      history.best_epoch = epoch;
      best = nn::snapshot(all);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      history.stop_reason = "patience";
      break;
    }
  }
  nn::restore(all, best);
  return result;
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<double> AblationReport::scores(const std::string& variant_id) const {
  const auto it = std::find_if(variants.begin(), variants.end(), [&](const Variant& v) { return v.id == variant_id; });
  if (it == variants.end()) throw ContractError("ablation report: no variant '" + variant_id + "'");
  const auto v = static_cast<std::size_t>(it - variants.begin());
  std::vector<double> out;
  for (std::size_t s = 0; s < seeds.size(); ++s) out.push_back(rows[v * seeds.size() + s].weighted_f1);
  return out;
}

double AblationReport::mean_score(const std::string& variant_id) const {
  const auto s = scores(variant_id);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

void to_json(json& j, const AblationReport& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    json row = r.rows[i];
    row["variant_id"] = r.variants[i / r.seeds.size()].id;
    row["dataset_hash"] = r.dataset_hash;
    rows.push_back(std::move(row));
  }
  json tests = json::array();
  for (const auto& t : r.tests)
    tests.push_back({{"a", t.a},
                     {"b", t.b},
                     {"mean_diff", t.result.mean_diff},
                     {"t", t.result.t},
                     {"p", t.result.p},
                     {"dof", t.result.dof},
                     {"degenerate", t.result.degenerate}});
  json summary = json::array();
  for (const auto& v : r.variants) summary.push_back({{"variant_id", v.id}, {"variant", v.name}, {"mean_w_f1", r.mean_score(v.id)}});
  j = json{{"dataset_hash", r.dataset_hash}, {"seeds", r.seeds}, {"summary", summary}, {"rows", rows}, {"tests", tests}};
}

AblationReport run_ablation(const Dataset& data, const ModelConfig& model_cfg, const DiffusionConfig& diffusion,
                            const TrainConfig& base, const AblationPlan& plan) {
  if (plan.variants.empty()) throw ContractError("ablation: variant list must not be empty");
  if (plan.seeds.empty()) throw ContractError("ablation: seed list must not be empty");
  std::set<std::string> ids;
  for (const auto& v : plan.variants)
    if (!ids.insert(v.id).second) throw ContractError("ablation: variant '" + v.id + "' listed twice");
  for (const auto& [a, b] : plan.pairs)
    if (!ids.count(a) || !ids.count(b)) throw ContractError("ablation: pair " + a + " / " + b + " names an unknown variant");

  AblationReport report;
  report.dataset_hash = data.content_hash();
  report.seeds = plan.seeds;
  report.variants = plan.variants;
  report.rows.resize(plan.variants.size() * plan.seeds.size());

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t job; (job = next++) < report.rows.size();) {
      {
        std::lock_guard lock(error_mu);
        if (error) return;
      }
      try {
        const Variant& v = plan.variants[job / plan.seeds.size()];
        TrainConfig cfg = base;
        v.apply(cfg);
        cfg.seed = plan.seeds[job % plan.seeds.size()];
        log::info("ablation: " + v.id + " seed " + std::to_string(cfg.seed));
        const auto trained = train_joint(data, model_cfg, diffusion, cfg);
        report.rows[job] = evaluate(trained.model, data.test, data.meta, v.name, cfg.seed);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(plan.jobs, 1, report.rows.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (const auto& [a, b] : plan.pairs) {
    const auto sa = report.scores(a), sb = report.scores(b);
    report.tests.push_back({a, b, eval::paired_t_test(sa, sb)});
  }
  return report;
}

}  // namespace topicdiff::train
