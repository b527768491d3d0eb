// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint training of the emotion backbone with per-modality topic VAEs and
// diffusion blocks. Backbone and VAE parameters minimize
//
//   L_total = L_mce + α Σ_m L_rec(m) + β Σ_m L_kl(m)
//
// while the score networks minimize the denoising score-matching loss on
// detached posterior samples under a separate optimizer.

#ifndef TOPICDIFF_TRAINER_HPP_
#define TOPICDIFF_TRAINER_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "topicdiff/data.hpp"
#include "topicdiff/eval.hpp"
#include "topicdiff/mce.hpp"
#include "topicdiff/tdb.hpp"
#include "topicdiff/topic_vae.hpp"

namespace topicdiff::train {

using ad::Tensor;
using ModalityMask = std::array<bool, kNumModalities>;

struct ModelConfig {
  std::size_t gru_hidden = 32;
  std::size_t vae_hidden = 64;
  std::size_t latent_dim = 20;
  std::size_t head_hidden = 64;
  std::size_t score_hidden = 64;
  std::size_t level_embed_dim = 8;
  double dropout = 0.25;
};

struct DiffusionConfig {
  std::size_t levels = 10;
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  tdb::LangevinConfig langevin;

  tdb::NoiseSchedule schedule() const { return tdb::make_schedule(levels, sigma_min, sigma_max); }
};

struct TrainConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double lr_vae = 1e-4;
  double lr_score = 1e-5;
  double weight_decay_vae = 1e-4;
  double weight_decay_score = 1e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  bool topicdiff = true;    // false: plain backbone, no topic modules
  bool tdb_enabled = true;  // false: the "w/o TDB" path
  ModalityMask modality_mask{true, true, true};
  double clip_norm = 5.0;

  void validate() const;
};

/// Named model variant used in reports and ablations.
struct Variant {
  std::string id;    // directory-safe: baseline, wo_tdb, full, full:av, ...
  std::string name;  // report label
  bool topicdiff = true;
  bool tdb = true;
  ModalityMask mask{true, true, true};

  void apply(TrainConfig& cfg) const;
};

/// Parses "baseline", "wo_tdb", "full", optionally suffixed with ":<subset of avl>".
Variant parse_variant(const std::string& id);
Variant variant_of(const TrainConfig& cfg);
std::string mask_string(const ModalityMask& mask);
/// "avl" subset text → mask; throws ContractError for empty or invalid text.
ModalityMask parse_mask(const std::string& text);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const DiffusionConfig& c);
void from_json(const nlohmann::json& j, DiffusionConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// L_mce + α Σ rec + β Σ kl over the modalities in `mask`.
double total_loss(double l_mce, const std::array<double, kNumModalities>& rec,
                  const std::array<double, kNumModalities>& kl, double alpha, double beta,
                  const ModalityMask& mask = {true, true, true});
Tensor total_loss(const Tensor& l_mce, std::span<const Tensor> rec, std::span<const Tensor> kl, double alpha,
                  double beta);

/// Everything trainable for one variant.
class TopicDiffModel {
 public:
  TopicDiffModel(const ModelConfig& model, const DiffusionConfig& diffusion, const TrainConfig& train,
                 const std::array<std::size_t, kNumModalities>& dims, std::size_t num_classes);

  struct Streams {
    Rng dropout, reparam, tdb;
  };

  struct Output {
    Tensor logits;
    Tensor l_mce;
    std::array<Tensor, kNumModalities> rec, kl;  // undefined for modalities without topic modules
    std::array<Tensor, kNumModalities> z_hat;    // posterior samples feeding the score objective
    Tensor l_total;
  };

  /// training: dropout and posterior sampling on; eval: z_hat = μ, no dropout.
  Output forward(const mce::ConversationBatch& batch, bool training, Streams& streams) const;

  bool has_topic(std::size_t m) const { return vaes_[m].has_value(); }
  bool tdb_enabled() const { return train_.topicdiff && train_.tdb_enabled; }
  const tdb::NoiseSchedule& schedule() const { return schedule_; }
  const tdb::ScoreNetwork& score(std::size_t m) const { return *scores_[m]; }
  const vae::TopicVae& topic_vae(std::size_t m) const { return *vaes_[m]; }
  const std::array<mce::ContextEncoder, kNumModalities>& encoders() const { return encoders_; }
  const nn::Mlp& head() const { return head_; }
  const TrainConfig& train_config() const { return train_; }

  /// Backbone (encoders, head) and VAE parameters.
  nn::ParamList main_params() const;
  /// Score network parameters (empty without TDB).
  nn::ParamList score_params() const;
  nn::ParamList all_params() const;

 private:
  ModelConfig model_;
  DiffusionConfig diffusion_;
  TrainConfig train_;
  tdb::NoiseSchedule schedule_;
  std::array<mce::ContextEncoder, kNumModalities> encoders_;
  std::array<std::optional<vae::TopicVae>, kNumModalities> vaes_;
  std::array<std::optional<tdb::ScoreNetwork>, kNumModalities> scores_;
  nn::Mlp head_;
};

struct LossBreakdown {
  double mce = 0, rec = 0, kl = 0, dsm = 0, total = 0;
  bool operator==(const LossBreakdown&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  double val_total = 0;
  std::size_t clipped_steps = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;  // "patience" or "max_epochs"
  LossBreakdown initial_train;  // before the first update
  bool operator==(const TrainHistory&) const = default;
};

void to_json(nlohmann::json& j, const TrainHistory& h);

/// Mean loss components over a split in eval mode.
LossBreakdown evaluate_loss(const TopicDiffModel& model, const std::vector<Conversation>& split);

/// Predicted class of every utterance of `split`, in order.
std::vector<std::size_t> predict(const TopicDiffModel& model, const std::vector<Conversation>& split);

eval::MetricReport evaluate(const TopicDiffModel& model, const std::vector<Conversation>& split,
                            const DatasetMeta& meta, const std::string& variant, std::uint64_t seed);

struct TrainResult {
  TopicDiffModel model;
  TrainHistory history;
};

/// Trains with early stopping on validation L_total and restores the best epoch.
/// Throws TrainingError when a loss turns non-finite.
TrainResult train_joint(const Dataset& data, const ModelConfig& model_cfg, const DiffusionConfig& diffusion,
                        const TrainConfig& cfg);

struct PairTest {
  std::string a, b;  // variant ids
  eval::TTestResult result;
};

struct AblationReport {
  std::string dataset_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<Variant> variants;
  std::vector<eval::MetricReport> rows;  // variant-major, then seed
  std::vector<PairTest> tests;

  /// W-F1 of `variant_id` for every seed, in seed order.
  std::vector<double> scores(const std::string& variant_id) const;
  double mean_score(const std::string& variant_id) const;
};

void to_json(nlohmann::json& j, const AblationReport& r);

struct AblationPlan {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t jobs = 1;
};

/// Trains and scores every variant under every seed on the same data.
AblationReport run_ablation(const Dataset& data, const ModelConfig& model_cfg, const DiffusionConfig& diffusion,
                            const TrainConfig& base, const AblationPlan& plan);

}  // namespace topicdiff::train

#endif  // TOPICDIFF_TRAINER_HPP_
