// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Topic-enriched diffusion block: a variance-exploding SDE over the topic
// latent, discretized to a geometric noise schedule, with a noise-conditional
// score network trained by denoising score matching and two samplers
// (annealed Langevin dynamics and reverse-time Euler–Maruyama).
//
// Noise levels are indexed from 0 (largest σ) to K−1 (smallest σ).

#ifndef TOPICDIFF_TDB_HPP_
#define TOPICDIFF_TDB_HPP_

#include <functional>
#include <span>
#include <vector>

#include "topicdiff/nn.hpp"

namespace topicdiff::tdb {

using ad::Tensor;

struct NoiseSchedule {
  std::vector<double> levels;  // strictly decreasing, σ_max first
  double t_horizon = 1.0;

  std::size_t size() const { return levels.size(); }
  double sigma(std::size_t level) const;
  double sigma_max() const { return levels.front(); }
  double sigma_min() const { return levels.back(); }
};

/// σ_k = σ_max·(σ_min/σ_max)^(k/(K−1)), k = 0..K−1. Endpoints are exact.
NoiseSchedule make_schedule(std::size_t num_levels, double sigma_min, double sigma_max);

struct LangevinConfig {
  std::size_t steps_per_level = 5;
  double step_scale = 2e-5;
  std::size_t start_level = 4;  // 0-based; ⌈K/2⌉−1 for K = 10

  void validate(const NoiseSchedule& schedule) const;
};

/// Score evaluated without gradients. `level` names the schedule level in use
/// and `sigma` the exact current noise scale (they differ inside reverse-SDE substeps).
using ScoreFn = std::function<Tensor(const Tensor& z, std::size_t level, double sigma)>;

struct ScoreNetConfig {
  std::size_t latent_dim = 20;
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 8;
};

/// s_θ(z, k) = net(z ⊕ e_k) / σ_k, with e_k a learned per-level embedding.
class ScoreNetwork {
 public:
  ScoreNetwork() = default;
  ScoreNetwork(const ScoreNetConfig& cfg, const NoiseSchedule& schedule, Rng& rng);

  /// Differentiable score for rows of z at per-row levels.
  Tensor forward(const Tensor& z, std::span<const std::size_t> levels) const;
  /// Gradient-free adapter for the samplers.
  ScoreFn as_score_fn() const;
  /// Same values as forward() with every row at `level`, computed without a graph.
  std::vector<double> evaluate(std::span<const double> z, std::size_t rows, std::size_t level) const;

  std::size_t latent_dim() const { return net_.out_dim(); }
  const nn::Mlp& net() const { return net_; }
  const Tensor& embeddings() const { return embeddings_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Mlp net_;
  Tensor embeddings_;  // [K, embed_dim]
  std::vector<double> sigmas_;
};

struct PerturbedLatent {
  Tensor z_tilde;
  std::size_t level = 0;
  Tensor eps;
};

/// z̃ = z + σ_k ε with ε ~ N(0, I).
PerturbedLatent perturb(const Tensor& z, const NoiseSchedule& schedule, std::size_t level, Rng& rng);
/// Same with a caller-supplied ε.
PerturbedLatent perturb_with(const Tensor& z, const NoiseSchedule& schedule, std::size_t level, const Tensor& eps);

/// Random ingredients of one DSM evaluation: a uniform level and ε per row.
struct DsmDraw {
  std::vector<std::size_t> levels;
  Tensor eps;
};

DsmDraw draw_dsm(std::size_t rows, std::size_t dim, const NoiseSchedule& schedule, Rng& rng);

/// Differentiable score of perturbed rows at per-row levels.
using TrainableScore = std::function<Tensor(const Tensor& z_tilde, std::span<const std::size_t> levels)>;

/// mean over rows of σ_k²‖s(z̃, k) + ε/σ_k‖², z̃ = z + σ_k ε. z carries no gradient.
Tensor dsm_loss(const TrainableScore& score, const Tensor& z_batch, const NoiseSchedule& schedule,
                const DsmDraw& draw);
Tensor dsm_loss(const ScoreNetwork& score, const Tensor& z_batch, const NoiseSchedule& schedule, Rng& rng);

/// Annealed Langevin from cfg.start_level to the last level:
/// z ← z + (α_k/2)·s(z, k) + √α_k·η, α_k = step_scale·σ_k²/σ_{K−1}².
Tensor langevin_denoise(const Tensor& z_tilde, const ScoreFn& score, const NoiseSchedule& schedule,
                        const LangevinConfig& cfg, Rng& rng);

/// Euler–Maruyama for the reverse VE SDE dz = −g²·s dt + g dŵ, with
/// `steps_per_interval` geometric substeps between consecutive schedule levels.
/// Each substep from σ_a to σ_b uses g²dt = σ_a² − σ_b². With `inject_noise`
/// false only the drift is integrated.
Tensor reverse_sde_euler(const Tensor& z_T, const ScoreFn& score, const NoiseSchedule& schedule,
                         std::size_t steps_per_interval, Rng& rng, bool inject_noise = true);

/// Value of `value`, gradient of `source`: backward passes dL/d(out) to
/// `source` unchanged.
Tensor straight_through(const Tensor& source, const Tensor& value);

/// enabled: perturb at cfg.start_level, then Langevin-denoise; the result is
/// tied to z_hat by a straight-through identity Jacobian. disabled: z_hat itself.
Tensor enrich(const Tensor& z_hat, const ScoreFn& score, const NoiseSchedule& schedule,
              const LangevinConfig& cfg, Rng& rng, bool enabled);

}  // namespace topicdiff::tdb

#endif  // TOPICDIFF_TDB_HPP_
