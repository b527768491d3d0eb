// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/tdb.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "topicdiff/error.hpp"

namespace topicdiff::tdb {

namespace {

Tensor gaussian_like(const Tensor& like, Rng& rng) {
  std::vector<double> e(like.size());
  for (double& x : e) x = rng.normal();
  return Tensor(like.shape(), std::move(e));
}

void require_finite(const Tensor& t, const std::string& where) {
  for (double x : t.data())
    if (!std::isfinite(x)) throw NumericError(where + ": non-finite state");
}

}  // namespace

double NoiseSchedule::sigma(std::size_t level) const {
  if (level >= levels.size())
    throw ContractError("noise level " + std::to_string(level) + " outside schedule of " +
                        std::to_string(levels.size()));
  return levels[level];
}

NoiseSchedule make_schedule(std::size_t num_levels, double sigma_min, double sigma_max) {
  if (num_levels < 2) throw ContractError("make_schedule: need at least 2 levels");
  if (!(sigma_min > 0 && sigma_min < sigma_max))
    throw ContractError("make_schedule: need 0 < sigma_min < sigma_max");
  NoiseSchedule s;
  s.levels.resize(num_levels);
  const double ratio = sigma_min / sigma_max;
  for (std::size_t k = 0; k < num_levels; ++k)
    s.levels[k] = sigma_max * std::pow(ratio, static_cast<double>(k) / static_cast<double>(num_levels - 1));
  s.levels.front() = sigma_max;
  s.levels.back() = sigma_min;
  return s;
}

void LangevinConfig::validate(const NoiseSchedule& schedule) const {
  if (start_level >= schedule.size())
    throw ContractError("Langevin start_level " + std::to_string(start_level) + " outside schedule of " +
                        std::to_string(schedule.size()));
  if (!(step_scale > 0)) throw ContractError("Langevin step_scale must be positive");
}

// ---------------------------------------------------------------------------

ScoreNetwork::ScoreNetwork(const ScoreNetConfig& cfg, const NoiseSchedule& schedule, Rng& rng)
    : net_({cfg.latent_dim + cfg.embed_dim, cfg.hidden_dim, cfg.hidden_dim, cfg.latent_dim},
           nn::Activation::kTanh, 0.0, rng),
      sigmas_(schedule.levels) {
  std::vector<double> e(schedule.size() * cfg.embed_dim);
  for (double& x : e) x = rng.normal();
  embeddings_ = Tensor({schedule.size(), cfg.embed_dim}, std::move(e), true);
}

Tensor ScoreNetwork::forward(const Tensor& z, std::span<const std::size_t> levels) const {
  if (z.rank() != 2 || z.cols() != latent_dim())
    throw ShapeError("ScoreNetwork: input " + ad::shape_string(z.shape()) + " does not match latent dim " +
                     std::to_string(latent_dim()));
  if (levels.size() != z.rows()) throw ShapeError("ScoreNetwork: need one level per row");
  std::vector<double> inv_sigma(z.size());
  const std::size_t d = z.cols();
  for (std::size_t r = 0; r < levels.size(); ++r) {
    if (levels[r] >= sigmas_.size()) throw ContractError("ScoreNetwork: level out of range");
    std::fill_n(inv_sigma.begin() + static_cast<long>(r * d), d, 1.0 / sigmas_[levels[r]]);
  }
  const Tensor input = ad::concat({z, ad::gather_rows(embeddings_, levels)});
  return net_.forward(input) * Tensor(z.shape(), std::move(inv_sigma));
}

ScoreFn ScoreNetwork::as_score_fn() const {
  return [this](const Tensor& z, std::size_t level, double) {
    if (z.rank() != 2 || z.cols() != latent_dim())
      throw ShapeError("ScoreNetwork: input " + ad::shape_string(z.shape()) + " does not match latent dim " +
                       std::to_string(latent_dim()));
    return Tensor(z.shape(), evaluate(z.data(), z.rows(), level));
  };
}

std::vector<double> ScoreNetwork::evaluate(std::span<const double> z, std::size_t rows, std::size_t level) const {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMatrix>;
  if (level >= sigmas_.size()) throw ContractError("ScoreNetwork: level out of range");
  const std::size_t d = latent_dim();
  if (z.size() != rows * d) throw ShapeError("ScoreNetwork: buffer does not hold rows x latent_dim values");
  const auto map = [](const Tensor& t) {
    return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  };
  const auto vec = [](const Tensor& t) {
    return Eigen::Map<const Eigen::RowVectorXd>(t.data().data(), static_cast<Eigen::Index>(t.size()));
  };
  const auto& layers = net_.layers();
  const auto w0 = map(layers[0].weight);
  const auto e = static_cast<Eigen::Index>(embeddings_.cols());
  const Eigen::RowVectorXd emb = map(embeddings_).row(static_cast<Eigen::Index>(level));
  const Eigen::RowVectorXd b0 = vec(layers[0].bias) + emb * w0.rightCols(e).transpose();

  RowMatrix h = ConstMap(z.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d)) *
                w0.leftCols(static_cast<Eigen::Index>(d)).transpose();
  h.rowwise() += b0;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    ad::tanh_values({h.data(), static_cast<std::size_t>(h.size())}, {h.data(), static_cast<std::size_t>(h.size())});
    RowMatrix next = h * map(layers[i].weight).transpose();
    next.rowwise() += vec(layers[i].bias);
    h = std::move(next);
  }
  h /= sigmas_[level];
  return {h.data(), h.data() + h.size()};
}

void ScoreNetwork::collect(nn::ParamList& out, const std::string& prefix) const {
  net_.collect(out, prefix + "/net");
  out.emplace_back(prefix + "/level_embedding", embeddings_);
}

// ---------------------------------------------------------------------------

PerturbedLatent perturb_with(const Tensor& z, const NoiseSchedule& schedule, std::size_t level, const Tensor& eps) {
  const double sigma = schedule.sigma(level);
  if (eps.shape() != z.shape()) throw ShapeError("perturb: eps must match z");
  std::vector<double> out(z.size());
  const auto zv = z.data(), ev = eps.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = zv[i] + sigma * ev[i];
  return {Tensor(z.shape(), std::move(out)), level, eps.detach()};
}

PerturbedLatent perturb(const Tensor& z, const NoiseSchedule& schedule, std::size_t level, Rng& rng) {
  schedule.sigma(level);  // range check before consuming randomness
  return perturb_with(z, schedule, level, gaussian_like(z, rng));
}

DsmDraw draw_dsm(std::size_t rows, std::size_t dim, const NoiseSchedule& schedule, Rng& rng) {
  if (rows == 0) throw ContractError("dsm: empty batch");
  DsmDraw d;
  d.levels.resize(rows);
  for (auto& k : d.levels) k = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(schedule.size()) - 1));
  std::vector<double> e(rows * dim);
  for (double& x : e) x = rng.normal();
  d.eps = Tensor({rows, dim}, std::move(e));
  return d;
}

Tensor dsm_loss(const TrainableScore& score, const Tensor& z_batch, const NoiseSchedule& schedule,
                const DsmDraw& draw) {
  if (z_batch.rank() != 2 || z_batch.rows() == 0) throw ContractError("dsm_loss: need a non-empty [n, d] batch");
  if (draw.levels.size() != z_batch.rows() || draw.eps.shape() != z_batch.shape())
    throw ShapeError("dsm_loss: draw does not match batch");
  const std::size_t n = z_batch.rows(), d = z_batch.cols();
  std::vector<double> tilde(z_batch.size()), sig(z_batch.size());
  const auto z = z_batch.data(), e = draw.eps.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double s = schedule.sigma(draw.levels[r]);
    for (std::size_t j = 0; j < d; ++j) {
      tilde[r * d + j] = z[r * d + j] + s * e[r * d + j];
      sig[r * d + j] = s;
    }
  }
  const Tensor s = score(Tensor(z_batch.shape(), std::move(tilde)), draw.levels);
  // σ²‖s + ε/σ‖² = ‖σ·s + ε‖²
  const Tensor residual = s * Tensor(z_batch.shape(), std::move(sig)) + draw.eps;
  return ad::sum(ad::square(residual)) * (1.0 / static_cast<double>(n));
}

Tensor dsm_loss(const ScoreNetwork& score, const Tensor& z_batch, const NoiseSchedule& schedule, Rng& rng) {
  const DsmDraw draw = draw_dsm(z_batch.rows(), z_batch.cols(), schedule, rng);
  return dsm_loss([&score](const Tensor& zt, std::span<const std::size_t> lv) { return score.forward(zt, lv); },
                  z_batch.detach(), schedule, draw);
}

// ---------------------------------------------------------------------------

Tensor langevin_denoise(const Tensor& z_tilde, const ScoreFn& score, const NoiseSchedule& schedule,
                        const LangevinConfig& cfg, Rng& rng) {
  cfg.validate(schedule);
  ad::NoGradGuard guard;
  std::vector<double> z = z_tilde.to_vector();
  const double last = schedule.sigma_min();
  for (std::size_t k = cfg.start_level; k < schedule.size(); ++k) {
    const double sigma = schedule.sigma(k);
    const double alpha = cfg.step_scale * sigma * sigma / (last * last);
    const double noise = std::sqrt(alpha);
    for (std::size_t step = 0; step < cfg.steps_per_level; ++step) {
      const Tensor s = score(Tensor(z_tilde.shape(), z), k, sigma);
      const auto sv = s.data();
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += 0.5 * alpha * sv[i] + noise * rng.normal();
        if (!std::isfinite(z[i]))
          throw NumericError("langevin_denoise: non-finite state at level " + std::to_string(k));
      }
    }
  }
  return Tensor(z_tilde.shape(), std::move(z));
}

Tensor reverse_sde_euler(const Tensor& z_T, const ScoreFn& score, const NoiseSchedule& schedule,
                         std::size_t steps_per_interval, Rng& rng, bool inject_noise) {
  if (steps_per_interval == 0) throw ContractError("reverse_sde_euler: n_steps must be >= 1");
  ad::NoGradGuard guard;
  std::vector<double> z = z_T.to_vector();
  const double n = static_cast<double>(steps_per_interval);
  for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
    const double hi = schedule.sigma(k), lo = schedule.sigma(k + 1);
    for (std::size_t j = 0; j < steps_per_interval; ++j) {
      const double sa = hi * std::pow(lo / hi, static_cast<double>(j) / n);
      const double sb = j + 1 == steps_per_interval ? lo : hi * std::pow(lo / hi, static_cast<double>(j + 1) / n);
      const double g2dt = sa * sa - sb * sb;
      const double noise = std::sqrt(g2dt);
      const Tensor s = score(Tensor(z_T.shape(), z), k, sa);
      const auto sv = s.data();
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += g2dt * sv[i];
        if (inject_noise) z[i] += noise * rng.normal();
      }
    }
    require_finite(Tensor(z_T.shape(), z), "reverse_sde_euler (level " + std::to_string(k) + ")");
  }
  return Tensor(z_T.shape(), std::move(z));
}

Tensor straight_through(const Tensor& source, const Tensor& value) {
  if (source.shape() != value.shape()) throw ShapeError("straight_through: shapes differ");
  const Tensor inputs[] = {source};
  return ad::custom_op("straight_through", source.shape(), ad::Buffer(value.data().begin(), value.data().end()), inputs, [](ad::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor enrich(const Tensor& z_hat, const ScoreFn& score, const NoiseSchedule& schedule,
              const LangevinConfig& cfg, Rng& rng, bool enabled) {
  if (!enabled) return z_hat;
  cfg.validate(schedule);
  const PerturbedLatent p = perturb(z_hat.detach(), schedule, cfg.start_level, rng);
  const Tensor denoised = langevin_denoise(p.z_tilde, score, schedule, cfg, rng);
  return straight_through(z_hat, denoised);
}

}  // namespace topicdiff::tdb
