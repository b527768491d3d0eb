// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/oracles.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

#include "topicdiff/error.hpp"
#include "topicdiff/mce.hpp"
#include "topicdiff/tdb.hpp"
#include "topicdiff/topic_vae.hpp"

namespace topicdiff::oracles {

using ad::Tensor;

bool DiagReport::pass() const {
  for (const auto& c : checks)
    if (!c.pass()) return false;
  return true;
}

double DiagReport::worst(const std::string& prefix) const {
  double w = 0;
  for (const auto& c : checks)
    if (c.name.rfind(prefix, 0) == 0) w = std::max(w, c.value / c.limit);
  return w;
}

std::string DiagReport::text() const {
  std::ostringstream out;
  out << std::setprecision(4);
  for (const auto& c : checks)
    out << (c.pass() ? "ok    " : "FAIL  ") << std::left << std::setw(44) << c.name << " " << std::scientific
        << c.value << " (limit " << c.limit << ")" << std::defaultfloat << "\n";
  out << name << ": " << (pass() ? "PASS" : "FAIL") << " (" << checks.size() << " checks)\n";
  return out.str();
}

void to_json(nlohmann::json& j, const DiagReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass()}});
  j = nlohmann::json{{"diagnostic", r.name}, {"pass", r.pass()}, {"checks", checks}};
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

constexpr double kGradLimit = 1e-4;

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Scalarizes an output against fixed random weights so every output entry matters.
ad::ScalarFn weighted(std::function<Tensor(const Tensor&)> f, const ad::Shape& out_shape, Rng& rng) {
  const Tensor w = random_tensor(out_shape, rng);
  return [f = std::move(f), w](const Tensor& x) { return ad::sum(f(x) * w); };
}

std::function<Tensor()> weighted_params(std::function<Tensor()> f, const ad::Shape& out_shape, Rng& rng) {
  const Tensor w = random_tensor(out_shape, rng);
  return [f = std::move(f), w]() { return ad::sum(f() * w); };
}

std::vector<Tensor> values_of(const nn::ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

void op_checks(DiagReport& r, Rng& rng) {
  auto add = [&](const std::string& name, const ad::ScalarFn& f, const Tensor& x) {
    r.checks.push_back({"op/" + name, ad::grad_check(f, x), kGradLimit});
  };
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  const Tensor m = random_tensor({4, 5}, rng), n = random_tensor({5, 4}, rng);
  const Tensor bias = random_tensor({4}, rng);
  const std::vector<std::size_t> picks{1, 3, 0};
  const std::vector<std::size_t> rows{2, 0, 2, 1};

  add("matmul/lhs", weighted([&](const Tensor& x) { return ad::matmul(x, m); }, {3, 5}, rng), a);
  add("matmul/rhs", weighted([&](const Tensor& x) { return ad::matmul(a, x); }, {3, 5}, rng), m);
  add("matmul_nt/lhs", weighted([&](const Tensor& x) { return ad::matmul_nt(x, n); }, {3, 5}, rng), a);
  add("matmul_nt/rhs", weighted([&](const Tensor& x) { return ad::matmul_nt(a, x); }, {3, 5}, rng), n);
  add("add", weighted([&](const Tensor& x) { return ad::add(x, b); }, {3, 4}, rng), a);
  add("add/bias", weighted([&](const Tensor& x) { return ad::add(a, x); }, {3, 4}, rng), bias);
  add("sub", weighted([&](const Tensor& x) { return ad::sub(b, x); }, {3, 4}, rng), a);
  add("mul", weighted([&](const Tensor& x) { return ad::mul(x, b); }, {3, 4}, rng), a);
  add("mul/self", weighted([](const Tensor& x) { return ad::mul(x, x); }, {3, 4}, rng), a);
  add("scale", weighted([](const Tensor& x) { return ad::scale(x, -2.5); }, {3, 4}, rng), a);
  add("add_scalar", weighted([](const Tensor& x) { return ad::add_scalar(x, 0.7); }, {3, 4}, rng), a);
  add("neg", weighted([](const Tensor& x) { return ad::neg(x); }, {3, 4}, rng), a);
  add("square", weighted([](const Tensor& x) { return ad::square(x); }, {3, 4}, rng), a);
  add("tanh", weighted([](const Tensor& x) { return ad::tanh(x); }, {3, 4}, rng), a * 2.0);
  add("sigmoid", weighted([](const Tensor& x) { return ad::sigmoid(x); }, {3, 4}, rng), a * 3.0);
  add("relu", weighted([](const Tensor& x) { return ad::relu(x); }, {4}, rng),
      Tensor({4}, {-0.8, -0.3, 0.4, 1.1}));
  add("exp", weighted([](const Tensor& x) { return ad::exp(x); }, {3, 4}, rng), a);
  add("log", weighted([](const Tensor& x) { return ad::log(x); }, {3, 4}, rng), random_tensor({3, 4}, rng, 0.2, 2.0));
  add("clamp", weighted([](const Tensor& x) { return ad::clamp(x, -0.5, 0.5); }, {4}, rng),
      Tensor({4}, {-0.9, -0.2, 0.3, 0.8}));
  add("softmax", weighted([](const Tensor& x) { return ad::softmax(x); }, {3, 4}, rng), a * 2.0);
  add("log_softmax", weighted([](const Tensor& x) { return ad::log_softmax(x); }, {3, 4}, rng), a * 2.0);
  add("concat", weighted([&](const Tensor& x) { return ad::concat({x, b, x}); }, {3, 12}, rng), a);
  add("slice", weighted([](const Tensor& x) { return ad::slice(x, 1, 3); }, {3, 2}, rng), a);
  add("pick", weighted([&](const Tensor& x) { return ad::pick(x, picks); }, {3}, rng), a);
  add("concat_rows", weighted([&](const Tensor& x) { return ad::concat_rows(std::vector<Tensor>{x, b, x}); }, {9, 4}, rng), a);
  add("slice_rows", weighted([](const Tensor& x) { return ad::slice_rows(x, 1, 3); }, {2, 4}, rng), a);
  add("gather_rows", weighted([&](const Tensor& x) { return ad::gather_rows(x, rows); }, {4, 4}, rng), a);
  add("sum", [](const Tensor& x) { return ad::sum(ad::square(x)); }, a);
  add("mean", [](const Tensor& x) { return ad::mean(ad::square(x)); }, a);
  add("straight_through",
      weighted([&](const Tensor& x) { return tdb::straight_through(x, ad::add(x, b).detach()); }, {3, 4}, rng), a);
  add("kl_loss/mu", [&](const Tensor& x) { return vae::kl_loss(x, b); }, a);
  add("kl_loss/log_sigma", [&](const Tensor& x) { return vae::kl_loss(a, x); }, b);
  add("squared_error", [&](const Tensor& x) { return vae::squared_error(x, b); }, a);
  add("reparameterize/mu", weighted([&](const Tensor& x) { return vae::reparameterize(x, b, a); }, {3, 4}, rng), a);
  add("reparameterize/log_sigma", weighted([&](const Tensor& x) { return vae::reparameterize(a, x, b); }, {3, 4}, rng), b);
  add("mce_loss/probs", [&](const Tensor& x) {
        const std::vector<std::size_t> sizes{3};
        return mce::mce_loss(ad::softmax(x), picks, sizes);
      }, a);
  add("mce_loss/logits", [&](const Tensor& x) {
        const std::vector<std::size_t> sizes{1, 2};
        return mce::mce_loss_from_logits(x, picks, sizes);
      }, a);
}

void network_checks(DiagReport& r, Rng& rng) {
  auto add = [&](const std::string& name, const std::function<Tensor()>& f, const nn::ParamList& params) {
    auto values = values_of(params);
    r.checks.push_back({"net/" + name + "/params", ad::grad_check_params(f, values), kGradLimit});
  };
  const Tensor x = random_tensor({4, 6}, rng);

  const nn::Linear linear(6, 3, rng);
  nn::ParamList p;
  linear.collect(p, "linear");
  add("linear", weighted_params([&] { return linear.forward(x); }, {4, 3}, rng), p);
  r.checks.push_back({"net/linear/input",
                      ad::grad_check(weighted([&](const Tensor& in) { return linear.forward(in); }, {4, 3}, rng), x),
                      kGradLimit});

  const nn::Mlp mlp({6, 8, 8, 3}, nn::Activation::kTanh, 0.25, rng);
  p.clear();
  mlp.collect(p, "mlp");
  add("mlp", weighted_params([&] { return mlp.forward(x); }, {4, 3}, rng), p);
  // Fixed dropout masks: a fresh rng with the same seed per evaluation.
  add("mlp/dropout", weighted_params([&] {
        Rng drop(7);
        return mlp.forward(x, {true, &drop});
      }, {4, 3}, rng), p);

  const nn::GruCell gru(6, 5, rng);
  const Tensor h0 = random_tensor({4, 5}, rng);
  p.clear();
  gru.collect(p, "gru");
  add("gru", weighted_params([&] { return gru.step(x, gru.step(x, h0)); }, {4, 5}, rng), p);
  r.checks.push_back({"net/gru/state",
                      ad::grad_check(weighted([&](const Tensor& h) { return gru.step(x, h); }, {4, 5}, rng), h0),
                      kGradLimit});

  // Bidirectional encoder over a ragged two-conversation batch.
  std::vector<Conversation> convs(2);
  for (std::size_t c = 0; c < 2; ++c) {
    convs[c].id = "c" + std::to_string(c);
    for (std::size_t i = 0; i < 2 + c; ++i) {
      Utterance u;
      for (auto& f : u.features) f = random_tensor({3}, rng).to_vector();
      convs[c].utterances.push_back(u);
    }
  }
  const mce::ConversationBatch batch(convs);
  const mce::ContextEncoder encoder(3, 4, rng);
  p.clear();
  encoder.collect(p, "encoder");
  add("bigru", weighted_params([&] { return encoder.encode(batch, 0); }, {5, 8}, rng), p);

  vae::VaeConfig vc;
  vc.feature_dim = 6;
  vc.hidden_dim = 7;
  vc.latent_dim = 3;
  const vae::TopicVae topic(vc, rng);
  const Tensor eps = random_tensor({4, 3}, rng);
  p.clear();
  topic.collect(p, "vae");
  add("vae", [&] {
        const auto post = vae::infer_posterior(topic.inference, x);
        const Tensor z = vae::reparameterize(post.mu, post.log_sigma, eps);
        return vae::reconstruction_loss(topic.generative, z, x) + vae::kl_loss(post.mu, post.log_sigma);
      }, p);

  const auto schedule = tdb::make_schedule(4, 0.1, 1.0);
  const tdb::ScoreNetwork score({3, 6, 4}, schedule, rng);
  const Tensor z = random_tensor({5, 3}, rng);
  Rng draw_rng(11);
  const auto draw = tdb::draw_dsm(5, 3, schedule, draw_rng);
  p.clear();
  score.collect(p, "score");
  add("score/dsm", [&] {
        return tdb::dsm_loss([&](const Tensor& zt, std::span<const std::size_t> lv) { return score.forward(zt, lv); },
                             z, schedule, draw);
      }, p);

  const nn::Mlp head({6, 8, 4}, nn::Activation::kTanh, 0.0, rng);
  const std::vector<std::size_t> labels{0, 3, 2, 1};
  const std::vector<std::size_t> sizes{4};
  p.clear();
  head.collect(p, "head");
  add("classifier", [&] {
        const Tensor fused[] = {x};
        return mce::mce_loss_from_logits(mce::classify_logits(head, fused), labels, sizes);
      }, p);
}

double sample_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

DiagReport grad_check_suite(std::uint64_t seed) {
  DiagReport r{"grad-check", {}};
  Rng rng(derive_seed(seed, "diag/grad-check"));
  op_checks(r, rng);
  network_checks(r, rng);
  return r;
}

// ---------------------------------------------------------------------------
// Samplers

DiagReport sde_demo(std::uint64_t seed) {
  DiagReport r{"sde-demo", {}};
  Rng rng(derive_seed(seed, "diag/sde-demo"));

  const auto schedule = tdb::make_schedule(10, 0.01, 1.0);
  for (std::size_t k : {std::size_t{0}, std::size_t{4}, std::size_t{9}}) {
    const Tensor z = Tensor::zeros({100000, 1});
    const auto p = tdb::perturb(z, schedule, k, rng);
    const double var = sample_variance(p.z_tilde.to_vector());
    const double s2 = schedule.sigma(k) * schedule.sigma(k);
    r.checks.push_back({"perturb/level" + std::to_string(k) + "/variance_rel_err", std::abs(var - s2) / s2, 0.02});
  }

  // Annealed Langevin towards N(m, s²) from the analytic perturbed score.
  const double m = 2.0, s = 0.5;
  const auto ld_schedule = tdb::make_schedule(10, 0.05, 1.0);
  const tdb::ScoreFn gaussian = [&](const Tensor& zt, std::size_t level, double) {
    const double v = s * s + ld_schedule.sigma(level) * ld_schedule.sigma(level);
    std::vector<double> out(zt.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(zt.at(i) - m) / v;
    return Tensor(zt.shape(), std::move(out));
  };
  const tdb::LangevinConfig ld{200, 0.01, 0};
  std::vector<double> init(2000);
  for (double& x : init) x = rng.normal();
  const auto ld_out = tdb::langevin_denoise(Tensor({2000, 1}, init), gaussian, ld_schedule, ld, rng).to_vector();
  r.checks.push_back({"langevin/mean_abs_err", std::abs(sample_mean(ld_out) - m), 0.05});
  r.checks.push_back({"langevin/variance_rel_err", std::abs(sample_variance(ld_out) - s * s) / (s * s), 0.10});

  // Reverse SDE towards a standard normal; the score sees the exact σ of each substep.
  const tdb::ScoreFn standard = [](const Tensor& zt, std::size_t, double sigma) {
    std::vector<double> out(zt.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -zt.at(i) / (1.0 + sigma * sigma);
    return Tensor(zt.shape(), std::move(out));
  };
  std::vector<double> start(5000);
  const double sd_T = std::sqrt(1.0 + schedule.sigma_max() * schedule.sigma_max());
  for (double& x : start) x = sd_T * rng.normal();
  const auto sde_out = tdb::reverse_sde_euler(Tensor({5000, 1}, start), standard, schedule, 20, rng).to_vector();
  r.checks.push_back({"reverse_sde/mean_abs_err", std::abs(sample_mean(sde_out)), 0.05});
  r.checks.push_back({"reverse_sde/variance_rel_err", std::abs(sample_variance(sde_out) - 1.0), 0.10});
  return r;
}

// ---------------------------------------------------------------------------
// Score matching

DiagReport dsm_oracle(std::uint64_t seed) {
  DiagReport r{"dsm-oracle", {}};
  Rng rng(derive_seed(seed, "diag/dsm-oracle"));
  const std::vector<double> mean{1.0, -0.5};
  const double s = 0.8;
  const auto schedule = tdb::make_schedule(2, 0.2, 1.0);
  tdb::ScoreNetwork net({2, 64, 8}, schedule, rng);
  nn::ParamList params;
  net.collect(params, "score");
  nn::Adam opt(params, {.lr = 2e-3});

  const std::size_t batch = 256;
  auto data_batch = [&] {
    std::vector<double> v(batch * 2);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mean[i % 2] + s * rng.normal();
    return Tensor({batch, 2}, std::move(v));
  };
  for (int step = 0; step < 3000; ++step) {
    if (step == 2000) opt.set_lr(4e-4);
    if (step == 2600) opt.set_lr(1e-4);
    const Tensor loss = tdb::dsm_loss(net, data_batch(), schedule, rng);
    loss.backward();
    opt.step();
    opt.zero_grad();
  }

  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const double v = s * s + schedule.sigma(k) * schedule.sigma(k);
    const double sd = std::sqrt(v);
    // Test points within two standard deviations of the perturbed marginal.
    std::vector<double> pts;
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j) {
        const double u = 0.5 * i * sd, w = 0.5 * j * sd;
        if (u * u + w * w > 4 * v) continue;
        pts.push_back(mean[0] + u);
        pts.push_back(mean[1] + w);
      }
    const std::size_t n = pts.size() / 2;
    const auto got = net.evaluate(pts, n, k);
    double se = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double want = -(pts[i] - mean[i % 2]) / v;
      se += (got[i] - want) * (got[i] - want);
    }
    r.checks.push_back({"score/level" + std::to_string(k) + "/mse", se / static_cast<double>(pts.size()), 0.05});
  }

  // The perturbation-kernel score is the exact minimizer.
  const Tensor z = data_batch();
  const auto draw = tdb::draw_dsm(batch, 2, schedule, rng);
  const Tensor exact = tdb::dsm_loss(
      [&](const Tensor&, std::span<const std::size_t> lv) {
        std::vector<double> out(draw.eps.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = -draw.eps.at(i) / schedule.sigma(lv[i / 2]);
        return Tensor(draw.eps.shape(), std::move(out));
      },
      z, schedule, draw);
  r.checks.push_back({"kernel_score/loss", exact.item(), 1e-20});
  return r;
}

DiagReport run_diag(const std::string& name, std::uint64_t seed) {
  if (name == "grad-check") return grad_check_suite(seed);
  if (name == "sde-demo") return sde_demo(seed);
  if (name == "dsm-oracle") return dsm_oracle(seed);
  throw ContractError("unknown diagnostic '" + name + "' (use grad-check, sde-demo or dsm-oracle)");
}

}  // namespace topicdiff::oracles
