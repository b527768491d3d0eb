// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/nn.hpp"

#include <cmath>

#include "topicdiff/error.hpp"

namespace topicdiff::nn {

Tensor init_params(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw ContractError("init_params: fans must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& x : w) x = rng.uniform(-bound, bound);
  return Tensor({fan_out, fan_in}, std::move(w), true);
}

Tensor init_bias(std::size_t n) { return Tensor::zeros({n}, true); }

// ---------------------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(init_params(rng, in, out)), bias(init_bias(out)) {}

Linear::Linear(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(0))
    throw ShapeError("Linear: weight " + ad::shape_string(weight.shape()) + " and bias " +
                     ad::shape_string(bias.shape()) + " disagree");
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.cols() != in_dim())
    throw ShapeError("Linear: input width " + std::to_string(x.cols()) + ", layer expects " +
                     std::to_string(in_dim()));
  if (x.rank() == 1) return ad::add(ad::matmul_nt(x.reshape({1, x.cols()}), weight), bias).reshape({out_dim()});
  return ad::add(ad::matmul_nt(x, weight), bias);
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + "/W", weight);
  out.emplace_back(prefix + "/b", bias);
}

// ---------------------------------------------------------------------------

Tensor activate(const Tensor& x, Activation act) {
  return act == Activation::kTanh ? ad::tanh(x) : ad::relu(x);
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  return ad::mul(x, Tensor(x.shape(), std::move(mask)));
}

Mlp::Mlp(const std::vector<std::size_t>& dims, Activation act, double dropout_rate, Rng& rng,
         bool activate_output)
    : act_(act), dropout_rate_(dropout_rate), activate_output_(activate_output) {
  if (dims.size() < 2) throw ContractError("Mlp: need at least input and output dims");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractError("Mlp: dropout rate must lie in [0, 1)");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers_.emplace_back(dims[i], dims[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x, ForwardMode mode) const {
  Tensor y = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    y = layers_[i].forward(y);
    const bool last = i + 1 == layers_.size();
    if (!last || activate_output_) y = activate(y, act_);
    if (!last && mode.training && dropout_rate_ > 0) {
      if (!mode.rng) throw ContractError("Mlp: training with dropout needs an rng");
      y = dropout(y, dropout_rate_, true, *mode.rng);
    }
  }
  return y;
}

void Mlp::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + "/" + std::to_string(i));
}

// ---------------------------------------------------------------------------

GruCell::GruCell(std::size_t in, std::size_t hidden, Rng& rng) {
  // Each gate block is initialized with its own fan sizes.
  std::vector<double> wi, wg;
  for (int g = 0; g < 3; ++g) {
    const auto block = init_params(rng, in, hidden).to_vector();
    wi.insert(wi.end(), block.begin(), block.end());
  }
  for (int g = 0; g < 2; ++g) {
    const auto block = init_params(rng, hidden, hidden).to_vector();
    wg.insert(wg.end(), block.begin(), block.end());
  }
  w_input = Tensor({3 * hidden, in}, std::move(wi), true);
  w_hidden_gate = Tensor({2 * hidden, hidden}, std::move(wg), true);
  w_hidden_cand = init_params(rng, hidden, hidden);
  bias = init_bias(3 * hidden);
}

Tensor GruCell::step_projected(const Tensor& x_proj, const Tensor& h_prev) const {
  const std::size_t H = hidden_dim();
  if (x_proj.cols() != 3 * H || h_prev.cols() != H || x_proj.rows() != h_prev.rows())
    throw ShapeError("gru_step: projected input " + ad::shape_string(x_proj.shape()) + " and state " +
                     ad::shape_string(h_prev.shape()) + " do not match hidden size " + std::to_string(H));
  const Tensor gates = ad::matmul_nt(h_prev, w_hidden_gate);
  const Tensor z = ad::sigmoid(ad::slice(x_proj, 0, H) + ad::slice(gates, 0, H));
  const Tensor r = ad::sigmoid(ad::slice(x_proj, H, 2 * H) + ad::slice(gates, H, 2 * H));
  const Tensor cand = ad::tanh(ad::slice(x_proj, 2 * H, 3 * H) + ad::matmul_nt(r * h_prev, w_hidden_cand));
  // (1 − z)⊙h + z⊙h̃ = h + z⊙(h̃ − h)
  return h_prev + z * (cand - h_prev);
}

Tensor GruCell::step(const Tensor& x, const Tensor& h_prev) const {
  if (x.rank() != 2 || x.cols() != in_dim())
    throw ShapeError("gru_step: input " + ad::shape_string(x.shape()) + " does not match input size " +
                     std::to_string(in_dim()));
  return step_projected(ad::add(ad::matmul_nt(x, w_input), bias), h_prev);
}

void GruCell::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + "/W_in", w_input);
  out.emplace_back(prefix + "/W_gate", w_hidden_gate);
  out.emplace_back(prefix + "/W_cand", w_hidden_cand);
  out.emplace_back(prefix + "/b", bias);
}

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev) { return cell.step(x, h_prev); }

// ---------------------------------------------------------------------------

Adam::Adam(ParamList params, Options opts) : params_(std::move(params)), opts_(opts) {
  if (opts_.lr < 0 || opts_.weight_decay < 0) throw ContractError("Adam: lr and weight_decay must be >= 0");
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  for (const auto& [name, p] : params_)
    for (double g : p.grad())
      if (!std::isfinite(g)) throw NumericError("Adam: non-finite gradient in parameter '" + name + "'");
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].second;
    auto theta = p.mutable_data();
    const auto grad = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = (grad.empty() ? 0.0 : grad[i]) + opts_.weight_decay * theta[i];
      m[i] = opts_.beta1 * m[i] + (1 - opts_.beta1) * g;
      v[i] = opts_.beta2 * v[i] + (1 - opts_.beta2) * g * g;
      theta[i] -= opts_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

double grad_norm(const ParamList& params) {
  double s = 0;
  for (const auto& [name, p] : params)
    for (double g : p.grad()) s += g * g;
  return std::sqrt(s);
}

bool clip_grad_norm(ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (!(norm > max_norm)) return false;
  const double f = max_norm / norm;
  for (auto& [name, p] : params)
    if (p.has_grad())
      for (double& g : p.mutable_grad()) g *= f;
  return true;
}

std::vector<std::vector<double>> snapshot(const ParamList& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& [name, p] : params) out.push_back(p.to_vector());
  return out;
}

void restore(ParamList& params, const std::vector<std::vector<double>>& values) {
  if (values.size() != params.size()) throw ContractError("restore: snapshot does not match parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto dst = params[k].second.mutable_data();
    if (dst.size() != values[k].size()) throw ShapeError("restore: size mismatch for " + params[k].first);
    std::copy(values[k].begin(), values[k].end(), dst.begin());
  }
}

}  // namespace topicdiff::nn
