// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TOPICDIFF_NN_HPP_
#define TOPICDIFF_NN_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "topicdiff/autodiff.hpp"
#include "topicdiff/rng.hpp"

namespace topicdiff::nn {

using ad::Tensor;

/// Named trainable tensors. Names are slash-separated paths ("vae/a/f_mu/W").
using ParamList = std::vector<std::pair<std::string, Tensor>>;

/// Glorot-uniform matrix of shape [fan_out, fan_in], bound sqrt(6/(fan_in+fan_out)).
Tensor init_params(Rng& rng, std::size_t fan_in, std::size_t fan_out);
/// Zero bias of length n.
Tensor init_bias(std::size_t n);

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Linear(Tensor w, Tensor b);

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }

  /// y = x Wᵀ + b for x of shape [n, in] (or [in]).
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

enum class Activation { kTanh, kRelu };

Tensor activate(const Tensor& x, Activation act);

/// Inverted dropout: in training, zero each element with probability `rate` and
/// scale survivors by 1/(1-rate). Identity otherwise.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Per-call switches for stochastic layers.
struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

class Mlp {
 public:
  Mlp() = default;
  /// `dims` = {in, hidden..., out}. Hidden layers are activated and followed by
  /// dropout; the output layer is activated only when `activate_output` is set.
  Mlp(const std::vector<std::size_t>& dims, Activation act, double dropout_rate, Rng& rng,
      bool activate_output = false);

  Tensor forward(const Tensor& x, ForwardMode mode = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }
  Activation activation() const { return act_; }
  double dropout_rate() const { return dropout_rate_; }

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::kTanh;
  double dropout_rate_ = 0.0;
  bool activate_output_ = false;
};

/// Gated recurrent unit. Gate order inside the stacked matrices: update, reset, candidate.
struct GruCell {
  Tensor w_input;        // [3H, in]
  Tensor w_hidden_gate;  // [2H, H] update and reset
  Tensor w_hidden_cand;  // [H, H]
  Tensor bias;           // [3H]

  GruCell() = default;
  GruCell(std::size_t in, std::size_t hidden, Rng& rng);

  std::size_t in_dim() const { return w_input.dim(1); }
  std::size_t hidden_dim() const { return w_hidden_cand.dim(0); }

  /// h' = (1−z)⊙h + z⊙h̃ for x [n, in], h [n, H].
  Tensor step(const Tensor& x, const Tensor& h_prev) const;
  /// Same, with the input projection x Wᵀ + b already computed ([n, 3H]).
  Tensor step_projected(const Tensor& x_proj, const Tensor& h_prev) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Free-function form of GruCell::step.
Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev);

/// Adam with bias correction and classic L2 decay (weight_decay·θ added to the gradient).
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(ParamList params, Options opts);

  /// One update from the parameters' accumulated gradients (missing gradient = 0).
  /// Throws NumericError naming the parameter if a gradient is non-finite.
  void step();
  void zero_grad();

  const Options& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }
  long steps() const { return t_; }
  const ParamList& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParamList params_;
  Options opts_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Global L2 norm of all gradients in `params`.
double grad_norm(const ParamList& params);
/// Rescales gradients so their global norm is at most `max_norm`. Returns true if clipped.
bool clip_grad_norm(ParamList& params, double max_norm);

/// Deep copy of parameter values, used for best-epoch snapshots.
std::vector<std::vector<double>> snapshot(const ParamList& params);
void restore(ParamList& params, const std::vector<std::vector<double>>& values);

}  // namespace topicdiff::nn

#endif  // TOPICDIFF_NN_HPP_
