// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-modality neural topic model: an inference network mapping a context
// representation h to a diagonal Gaussian posterior over a topic latent, and a
// generative network reconstructing h from a latent sample.

#ifndef TOPICDIFF_TOPIC_VAE_HPP_
#define TOPICDIFF_TOPIC_VAE_HPP_

#include "topicdiff/nn.hpp"

namespace topicdiff::vae {

using ad::Tensor;

struct VaeConfig {
  std::size_t feature_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t latent_dim = 20;
  double dropout = 0.25;
  double log_sigma_min = -6.0;
  double log_sigma_max = 4.0;
};

/// Posterior parameters; rows are utterances.
struct Posterior {
  Tensor mu;
  Tensor log_sigma;
};

struct PosteriorSample {
  Tensor mu;
  Tensor log_sigma;
  Tensor eps;
  Tensor z_hat;
};

class InferenceNet {
 public:
  InferenceNet() = default;
  InferenceNet(const VaeConfig& cfg, Rng& rng);
  InferenceNet(nn::Mlp encoder, nn::Linear f_mu, nn::Linear f_sigma, const VaeConfig& cfg);

  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Linear& f_mu() const { return f_mu_; }
  const nn::Linear& f_sigma() const { return f_sigma_; }
  const VaeConfig& config() const { return cfg_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  friend Posterior infer_posterior(const InferenceNet&, const Tensor&, nn::ForwardMode);
  nn::Mlp encoder_;
  nn::Linear f_mu_, f_sigma_;
  VaeConfig cfg_;
};

class GenerativeNet {
 public:
  GenerativeNet() = default;
  GenerativeNet(const VaeConfig& cfg, Rng& rng);
  explicit GenerativeNet(nn::Mlp decoder) : decoder_(std::move(decoder)) {}

  Tensor reconstruct(const Tensor& z) const { return decoder_.forward(z); }
  const nn::Mlp& decoder() const { return decoder_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Mlp decoder_;
};

struct TopicVae {
  InferenceNet inference;
  GenerativeNet generative;

  TopicVae() = default;
  TopicVae(const VaeConfig& cfg, Rng& rng);
  void collect(nn::ParamList& out, const std::string& prefix) const;
};

/// μ and log σ (the σ head emits log σ, clamped to the configured range).
Posterior infer_posterior(const InferenceNet& net, const Tensor& h, nn::ForwardMode mode = {});

/// z_hat = μ + exp(log σ)⊙ε. ε is treated as a constant.
Tensor reparameterize(const Tensor& mu, const Tensor& log_sigma, const Tensor& eps);

/// Draws ε ~ N(0, I) and reparameterizes.
PosteriorSample sample_posterior(const Posterior& post, Rng& rng);

/// KL(N(μ, σ²) ‖ N(0, I)) summed over latent dims, averaged over rows.
Tensor kl_loss(const Tensor& mu, const Tensor& log_sigma);

/// ½‖h − h'‖² summed over features, averaged over rows.
Tensor squared_error(const Tensor& reconstructed, const Tensor& h);

/// Unit-variance Gaussian NLL (up to constants) of h under decoder(z_hat).
Tensor reconstruction_loss(const GenerativeNet& decoder, const Tensor& z_hat, const Tensor& h);

}  // namespace topicdiff::vae

#endif  // TOPICDIFF_TOPIC_VAE_HPP_
