// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/topic_vae.hpp"

#include <algorithm>
#include <cmath>

#include "topicdiff/error.hpp"

namespace topicdiff::vae {

InferenceNet::InferenceNet(const VaeConfig& cfg, Rng& rng)
    : encoder_({cfg.feature_dim, cfg.hidden_dim, cfg.hidden_dim}, nn::Activation::kTanh, cfg.dropout, rng,
               /*activate_output=*/true),
      f_mu_(cfg.hidden_dim, cfg.latent_dim, rng),
      f_sigma_(cfg.hidden_dim, cfg.latent_dim, rng),
      cfg_(cfg) {}

InferenceNet::InferenceNet(nn::Mlp encoder, nn::Linear f_mu, nn::Linear f_sigma, const VaeConfig& cfg)
    : encoder_(std::move(encoder)), f_mu_(std::move(f_mu)), f_sigma_(std::move(f_sigma)), cfg_(cfg) {
  if (f_mu_.out_dim() != f_sigma_.out_dim())
    throw ShapeError("InferenceNet: f_mu and f_sigma must share the latent dimension");
  if (f_mu_.in_dim() != encoder_.out_dim() || f_sigma_.in_dim() != encoder_.out_dim())
    throw ShapeError("InferenceNet: heads do not match encoder output");
  cfg_.latent_dim = f_mu_.out_dim();
  cfg_.feature_dim = encoder_.in_dim();
}

void InferenceNet::collect(nn::ParamList& out, const std::string& prefix) const {
  encoder_.collect(out, prefix + "/encoder");
  f_mu_.collect(out, prefix + "/f_mu");
  f_sigma_.collect(out, prefix + "/f_sigma");
}

GenerativeNet::GenerativeNet(const VaeConfig& cfg, Rng& rng)
    : decoder_({cfg.latent_dim, cfg.hidden_dim, cfg.feature_dim}, nn::Activation::kTanh, 0.0, rng) {}

void GenerativeNet::collect(nn::ParamList& out, const std::string& prefix) const {
  decoder_.collect(out, prefix + "/decoder");
}

TopicVae::TopicVae(const VaeConfig& cfg, Rng& rng) : inference(cfg, rng), generative(cfg, rng) {}

void TopicVae::collect(nn::ParamList& out, const std::string& prefix) const {
  inference.collect(out, prefix + "/inference");
  generative.collect(out, prefix + "/generative");
}

Posterior infer_posterior(const InferenceNet& net, const Tensor& h, nn::ForwardMode mode) {
  if (h.cols() != net.encoder_.in_dim())
    throw ShapeError("infer_posterior: feature width " + std::to_string(h.cols()) + ", encoder expects " +
                     std::to_string(net.encoder_.in_dim()));
  const Tensor z = net.encoder_.forward(h, mode);
  return {net.f_mu_.forward(z),
          ad::clamp(net.f_sigma_.forward(z), net.cfg_.log_sigma_min, net.cfg_.log_sigma_max)};
}

Tensor reparameterize(const Tensor& mu, const Tensor& log_sigma, const Tensor& eps) {
  if (mu.shape() != log_sigma.shape() || mu.shape() != eps.shape())
    throw ShapeError("reparameterize: mu, log_sigma and eps must share a shape");
  return mu + ad::exp(log_sigma) * eps.detach();
}

PosteriorSample sample_posterior(const Posterior& post, Rng& rng) {
  std::vector<double> e(post.mu.size());
  for (double& x : e) x = rng.normal();
  Tensor eps(post.mu.shape(), std::move(e));
  Tensor z = reparameterize(post.mu, post.log_sigma, eps);
  return {post.mu, post.log_sigma, std::move(eps), std::move(z)};
}

Tensor kl_loss(const Tensor& mu, const Tensor& log_sigma) {
  if (mu.shape() != log_sigma.shape()) throw ShapeError("kl_loss: mu and log_sigma must share a shape");
  // ½ Σ (μ² + σ² − 1 − 2 log σ); σ² − 1 via expm1 so the zero point is exact.
  const double inv_rows = 1.0 / static_cast<double>(mu.rows());
  const auto m = mu.data();
  const auto l = log_sigma.data();
  double total = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    total += m[i] * m[i] + std::max(0.0, std::expm1(2.0 * l[i]) - 2.0 * l[i]);
  const Tensor inputs[] = {mu, log_sigma};
  return ad::custom_op("kl_loss", {1}, {0.5 * inv_rows * total}, inputs, [inv_rows](ad::Node& self) {
    auto& mu_node = *self.inputs[0];
    auto& ls_node = *self.inputs[1];
    const double g = self.grad[0] * inv_rows;
    if (mu_node.requires_grad) {
      auto& gm = mu_node.ensure_grad();
      for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g * mu_node.value[i];
    }
    if (ls_node.requires_grad) {
      auto& gl = ls_node.ensure_grad();
      for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g * std::expm1(2.0 * ls_node.value[i]);
    }
  });
}

Tensor squared_error(const Tensor& reconstructed, const Tensor& h) {
  if (reconstructed.shape() != h.shape())
    throw ShapeError("reconstruction: output " + ad::shape_string(reconstructed.shape()) + " vs target " +
                     ad::shape_string(h.shape()));
  return ad::sum(ad::square(h - reconstructed)) * (0.5 / static_cast<double>(h.rows()));
}

Tensor reconstruction_loss(const GenerativeNet& decoder, const Tensor& z_hat, const Tensor& h) {
  if (z_hat.cols() != decoder.decoder().in_dim())
    throw ShapeError("reconstruction_loss: latent width " + std::to_string(z_hat.cols()) + ", decoder expects " +
                     std::to_string(decoder.decoder().in_dim()));
  return squared_error(decoder.reconstruct(z_hat), h);
}

}  // namespace topicdiff::vae
