// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/mce.hpp"

#include <numeric>

#include "topicdiff/error.hpp"

namespace topicdiff::mce {

ConversationBatch::ConversationBatch(std::span<const Conversation* const> conversations) { build(conversations); }

ConversationBatch::ConversationBatch(std::span<const Conversation> conversations) {
  std::vector<const Conversation*> ptrs;
  for (const auto& c : conversations) ptrs.push_back(&c);
  build(ptrs);
}

void ConversationBatch::build(std::span<const Conversation* const> conversations) {
  if (conversations.empty()) throw ContractError("ConversationBatch: no conversations");
  const std::size_t B = conversations.size();
  for (const auto* c : conversations) {
    if (c->utterances.empty()) throw ContractError("conversation '" + c->id + "' is empty");
    lengths_.push_back(c->size());
    max_len_ = std::max(max_len_, c->size());
    for (const auto& u : c->utterances) labels_.push_back(u.label);
  }
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const std::size_t d = conversations[0]->utterances[0].features[m].size();
    for (int rev = 0; rev < 2; ++rev) {
      std::vector<double> x(max_len_ * B * d, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& utts = conversations[b]->utterances;
        for (std::size_t i = 0; i < utts.size(); ++i) {
          const auto& f = utts[i].features[m];
          if (f.size() != d) throw ShapeError("conversation '" + conversations[b]->id + "': inconsistent feature dims");
          const std::size_t t = rev ? utts.size() - 1 - i : i;
          std::copy(f.begin(), f.end(), x.begin() + static_cast<long>((t * B + b) * d));
        }
      }
      inputs_[m][rev] = Tensor({max_len_ * B, d}, std::move(x));
    }
  }
  for (int rev = 0; rev < 2; ++rev) {
    auto& rows = time_rows_[rev];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < lengths_[b]; ++i) {
        const std::size_t t = rev ? lengths_[b] - 1 - i : i;
        rows.push_back(t * B + b);
      }
  }
}

// ---------------------------------------------------------------------------

ContextEncoder::ContextEncoder(std::size_t in_dim, std::size_t hidden_dim, Rng& rng)
    : forward_(in_dim, hidden_dim, rng), backward_(in_dim, hidden_dim, rng) {}

Tensor ContextEncoder::run(const nn::GruCell& cell, const ConversationBatch& batch, std::size_t modality,
                           bool reversed) const {
  const Tensor& x = batch.inputs(modality, reversed);
  if (x.cols() != cell.in_dim())
    throw ShapeError("ContextEncoder: modality width " + std::to_string(x.cols()) + ", encoder expects " +
                     std::to_string(cell.in_dim()));
  const std::size_t B = batch.num_conversations();
  // One projection for every time step; padded steps are computed but never read.
  const Tensor projected = ad::add(ad::matmul_nt(x, cell.w_input), cell.bias);
  Tensor h = Tensor::zeros({B, cell.hidden_dim()});
  std::vector<Tensor> states;
  states.reserve(batch.max_length());
  for (std::size_t t = 0; t < batch.max_length(); ++t) {
    h = cell.step_projected(ad::slice_rows(projected, t * B, (t + 1) * B), h);
    states.push_back(h);
  }
  return ad::gather_rows(ad::concat_rows(states), batch.time_rows(reversed));
}

Tensor ContextEncoder::encode(const ConversationBatch& batch, std::size_t modality) const {
  return ad::concat({run(forward_, batch, modality, false), run(backward_, batch, modality, true)});
}

void ContextEncoder::collect(nn::ParamList& out, const std::string& prefix) const {
  forward_.collect(out, prefix + "/fwd");
  backward_.collect(out, prefix + "/bwd");
}

std::vector<ContextFeatures> ct_encode(const std::array<ContextEncoder, kNumModalities>& encoders,
                                       const Conversation& conv) {
  if (conv.utterances.empty()) throw ContractError("ct_encode: conversation '" + conv.id + "' is empty");
  const Conversation* one[] = {&conv};
  const ConversationBatch batch(one);
  std::vector<ContextFeatures> out(conv.size());
  ad::NoGradGuard guard;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Tensor h = encoders[m].encode(batch, m);
    for (std::size_t i = 0; i < conv.size(); ++i) {
      const auto row = h.data().subspan(i * h.cols(), h.cols());
      out[i].h[m].assign(row.begin(), row.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor fuse(const Tensor& h, const Tensor& z) { return ad::concat({h, z}); }

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Tensor classify_logits(const nn::Mlp& head, std::span<const Tensor> fused, nn::ForwardMode mode) {
  const Tensor joined = fused.size() == 1 ? fused[0] : ad::concat(fused);
  if (joined.cols() != head.in_dim())
    throw ShapeError("classify: fused width " + std::to_string(joined.cols()) + ", head expects " +
                     std::to_string(head.in_dim()));
  return head.forward(joined, mode);
}

std::vector<EmotionPrediction> classify(const nn::Mlp& head, std::span<const Tensor> fused) {
  ad::NoGradGuard guard;
  const Tensor probs = ad::softmax(classify_logits(head, fused));
  std::vector<EmotionPrediction> out(probs.rows());
  const std::size_t C = probs.cols();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto row = probs.data().subspan(r * C, C);
    out[r].probs.assign(row.begin(), row.end());
    out[r].predicted = argmax(row);
  }
  return out;
}

namespace {

void check_labels(const Tensor& t, std::span<const std::size_t> labels, std::span<const std::size_t> sizes) {
  if (t.rank() != 2 || labels.size() != t.rows())
    throw ContractError("mce_loss: need one label per prediction row");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != labels.size())
    throw ContractError("mce_loss: conversation sizes add up to " + std::to_string(total) + ", got " +
                        std::to_string(labels.size()) + " predictions");
  for (auto y : labels)
    if (y >= t.cols()) throw ContractError("mce_loss: label " + std::to_string(y) + " out of range");
}

}  // namespace

Tensor mce_loss(const Tensor& probs, std::span<const std::size_t> labels,
                std::span<const std::size_t> conversation_sizes) {
  check_labels(probs, labels, conversation_sizes);
  return -ad::mean(ad::log(ad::pick(probs, labels)));
}

Tensor mce_loss_from_logits(const Tensor& logits, std::span<const std::size_t> labels,
                            std::span<const std::size_t> conversation_sizes) {
  check_labels(logits, labels, conversation_sizes);
  return -ad::mean(ad::pick(ad::log_softmax(logits), labels));
}

}  // namespace topicdiff::mce
