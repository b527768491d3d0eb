// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Basic multimodal conversational emotion backbone: one bidirectional GRU
// context encoder per modality, per-modality topic fusion, and an MLP head
// over the concatenated modality representations.

#ifndef TOPICDIFF_MCE_HPP_
#define TOPICDIFF_MCE_HPP_

#include <array>
#include <span>
#include <vector>

#include "topicdiff/data.hpp"
#include "topicdiff/nn.hpp"

namespace topicdiff::mce {

using ad::Tensor;

/// A set of conversations laid out for batched recurrent encoding.
/// Utterance rows follow conversation order, then position.
class ConversationBatch {
 public:
  explicit ConversationBatch(std::span<const Conversation* const> conversations);
  explicit ConversationBatch(std::span<const Conversation> conversations);

  std::size_t num_conversations() const { return lengths_.size(); }
  std::size_t num_utterances() const { return labels_.size(); }
  std::size_t max_length() const { return max_len_; }
  std::span<const std::size_t> lengths() const { return lengths_; }
  std::span<const std::size_t> labels() const { return labels_; }
  /// Time-major padded inputs [max_len·B, d]; `reversed` holds each conversation back to front.
  const Tensor& inputs(std::size_t modality, bool reversed) const { return inputs_[modality][reversed]; }
  /// Row of the time-major layout holding utterance `row` (forward or reversed direction).
  std::span<const std::size_t> time_rows(bool reversed) const { return time_rows_[reversed]; }

 private:
  void build(std::span<const Conversation* const> conversations);
  std::vector<std::size_t> lengths_, labels_;
  std::size_t max_len_ = 0;
  std::array<std::array<Tensor, 2>, kNumModalities> inputs_;
  std::array<std::vector<std::size_t>, 2> time_rows_;
};

/// Bidirectional GRU; h_i is the forward state at i concatenated with the backward state at i.
class ContextEncoder {
 public:
  ContextEncoder() = default;
  ContextEncoder(std::size_t in_dim, std::size_t hidden_dim, Rng& rng);

  /// [num_utterances, 2·hidden] for one modality of a batch.
  Tensor encode(const ConversationBatch& batch, std::size_t modality) const;
  std::size_t out_dim() const { return 2 * forward_.hidden_dim(); }
  std::size_t in_dim() const { return forward_.in_dim(); }
  nn::GruCell& forward_cell() { return forward_; }
  nn::GruCell& backward_cell() { return backward_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  Tensor run(const nn::GruCell& cell, const ConversationBatch& batch, std::size_t modality, bool reversed) const;
  nn::GruCell forward_, backward_;
};

struct ContextFeatures {
  std::array<std::vector<double>, kNumModalities> h;  // h_a, h_v, h_l
};

/// Context-aware representation of every utterance of one conversation.
std::vector<ContextFeatures> ct_encode(const std::array<ContextEncoder, kNumModalities>& encoders,
                                       const Conversation& conv);

/// f = h ⊕ z (h first).
Tensor fuse(const Tensor& h, const Tensor& z);

struct EmotionPrediction {
  std::vector<double> probs;
  std::size_t predicted = 0;  // argmax, lowest index on ties
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Logits of the head over the concatenated per-modality fused vectors.
Tensor classify_logits(const nn::Mlp& head, std::span<const Tensor> fused, nn::ForwardMode mode = {});
/// Softmax of classify_logits, one prediction per row.
std::vector<EmotionPrediction> classify(const nn::Mlp& head, std::span<const Tensor> fused);

/// −(1/Σ c(n)) Σ log p(gold) from probabilities. Sizes must add up to the row count.
Tensor mce_loss(const Tensor& probs, std::span<const std::size_t> labels,
                std::span<const std::size_t> conversation_sizes);
/// Same objective computed stably from logits.
Tensor mce_loss_from_logits(const Tensor& logits, std::span<const std::size_t> labels,
                            std::span<const std::size_t> conversation_sizes);

}  // namespace topicdiff::mce

#endif  // TOPICDIFF_MCE_HPP_
