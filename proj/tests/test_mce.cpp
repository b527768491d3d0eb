// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "topicdiff/error.hpp"
#include "topicdiff/mce.hpp"

using namespace topicdiff;
using ad::Tensor;

namespace {

Conversation make_conv(const std::string& id, std::size_t n, double offset) {
  Conversation c;
  c.id = id;
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.label = i % 3;
    u.features = {std::vector<double>{offset + static_cast<double>(i), 1.0},
                  std::vector<double>{0.5, -offset}, std::vector<double>{static_cast<double>(i) * 0.1, 0, 1}};
    c.utterances.push_back(u);
  }
  return c;
}

}  // namespace

TEST_CASE("mce_loss analytic cases") {
  const std::vector<std::size_t> labels{2, 0}, sizes{2};
  const Tensor onehot = Tensor::matrix({{0, 0, 1, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0, 0}});
  CHECK(mce::mce_loss(onehot, labels, sizes).item() == 0.0);
  const Tensor uniform = Tensor::full({2, 7}, 1.0 / 7);
  CHECK(std::abs(mce::mce_loss(uniform, labels, sizes).item() - std::log(7.0)) < 1e-12);
  CHECK(std::abs(mce::mce_loss_from_logits(Tensor::zeros({2, 7}), labels, sizes).item() - std::log(7.0)) < 1e-12);
  CHECK_THROWS_AS(mce::mce_loss(uniform, labels, std::vector<std::size_t>{3}), ContractError);
  CHECK_THROWS_AS(mce::mce_loss(uniform, std::vector<std::size_t>{7, 0}, sizes), ContractError);
}

TEST_CASE("mce_loss averages over all utterances of all conversations") {
  const Tensor probs = Tensor::matrix({{0.5, 0.5}, {0.25, 0.75}, {0.9, 0.1}});
  const std::vector<std::size_t> labels{0, 1, 1}, sizes{1, 2};
  const double expect = -(std::log(0.5) + std::log(0.75) + std::log(0.1)) / 3;
  CHECK(mce::mce_loss(probs, labels, sizes).item() == doctest::Approx(expect).epsilon(1e-14));
  const Tensor logits = ad::log(probs);
  CHECK(mce::mce_loss_from_logits(logits, labels, sizes).item() == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(mce::argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  CHECK(mce::argmax(std::vector<double>{1, 1, 1}) == 0);
  CHECK_THROWS_AS(mce::argmax(std::vector<double>{}), ContractError);
}

TEST_CASE("fusion puts h first") {
  const Tensor f = mce::fuse(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}}));
  CHECK(f.to_vector() == std::vector<double>{1, 2, 3});
}

TEST_CASE("classifier outputs a simplex per row") {
  Rng rng(3);
  const nn::Mlp head({5, 8, 4}, nn::Activation::kTanh, 0.25, rng);
  const std::vector<Tensor> fused{Tensor::matrix({{1, 2}, {0, 1}}), Tensor::matrix({{3, 4, 5}, {-1, -2, 0}})};
  const auto preds = mce::classify(head, fused);
  REQUIRE(preds.size() == 2);
  for (const auto& p : preds) {
    double s = 0;
    for (double v : p.probs) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(p.predicted == mce::argmax(p.probs));
  }
  CHECK_THROWS_AS(mce::classify(head, std::vector<Tensor>{Tensor::matrix({{1, 2}})}), ShapeError);
}

TEST_CASE("batched encoding equals per-conversation encoding") {
  Rng rng(5);
  std::array<mce::ContextEncoder, kNumModalities> enc{mce::ContextEncoder(2, 4, rng), mce::ContextEncoder(2, 4, rng),
                                                       mce::ContextEncoder(3, 4, rng)};
  const std::vector<Conversation> convs{make_conv("a", 3, 0.0), make_conv("b", 5, 1.0), make_conv("c", 1, -1.0)};
  const mce::ConversationBatch batch{std::span<const Conversation>(convs)};
  CHECK(batch.num_utterances() == 9);
  CHECK(batch.max_length() == 5);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Tensor h = enc[m].encode(batch, m);
    REQUIRE(h.shape() == ad::Shape{9, 8});
    std::size_t row = 0;
    for (const auto& c : convs) {
      const auto feats = mce::ct_encode(enc, c);
      for (const auto& f : feats) {
        for (std::size_t d = 0; d < 8; ++d) CHECK(h.at(row, d) == doctest::Approx(f.h[m][d]).epsilon(1e-13));
        ++row;
      }
    }
  }
}

TEST_CASE("zero encoder weights give identical states across positions") {
  Rng rng(1);
  mce::ContextEncoder enc(2, 3, rng);
  for (auto* cell : {&enc.forward_cell(), &enc.backward_cell()}) {
    cell->w_input = Tensor::zeros(cell->w_input.shape());
    cell->w_hidden_gate = Tensor::zeros(cell->w_hidden_gate.shape());
    cell->w_hidden_cand = Tensor::zeros(cell->w_hidden_cand.shape());
    cell->bias = Tensor::zeros(cell->bias.shape());
  }
  const std::vector<Conversation> convs{make_conv("x", 4, 2.0)};
  const mce::ConversationBatch batch{std::span<const Conversation>(convs)};
  const Tensor h = enc.encode(batch, 0);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t d = 0; d < 6; ++d) CHECK(h.at(r, d) == h.at(0, d));
}

TEST_CASE("bidirectional state: forward half ignores the future, backward half ignores the past") {
  Rng rng(6);
  mce::ContextEncoder enc(2, 3, rng);
  std::vector<Conversation> a{make_conv("a", 4, 0.0)}, b = a;
  b[0].utterances[3].features[0] = {9.0, -9.0};
  const Tensor ha = enc.encode(mce::ConversationBatch{std::span<const Conversation>(a)}, 0);
  const Tensor hb = enc.encode(mce::ConversationBatch{std::span<const Conversation>(b)}, 0);
  for (std::size_t d = 0; d < 3; ++d) CHECK(ha.at(2, d) == hb.at(2, d));
  CHECK(ha.at(2, 3) != hb.at(2, 3));
}
