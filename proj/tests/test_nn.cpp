// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "topicdiff/checkpoint.hpp"
#include "topicdiff/error.hpp"
#include "topicdiff/nn.hpp"

using namespace topicdiff;
using ad::Tensor;

TEST_CASE("linear layer identity and zero weight") {
  const nn::Linear id(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}));
  const Tensor x = Tensor::matrix({{3, -4}, {0.5, 2}});
  CHECK(id.forward(x).to_vector() == x.to_vector());
  const nn::Linear zero(Tensor::zeros({2, 3}), Tensor::vector({1, 2}));
  CHECK(zero.forward(Tensor::matrix({{9, 8, 7}})).to_vector() == std::vector<double>{1, 2});
  CHECK_THROWS_AS(zero.forward(Tensor::matrix({{1, 2}})), ShapeError);
}

TEST_CASE("linear gradient check") {
  Rng rng(3);
  nn::Linear layer(4, 3, rng);
  const Tensor x = Tensor::matrix({{0.1, -0.2, 0.3, 0.7}, {1.0, 0.0, -1.0, 0.5}});
  std::vector<Tensor> params{layer.weight, layer.bias};
  const double err =
      ad::grad_check_params([&] { return ad::sum(ad::tanh(layer.forward(x))); }, std::span<Tensor>(params));
  CHECK(err < 1e-6);
}

TEST_CASE("dropout: identity cases and expectation") {
  Rng rng(5);
  const Tensor x = Tensor::full({4, 5}, 2.0);
  CHECK(nn::dropout(x, 0.0, true, rng).to_vector() == x.to_vector());
  CHECK(nn::dropout(x, 0.9, false, rng).to_vector() == x.to_vector());
  CHECK_THROWS_AS(nn::dropout(x, 1.0, true, rng), ContractError);

  const Tensor ones = Tensor::full({1000, 1000}, 1.0);
  const auto masked = nn::dropout(ones, 0.25, true, rng).to_vector();
  double mean = 0;
  for (double v : masked) {
    CHECK((v == 0.0 || std::abs(v - 4.0 / 3.0) < 1e-15));
    mean += v;
  }
  mean /= static_cast<double>(masked.size());
  CHECK(std::abs(mean - 1.0) < 0.01);
}

TEST_CASE("GRU with zero parameters") {
  nn::GruCell cell;
  cell.w_input = Tensor::zeros({9, 2});
  cell.w_hidden_gate = Tensor::zeros({6, 3});
  cell.w_hidden_cand = Tensor::zeros({3, 3});
  cell.bias = Tensor::zeros({9});
  const Tensor x = Tensor::matrix({{1.5, -2.0}});
  CHECK(nn::gru_step(cell, x, Tensor::zeros({1, 3})).to_vector() == std::vector<double>{0, 0, 0});
  const auto h = nn::gru_step(cell, x, Tensor::matrix({{2.0, -4.0, 1.0}})).to_vector();
  CHECK(h == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("GRU matches a hand-written reference step") {
  Rng rng(9);
  const nn::GruCell cell(2, 3, rng);
  const std::vector<double> x{0.4, -0.7}, hp{0.1, -0.3, 0.2};
  const auto wi = cell.w_input.to_vector(), wg = cell.w_hidden_gate.to_vector(), wc = cell.w_hidden_cand.to_vector(),
             b = cell.bias.to_vector();
  const std::size_t H = 3;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> expect(H);
  std::vector<double> z(H), r(H);
  for (std::size_t j = 0; j < H; ++j) {
    double az = b[j], ar = b[H + j];
    for (std::size_t i = 0; i < 2; ++i) {
      az += wi[j * 2 + i] * x[i];
      ar += wi[(H + j) * 2 + i] * x[i];
    }
    for (std::size_t i = 0; i < H; ++i) {
      az += wg[j * H + i] * hp[i];
      ar += wg[(H + j) * H + i] * hp[i];
    }
    z[j] = sig(az);
    r[j] = sig(ar);
  }
  for (std::size_t j = 0; j < H; ++j) {
    double ac = b[2 * H + j];
    for (std::size_t i = 0; i < 2; ++i) ac += wi[(2 * H + j) * 2 + i] * x[i];
    for (std::size_t i = 0; i < H; ++i) ac += wc[j * H + i] * r[i] * hp[i];
    expect[j] = (1 - z[j]) * hp[j] + z[j] * std::tanh(ac);
  }
  const auto got = cell.step(Tensor({1, 2}, x), Tensor({1, 3}, hp)).to_vector();
  for (std::size_t j = 0; j < H; ++j) CHECK(got[j] == doctest::Approx(expect[j]).epsilon(1e-13));
}

TEST_CASE("GRU gradient check through three unrolled steps") {
  Rng rng(21);
  nn::GruCell cell(2, 3, rng);
  const Tensor xs = Tensor::matrix({{0.3, -0.1}, {0.9, 0.4}, {-0.5, 0.2}});
  std::vector<Tensor> params{cell.w_input, cell.w_hidden_gate, cell.w_hidden_cand, cell.bias};
  const double err = ad::grad_check_params(
      [&] {
        Tensor h = Tensor::zeros({1, 3});
        for (std::size_t t = 0; t < 3; ++t) h = cell.step(ad::slice_rows(xs, t, t + 1), h);
        return ad::sum(ad::square(h));
      },
      std::span<Tensor>(params));
  CHECK(err < 1e-4);
}

TEST_CASE("Glorot init bounds, zero bias, determinism") {
  Rng a(42), b(42);
  const Tensor w = nn::init_params(a, 300, 400);
  const double bound = std::sqrt(6.0 / 700.0);
  for (double v : w.data()) CHECK(std::abs(v) <= bound);
  CHECK(w.to_vector() == nn::init_params(b, 300, 400).to_vector());
  const Tensor bias = nn::init_bias(7);
  for (double v : bias.data()) CHECK(v == 0.0);
}

TEST_CASE("Adam: fixed point, first step, decay, lr 0") {
  auto make = [](double value, double grad) {
    Tensor p = Tensor::vector({value}, true);
    p.mutable_grad()[0] = grad;
    return p;
  };
  {
    Tensor p = make(0.0, 0.0);
    nn::Adam opt({{"p", p}}, {.lr = 1e-3});
    opt.step();
    CHECK(p.at(0) == 0.0);
  }
  {
    Tensor p = make(1.0, 0.37);
    nn::Adam opt({{"p", p}}, {.lr = 1e-3});
    opt.step();
    // m̂ = g, v̂ = g² after bias correction: Δ = −lr·g/(|g| + ε).
    CHECK(p.at(0) == doctest::Approx(1.0 - 1e-3 * 0.37 / (0.37 + 1e-8)).epsilon(1e-14));
  }
  {
    Tensor p = make(1.0, 0.0);
    nn::Adam opt({{"p", p}}, {.lr = 1e-3, .weight_decay = 1e-4});
    opt.step();
    CHECK(p.at(0) < 1.0);
    CHECK(opt.first_moment(0)[0] == doctest::Approx(0.1 * 1e-4));
  }
  {
    Tensor p = make(0.5, 3.0);
    nn::Adam opt({{"p", p}}, {.lr = 0.0, .weight_decay = 1e-4});
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(p.at(0) == 0.5);
  }
}

TEST_CASE("Adam rejects non-finite gradients with the parameter name") {
  Tensor p = Tensor::vector({1.0}, true);
  p.mutable_grad()[0] = std::nan("");
  nn::Adam opt({{"head/W", p}}, {});
  try {
    opt.step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("head/W") != std::string::npos);
  }
}

TEST_CASE("global norm clipping") {
  Tensor a = Tensor::vector({0.0, 0.0}, true), b = Tensor::vector({0.0}, true);
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 4.0;
  nn::ParamList params{{"a", a}, {"b", b}};
  CHECK(nn::grad_norm(params) == doctest::Approx(5.0));
  CHECK_FALSE(nn::clip_grad_norm(params, 5.0));
  CHECK(nn::clip_grad_norm(params, 1.0));
  CHECK(nn::grad_norm(params) == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(1);
  nn::Mlp mlp({3, 4, 2}, nn::Activation::kTanh, 0.0, rng);
  nn::ParamList params;
  mlp.collect(params, "mlp");
  const auto path = std::filesystem::temp_directory_path() / "topicdiff_ckpt_test.bin";
  nn::save_checkpoint(params, path);
  const auto ckpt = nn::load_checkpoint(path);
  CHECK(ckpt.size() == params.size());

  Rng other(2);
  nn::Mlp copy({3, 4, 2}, nn::Activation::kTanh, 0.0, other);
  nn::ParamList target;
  copy.collect(target, "mlp");
  nn::apply_checkpoint(ckpt, target);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(target[i].second.to_vector() == params[i].second.to_vector());

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
  CHECK_THROWS(nn::load_checkpoint(path));
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT";
  }
  CHECK_THROWS(nn::load_checkpoint(path));
  std::filesystem::remove(path);
}
