// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "topicdiff/autodiff.hpp"
#include "topicdiff/error.hpp"

using namespace topicdiff;
using ad::Tensor;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = n(gen);
  return Tensor({r, c}, v);
}

}  // namespace

TEST_CASE("matmul forward matches hand product") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5, 6, 7}, {8, 9, 10}});
  const Tensor c = ad::matmul(a, b);
  CHECK(c.shape() == ad::Shape{2, 3});
  CHECK(c.to_vector() == std::vector<double>{21, 24, 27, 47, 54, 61});
  const Tensor d = ad::matmul_nt(a, Tensor::matrix({{1, 0}, {0, 1}, {1, 1}}));
  CHECK(d.to_vector() == std::vector<double>{1, 2, 3, 3, 4, 7});
}

TEST_CASE("shape mismatches raise ShapeError") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(ad::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ad::mul(a, Tensor::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(ad::slice(a, 2, 5), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("domain errors for log and exp") {
  CHECK_THROWS_AS(ad::log(Tensor::vector({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(ad::exp(Tensor::vector({800.0})), DomainError);
}

TEST_CASE("elementwise values") {
  const Tensor x = Tensor::vector({-2.0, -0.001, 0.0, 0.5, 3.0});
  const auto t = ad::tanh(x).to_vector();
  const auto s = ad::sigmoid(x).to_vector();
  const auto r = ad::relu(x).to_vector();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.at(i);
    CHECK(t[i] == doctest::Approx(std::tanh(v)).epsilon(1e-14));
    CHECK(s[i] == doctest::Approx(1.0 / (1.0 + std::exp(-v))).epsilon(1e-14));
    CHECK(r[i] == (v > 0 ? v : 0.0));
  }
  CHECK(ad::clamp(x, -1.0, 1.0).to_vector() == std::vector<double>{-1.0, -0.001, 0.0, 0.5, 1.0});
}

TEST_CASE("tanh stays accurate near zero and in place") {
  std::vector<double> v{1e-9, -3e-3, 7e-3, 0.02, -25.0, 25.0};
  const std::vector<double> orig = v;
  ad::tanh_values(v, v);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(std::tanh(orig[i])).epsilon(1e-15));
}

TEST_CASE("softmax rows sum to one and log_softmax is consistent") {
  const Tensor x = Tensor::matrix({{1, 2, 3}, {1000, 1000, 1000}});
  const auto p = ad::softmax(x).to_vector();
  const auto lp = ad::log_softmax(x).to_vector();
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[3] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::exp(lp[i]) == doctest::Approx(p[i]).epsilon(1e-13));
}

TEST_CASE("backward of a shared subexpression accumulates") {
  Tensor x = Tensor::vector({3.0}, true);
  const Tensor y = ad::sum(ad::add(ad::mul(x, x), x));  // x² + x
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("detach and NoGradGuard cut the graph") {
  Tensor x = Tensor::vector({2.0}, true);
  ad::sum(ad::mul(x.detach(), x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  {
    ad::NoGradGuard guard;
    CHECK(ad::NoGradGuard::active());
    const Tensor y = ad::mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK_FALSE(ad::NoGradGuard::active());
}

TEST_CASE("backward needs a finite scalar") {
  const Tensor x = Tensor::vector({1.0, 2.0}, true);
  CHECK_THROWS_AS(ad::mul(x, x).backward(), ContractError);
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 gen(11);
  const Tensor a = random_matrix(3, 4, gen);
  const Tensor b = random_matrix(4, 2, gen);
  const Tensor pos = Tensor({3, 4}, [&] {
    std::vector<double> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.3 + 0.1 * static_cast<double>(i);
    return v;
  }());
  const std::vector<std::size_t> cols{1, 0, 3};
  const std::vector<std::size_t> rows{2, 0, 2};

  struct Case {
    const char* name;
    ad::ScalarFn f;
    Tensor x;
  };
  const std::vector<Case> cases{
      {"matmul", [&](const Tensor& x) { return ad::sum(ad::square(ad::matmul(x, b))); }, a},
      {"matmul_nt", [&](const Tensor& x) { return ad::sum(ad::tanh(ad::matmul_nt(x, a))); }, a},
      {"sigmoid", [](const Tensor& x) { return ad::mean(ad::mul(ad::sigmoid(x), x)); }, a},
      {"log", [](const Tensor& x) { return ad::sum(ad::log(x)); }, pos},
      {"exp", [](const Tensor& x) { return ad::mean(ad::exp(x)); }, a},
      {"softmax", [](const Tensor& x) { return ad::sum(ad::square(ad::softmax(x))); }, a},
      {"log_softmax", [&](const Tensor& x) { return ad::sum(ad::pick(ad::log_softmax(x), cols)); }, a},
      {"slice", [](const Tensor& x) { return ad::sum(ad::square(ad::slice(x, 1, 3))); }, a},
      {"gather_rows", [&](const Tensor& x) { return ad::sum(ad::tanh(ad::gather_rows(x, rows))); }, a},
      {"concat", [&](const Tensor& x) { return ad::sum(ad::square(ad::concat({x, ad::scale(x, 2.0)}))); }, a},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(ad::grad_check(c.f, c.x) < 1e-6);
  }
}

TEST_CASE("tape lists inputs before consumers") {
  const Tensor x = Tensor::vector({1.0, 2.0}, true);
  const Tensor y = ad::tanh(x);
  const Tensor z = ad::sum(ad::mul(y, x));
  const auto tape = ad::Tape::record(z);
  CHECK(tape.index_of(x.node().get()) < tape.index_of(y.node().get()));
  CHECK(tape.index_of(y.node().get()) < tape.index_of(z.node().get()));
}
