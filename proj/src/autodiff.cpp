// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "topicdiff/error.hpp"

namespace topicdiff::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;

MapMatrix as_matrix(Buffer& v, std::size_t r, std::size_t c) {
  return MapMatrix(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

thread_local bool g_no_grad = false;

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

// Output node for an op; history is attached only when some input needs gradients.
std::shared_ptr<Node> make_node(const char* op, Shape shape, Buffer value,
                                std::vector<std::shared_ptr<Node>> inputs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  const bool needs =
      !g_no_grad && std::any_of(inputs.begin(), inputs.end(), [](const auto& in) { return in->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
  }
  return n;
}

std::string dims_error(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
         shape_string(b.shape());
}

// `bulk(in, out)` fills the whole output at once.
template <class B, class D>
Tensor unary_bulk(const char* op, const Tensor& a, B bulk, D dfdx) {
  require_defined(a, op);
  Buffer out(a.size());
  bulk(a.data(), std::span<double>(out));
  auto node = make_node(op, a.shape(), std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [dfdx](Node& self) {
      auto& x = *self.inputs[0];
      if (!x.requires_grad) return;
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx[i] += self.grad[i] * dfdx(x.value[i], self.value[i]);
    };
  }
  return Tensor::from_node(std::move(node));
}

template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
  return unary_bulk(
      op, a,
      [f](std::span<const double> in, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
      },
      dfdx);
}

// tanh through the vectorized exponential; a short series keeps small inputs
// accurate to the last bit.
void tanh_bulk(std::span<const double> in, std::span<double> out) {
  const Eigen::Map<const Eigen::ArrayXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
  Eigen::Map<Eigen::ArrayXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  std::vector<std::pair<std::size_t, double>> small;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (std::abs(in[i]) < 1e-2) small.emplace_back(i, in[i]);
  y = 1.0 - 2.0 / (1.0 + (2.0 * x).exp());
  for (const auto& [i, v] : small) {
    const double v2 = v * v;
    out[i] = v * (1.0 + v2 * (-1.0 / 3.0 + v2 * (2.0 / 15.0 + v2 * (-17.0 / 315.0))));
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Buffer& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : Tensor(from_buffer(std::move(shape), Buffer(data.begin(), data.end()), requires_grad)) {}

Tensor Tensor::from_buffer(Shape shape, Buffer data, bool requires_grad) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  if (shape_size(shape) != data.size())
    throw ShapeError("shape " + shape_string(shape) + " holds " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(data.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return from_buffer(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  if (rows.size() == 0) throw ShapeError("matrix: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("matrix: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("shape of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::rows() const { return size() / cols(); }
std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("mutable_data of an undefined tensor");
  if (!node_->is_leaf()) throw ContractError("mutable_data is only legal on leaf tensors");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_string(shape()));
  return node_->value[0];
}

std::vector<double> Tensor::to_vector() const { return {data().begin(), data().end()}; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_) throw ContractError("set_requires_grad on an undefined tensor");
  if (!node_->is_leaf()) throw ContractError("requires_grad can only be set on leaves");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw ContractError("grad of an undefined tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return from_buffer(node_->shape, node_->value, false);
}

Tensor Tensor::reshape(Shape new_shape) const {
  require_defined(*this, "reshape");
  if (shape_size(new_shape) != size())
    throw ShapeError("reshape: " + shape_string(shape()) + " -> " + shape_string(new_shape));
  auto node = make_node("reshape", std::move(new_shape), node_->value, {node_});
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      auto& x = *self.inputs[0];
      if (!x.requires_grad) return;
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    };
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(shape()));
  if (!node_->requires_grad) return;
  if (!std::isfinite(node_->value[0])) throw NumericError("backward: loss is not finite");
  const Tape tape = Tape::record(*this);
  node_->ensure_grad()[0] += 1.0;
  const auto nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node& n = **it;
    if (n.is_leaf() || n.grad.empty()) continue;
    n.backward(n);
  }
  for (Node* n : nodes) {
    if (!n->is_leaf()) {
      // Interior gradients are scratch space for one sweep.
      n->grad.clear();
      n->grad.shrink_to_fit();
      continue;
    }
    for (double g : n->grad)
      if (!std::isfinite(g)) throw NumericError("backward produced a non-finite gradient");
  }
}

// ---------------------------------------------------------------------------
// Tape

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_map<const Node*, bool> done;  // false = on stack, true = emitted
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  done[root.node().get()] = false;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !done.count(child)) {
        done[child] = false;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    done[node] = true;
    tape.order_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

long Tape::index_of(const Node* node) const {
  const auto it = std::find(order_.begin(), order_.end(), node);
  return it == order_.end() ? -1 : static_cast<long>(it - order_.begin());
}

Tensor custom_op(const char* name, Shape shape, Buffer value, std::span<const Tensor> inputs,
                 std::function<void(Node&)> backward) {
  if (shape_size(shape) != value.size()) throw ShapeError(std::string(name) + ": value does not fill shape");
  std::vector<std::shared_ptr<Node>> in;
  for (const auto& t : inputs) {
    require_defined(t, name);
    in.push_back(t.node());
  }
  auto node = make_node(name, std::move(shape), std::move(value), std::move(in));
  if (node->requires_grad) node->backward = std::move(backward);
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) throw ShapeError(dims_error("matmul", a, b));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Buffer out(n * m);
  as_matrix(out, n, m).noalias() = as_matrix(a.node()->value, n, k) * as_matrix(b.node()->value, k, m);
  auto node = make_node("matmul", {n, m}, std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backward = [n, k, m](Node& self) {
      auto& x = *self.inputs[0];
      auto& y = *self.inputs[1];
      const auto g = as_matrix(self.grad, n, m);
      if (x.requires_grad) as_matrix(x.ensure_grad(), n, k).noalias() += g * as_matrix(y.value, k, m).transpose();
      if (y.requires_grad) as_matrix(y.ensure_grad(), k, m).noalias() += as_matrix(x.value, n, k).transpose() * g;
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul_nt");
  require_defined(b, "matmul_nt");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) throw ShapeError(dims_error("matmul_nt", a, b));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  Buffer out(n * m);
  as_matrix(out, n, m).noalias() = as_matrix(a.node()->value, n, k) * as_matrix(b.node()->value, m, k).transpose();
  auto node = make_node("matmul_nt", {n, m}, std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backward = [n, k, m](Node& self) {
      auto& x = *self.inputs[0];
      auto& y = *self.inputs[1];
      const auto g = as_matrix(self.grad, n, m);
      if (x.requires_grad) as_matrix(x.ensure_grad(), n, k).noalias() += g * as_matrix(y.value, m, k);
      if (y.requires_grad) as_matrix(y.ensure_grad(), m, k).noalias() += g.transpose() * as_matrix(x.value, n, k);
    };
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() == b.shape()) {
    Buffer out(a.size());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    auto node = make_node("add", a.shape(), std::move(out), {a.node(), b.node()});
    if (node->requires_grad) {
      node->backward = [](Node& self) {
        for (auto& in : self.inputs) {
          if (!in->requires_grad) continue;
          auto& g = in->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
      };
    }
    return Tensor::from_node(std::move(node));
  }
  if (b.rank() == 1 && b.dim(0) == a.cols()) {
    const std::size_t r = a.rows(), c = a.cols();
    Buffer out(a.size());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + y[j];
    auto node = make_node("add_bias", a.shape(), std::move(out), {a.node(), b.node()});
    if (node->requires_grad) {
      node->backward = [r, c](Node& self) {
        auto& x = *self.inputs[0];
        auto& bias = *self.inputs[1];
        if (x.requires_grad) {
          auto& g = x.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bias.requires_grad) {
          auto& g = bias.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
        }
      };
    }
    return Tensor::from_node(std::move(node));
  }
  throw ShapeError(dims_error("add", a, b));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape()) throw ShapeError(dims_error("sub", a, b));
  Buffer out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  auto node = make_node("sub", a.shape(), std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      if (self.inputs[0]->requires_grad) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (self.inputs[1]->requires_grad) {
        auto& g = self.inputs[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) throw ShapeError(dims_error("mul", a, b));
  Buffer out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  auto node = make_node("mul", a.shape(), std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      auto& x = *self.inputs[0];
      auto& y = *self.inputs[1];
      if (x.requires_grad) {
        auto& g = x.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
      }
      if (y.requires_grad) {
        auto& g = y.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double x) { return x + value; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

void tanh_values(std::span<const double> in, std::span<double> out) {
  if (in.size() != out.size()) throw ShapeError("tanh_values: buffer sizes differ");
  tanh_bulk(in, out);
}

Tensor tanh(const Tensor& a) {
  return unary_bulk("tanh", a, tanh_bulk, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_bulk(
      "sigmoid", a,
      [](std::span<const double> in, std::span<double> out) {
        Buffer half(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) half[i] = 0.5 * in[i];
        tanh_bulk(half, out);
        for (double& y : out) y = 0.5 + 0.5 * y;
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  for (double x : a.data())
    if (!(x < 709.0)) throw DomainError("exp: argument " + std::to_string(x) + " overflows");
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  for (double x : a.data())
    if (!(x > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(x));
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be below hi");
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Last-axis operations

Tensor softmax(const Tensor& a) {
  require_defined(a, "softmax");
  const std::size_t r = a.rows(), c = a.cols();
  Buffer out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  auto node = make_node("softmax", a.shape(), std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [r, c](Node& self) {
      auto& x = *self.inputs[0];
      if (!x.requires_grad) return;
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor log_softmax(const Tensor& a) {
  require_defined(a, "log_softmax");
  const std::size_t r = a.rows(), c = a.cols();
  Buffer out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  auto node = make_node("log_softmax", a.shape(), std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [r, c](Node& self) {
      auto& x = *self.inputs[0];
      if (!x.requires_grad) return;
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        double gsum = 0;
        for (std::size_t j = 0; j < c; ++j) gsum += self.grad[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * gsum;
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts[0].shape();
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin()))
      throw ShapeError(dims_error("concat", parts[0], p));
    widths.push_back(p.cols());
    total += p.cols();
  }
  Buffer out(r * total);
  std::vector<std::shared_ptr<Node>> inputs;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(x.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
    inputs.push_back(parts[k].node());
  }
  Shape shape = first;
  shape.back() = total;
  auto node = make_node("concat", std::move(shape), std::move(out), std::move(inputs));
  if (node->requires_grad) {
    node->backward = [r, total, widths](Node& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < self.inputs.size(); ++k) {
        auto& in = *self.inputs[k];
        if (in.requires_grad) {
          auto& g = in.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * total + off + j];
        }
        off += widths[k];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice");
  const std::size_t r = a.rows(), c = a.cols();
  if (begin >= end || end > c)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for last axis " + std::to_string(c));
  const std::size_t w = end - begin;
  Buffer out(r * w);
  const auto x = a.data();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c + begin, w, out.data() + i * w);
  Shape shape = a.shape();
  shape.back() = w;
  auto node = make_node("slice", std::move(shape), std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [r, c, w, begin](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor pick(const Tensor& a, std::span<const std::size_t> index) {
  require_defined(a, "pick");
  if (a.rank() != 2 || index.size() != a.dim(0))
    throw ShapeError("pick: need one index per row of a 2-D tensor, got " + std::to_string(index.size()) +
                     " for " + shape_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  Buffer out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (idx[i] >= c) throw ContractError("pick: column " + std::to_string(idx[i]) + " out of range");
    out[i] = a.data()[i * c + idx[i]];
  }
  auto node = make_node("pick", {r}, std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [c, idx = std::move(idx)](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) g[i * c + idx[i]] += self.grad[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Row operations

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) {
    require_defined(p, "concat_rows");
    if (p.rank() != 2 || p.cols() != c) throw ShapeError(dims_error("concat_rows", parts[0], p));
    total += p.dim(0);
    inputs.push_back(p.node());
  }
  Buffer out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  auto node = make_node("concat_rows", {total, c}, std::move(out), std::move(inputs));
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      std::size_t off = 0;
      for (auto& in : self.inputs) {
        const std::size_t n = in->value.size();
        if (in->requires_grad) {
          auto& g = in->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
        }
        off += n;
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice_rows");
  if (a.rank() != 2 || begin >= end || end > a.dim(0))
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(a.shape()));
  const std::size_t c = a.cols();
  Buffer out(a.data().begin() + begin * c, a.data().begin() + end * c);
  auto node = make_node("slice_rows", {end - begin, c}, std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [off = begin * c](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  require_defined(a, "gather_rows");
  if (a.rank() != 2 || index.empty()) throw ShapeError("gather_rows: need a 2-D tensor and a non-empty index");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  Buffer out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) throw ContractError("gather_rows: row " + std::to_string(idx[i]) + " out of range");
    std::copy_n(a.data().data() + idx[i] * c, c, out.data() + i * c);
  }
  auto node = make_node("gather_rows", {idx.size(), c}, std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backward = [c, idx = std::move(idx)](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    };
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double s = 0;
  for (double x : a.data()) s += x;
  auto node = make_node("sum", {1}, {s}, {a.node()});
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (double& v : g) v += self.grad[0];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Finite-difference checks

namespace {

double relative_error(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
}

double checked_value(const Tensor& y) {
  if (y.size() != 1) throw ContractError("grad_check: function must be scalar-valued");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0)) throw ContractError("grad_check: step h must be positive");
  require_defined(x, "grad_check");
  Tensor leaf(x.shape(), x.to_vector(), true);
  const Tensor y = f(leaf);
  checked_value(y);
  y.backward();
  std::vector<double> analytic(leaf.size(), 0.0);
  if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

  double worst = 0;
  std::vector<double> probe = x.to_vector();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = checked_value(f(Tensor(x.shape(), probe)));
    probe[i] = orig - h;
    const double fm = checked_value(f(Tensor(x.shape(), probe)));
    probe[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (fp - fm) / (2 * h)));
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  if (!(h > 0)) throw ContractError("grad_check: step h must be positive");
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor y = f();
  checked_value(y);
  y.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    analytic.emplace_back(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.back().begin());
    p.zero_grad();
  }
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double fp = checked_value(f());
      values[i] = orig - h;
      const double fm = checked_value(f());
      values[i] = orig;
      worst = std::max(worst, relative_error(analytic[k][i], (fp - fm) / (2 * h)));
    }
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

}  // namespace topicdiff::ad
