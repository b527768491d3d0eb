// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Operations whose inputs
// require gradients record their inputs and a backward rule on the output node;
// `backward()` orders the recorded graph topologically and runs each rule once.
// Layout is row-major. Broadcasting is limited to adding a trailing-axis bias.

#ifndef TOPICDIFF_AUTODIFF_HPP_
#define TOPICDIFF_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace topicdiff::ad {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage, so vectorized kernels see the same alignment on
/// every run and reductions keep a fixed summation order.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // accumulates this->grad into inputs

  bool is_leaf() const { return !backward; }
  Buffer& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor from_buffer(Shape shape, Buffer data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  /// Builds a rows×cols matrix from nested initializer lists.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor from_node(std::shared_ptr<Node> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;
  /// Product of all but the last dimension (1 for rank-1 tensors).
  std::size_t rows() const;
  /// Last dimension.
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Direct write access. Only legal on leaves (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, no history, no gradient requirement.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate additively.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Recorded operations reachable from a root, inputs before outputs.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::span<Node* const> nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  /// Position of a node in the order, or -1.
  long index_of(const Node* node) const;

 private:
  std::vector<Node*> order_;
};

/// While alive, new ops on this thread record no history (inference passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

/// Builds an op node outside this file. `backward` runs only when some input
/// requires gradients; it must accumulate self.grad into the inputs' grads.
Tensor custom_op(const char* name, Shape shape, Buffer value, std::span<const Tensor> inputs,
                 std::function<void(Node&)> backward);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ for a [n,k], b [m,k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Elementwise arithmetic. `add` also accepts b shaped like a's last axis (bias add).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

Tensor tanh(const Tensor& a);
/// Elementwise tanh on raw buffers (the kernel behind ad::tanh).
void tanh_values(std::span<const double> in, std::span<double> out);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
/// Throws DomainError for non-positive entries.
Tensor log(const Tensor& a);
/// Gradient passes where lo < a < hi, zero at or beyond the bounds.
Tensor clamp(const Tensor& a, double lo, double hi);

// Last-axis operations.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Columns [begin, end) of the last axis.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
/// Picks a[r, index[r]] for each row r of a 2-D tensor; result has shape [rows].
Tensor pick(const Tensor& a, std::span<const std::size_t> index);

// Row (leading-axis) operations on 2-D tensors.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
/// Output row i is a[index[i]]; gradients scatter-add back.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);

// Reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// Scalar-valued function of one tensor.
using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Max over coordinates of |analytic − central difference| / max(|analytic|, |fd|, 1e-8).
/// Throws ContractError for h <= 0 and NumericError on non-finite evaluations.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same measure over every coordinate of every tensor in `params`, which are
/// perturbed in place (and restored). `f` rebuilds the scalar from scratch.
double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params,
                         double h = 1e-5);

}  // namespace topicdiff::ad

#endif  // TOPICDIFF_AUTODIFF_HPP_
