#pragma once

// Dense f64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage and gradient
// slot. Primitives never mutate their inputs; they produce a new tensor and,
// when gradients are enabled and some input requires a gradient, record a
// backward rule on the calling thread's Tape. backward(root) replays that tape
// in reverse recorded order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gmlp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

class Tape;

class Tensor {
 public:
  Tensor() = default;
  /// Throws ShapeError when a dimension is zero or data length differs from the shape product.
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Direct write access for initialisation, optimiser steps and finite
  /// differences. Must not be used on a tensor whose value a recorded
  /// backward rule still depends on.
  std::span<double> mutable_data() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  /// Gradient buffer, zero-allocated on first use.
  std::span<double> grad_storage() const;
  void accumulate_grad(std::span<const double> delta) const;
  void zero_grad() const;

  /// Deep copy of the values, detached from the tape.
  Tensor detach() const;
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Tape;
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, std::function<void(std::span<const double>)>);
  friend void backward(const Tensor& root);

  std::shared_ptr<detail::TensorImpl> impl_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using BackwardFn = std::function<void(std::span<const double> out_grad)>;

/// Ordered record of primitive applications on one thread.
class Tape {
 public:
  struct Entry {
    Tensor output;
    std::vector<Tensor> inputs;
    BackwardFn backward;
  };

  static Tape& current();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void reset();

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);
  friend void backward(const Tensor& root);

  std::vector<Entry> entries_;
};

bool grad_enabled();

/// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output of a primitive. Also the extension point for custom
/// operations: `backward` receives the output gradient and must accumulate
/// into the inputs that require gradients.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward);

/// Populates gradients of every requires-grad leaf reachable from a scalar
/// root. Leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& root);

// --- primitives -----------------------------------------------------------

/// a[..., m, k] x b[k, n] -> [..., m, n]; leading axes of `a` are a batch.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m, p] applied to every [p, n] slice of x[..., p, n].
Tensor apply_left(const Tensor& a, const Tensor& x);
Tensor transpose2d(const Tensor& a);
/// Swaps the two trailing axes of a tensor of rank >= 2.
Tensor swap_last_axes(const Tensor& a);
/// Normalises over the last axis, then applies gain and bias of that length.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
/// Exact-erf GELU, x * Phi(x).
Tensor gelu(const Tensor& x);
/// Elementwise sum; the smaller operand is broadcast over the leading axes of the larger.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat_last_axis(std::span<const Tensor> parts);
Tensor sum_all(const Tensor& a);
/// Euclidean norm over the last axis; the gradient at a zero row is zero.
Tensor row_norms(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// --- gradient checking ----------------------------------------------------

struct ParamGradError {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

/// Compares tape gradients of the scalar `f` against central differences.
/// Relative error per entry is |analytic - numeric| / max(1, |numeric|).
GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const NamedTensor> params, double step = 1e-5);
GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double step = 1e-5);

}  // namespace gmlp
