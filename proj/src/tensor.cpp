#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gmlp/error.hpp"
#include "gmlp/kernels.hpp"
#include "gmlp/tensor.hpp"
#include "tensor_impl.hpp"

namespace gmlp {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::mutable_data() const { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("at(): index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw ShapeError("at(): index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = value;
}

bool Tensor::is_leaf() const { return impl_->leaf; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_storage() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const double> delta) const {
  if (delta.size() != numel()) throw ShapeError("accumulate_grad: length mismatch");
  auto g = grad_storage();
  kernels::axpy(g.size(), 1.0, delta.data(), g.data());
}

void Tensor::zero_grad() const { impl_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

// --- primitives --------------------------------------------------------------

namespace {

std::vector<double> copy_data(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n, 0.0);
  kernels::gemm_nn(rows, n, k, a.data().data(), b.data().data(), out.data());

  return make_result(std::move(out_shape), std::move(out), {a, b}, [a, b, rows, n, k](std::span<const double> g) mutable {
    if (a.requires_grad()) kernels::gemm_nt(rows, k, n, g.data(), b.data().data(), a.grad_storage().data());
    if (b.requires_grad()) kernels::gemm_tn(k, n, rows, a.data().data(), g.data(), b.grad_storage().data());
  });
}

Tensor apply_left(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() < 2 || x.dim(x.rank() - 2) != a.dim(1)) {
    throw ShapeError("apply_left: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(x.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t p = a.dim(1);
  const std::size_t n = x.shape().back();
  const std::size_t batches = x.numel() / (p * n);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = m;
  std::vector<double> out(batches * m * n, 0.0);
  for (std::size_t bi = 0; bi < batches; ++bi) {
    kernels::gemm_nn(m, n, p, a.data().data(), x.data().data() + bi * p * n, out.data() + bi * m * n);
  }
  return make_result(std::move(out_shape), std::move(out), {a, x}, [a, x, m, p, n, batches](std::span<const double> g) mutable {
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const double* gb = g.data() + bi * m * n;
      if (a.requires_grad()) kernels::gemm_nt(m, p, n, gb, x.data().data() + bi * p * n, a.grad_storage().data());
      if (x.requires_grad()) kernels::gemm_tn(p, n, m, a.data().data(), gb, x.grad_storage().data() + bi * p * n);
    }
  });
}

namespace {

std::vector<double> transpose_slices(std::span<const double> src, std::size_t batches, std::size_t rows, std::size_t cols) {
  std::vector<double> out(src.size());
  for (std::size_t b = 0; b < batches; ++b) {
    const double* s = src.data() + b * rows * cols;
    double* d = out.data() + b * rows * cols;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) d[j * rows + i] = s[i * cols + j];
    }
  }
  return out;
}

}  // namespace

Tensor swap_last_axes(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("swap_last_axes: rank must be >= 2, got " + shape_str(a.shape()));
  const std::size_t rows = a.dim(a.rank() - 2);
  const std::size_t cols = a.dim(a.rank() - 1);
  const std::size_t batches = a.numel() / (rows * cols);
  Shape out_shape = a.shape();
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  return make_result(std::move(out_shape), transpose_slices(a.data(), batches, rows, cols), {a},
                     [a, rows, cols, batches](std::span<const double> g) mutable {
                       a.accumulate_grad(transpose_slices(g, batches, cols, rows));
                     });
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose2d: expected rank 2, got " + shape_str(a.shape()));
  return swap_last_axes(a);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                     " do not match last axis of " + shape_str(x.shape()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  const double* xs = x.data().data();
  const double* gs = gain.data().data();
  const double* bs = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs + r * d;
    const double mean = kernels::sum(d, row) / static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gs[j] + bs[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](std::span<const double> g) mutable {
                       const double* gs = gain.data().data();
                       std::vector<double> dxhat(d);
                       double* dx = x.requires_grad() ? x.grad_storage().data() : nullptr;
                       double* dgain = gain.requires_grad() ? gain.grad_storage().data() : nullptr;
                       double* dbias = bias.requires_grad() ? bias.grad_storage().data() : nullptr;
                       const double inv_d = 1.0 / static_cast<double>(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g.data() + r * d;
                         const double* hr = xhat.data() + r * d;
                         if (dgain) {
                           for (std::size_t j = 0; j < d; ++j) dgain[j] += gr[j] * hr[j];
                         }
                         if (dbias) kernels::axpy(d, 1.0, gr, dbias);
                         if (!dx) continue;
                         kernels::mul(d, gr, gs, dxhat.data());
                         const double sum_dh = kernels::sum(d, dxhat.data());
                         const double sum_dh_h = kernels::dot(d, dxhat.data(), hr);
                         for (std::size_t j = 0; j < d; ++j) {
                           dx[r * d + j] += inv_std[r] * (dxhat[j] - inv_d * sum_dh - hr[j] * inv_d * sum_dh_h);
                         }
                       }
                     });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xs[i] * (1.0 + std::erf(xs[i] * std::numbers::sqrt2 * 0.5));
  }
  return make_result(x.shape(), std::move(out), {x}, [x](std::span<const double> g) mutable {
    const auto xs = x.data();
    auto dx = x.grad_storage();
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xs[i] * std::numbers::sqrt2 * 0.5));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xs[i] * xs[i]);
      dx[i] += g[i] * (cdf + xs[i] * pdf);
    }
  });
}

namespace {

// big + sign * small, small broadcast over the leading axes of big.
Tensor broadcast_combine(const Tensor& big, const Tensor& small, double sign, bool small_first, const char* op) {
  if (!is_suffix(small.shape(), big.shape())) {
    const auto& lhs = small_first ? small : big;
    const auto& rhs = small_first ? big : small;
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(lhs.shape()) + " and " + shape_str(rhs.shape()));
  }
  const std::size_t inner = small.numel();
  const std::size_t repeats = big.numel() / inner;
  std::vector<double> out = copy_data(big);
  for (std::size_t r = 0; r < repeats; ++r) kernels::axpy(inner, sign, small.data().data(), out.data() + r * inner);
  std::vector<Tensor> inputs = small_first ? std::vector<Tensor>{small, big} : std::vector<Tensor>{big, small};
  return make_result(big.shape(), std::move(out), std::move(inputs),
                     [big, small, sign, inner, repeats](std::span<const double> g) mutable {
                       if (big.requires_grad()) big.accumulate_grad(g);
                       if (small.requires_grad()) {
                         double* ds = small.grad_storage().data();
                         for (std::size_t r = 0; r < repeats; ++r) kernels::axpy(inner, sign, g.data() + r * inner, ds);
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.numel() >= b.numel()) return broadcast_combine(a, b, 1.0, false, "add");
  return broadcast_combine(b, a, 1.0, true, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) { return broadcast_combine(a, b, -1.0, false, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<double> out(a.numel());
  kernels::mul(out.size(), a.data().data(), b.data().data(), out.data());
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) mutable {
    std::vector<double> tmp(g.size());
    if (a.requires_grad()) {
      kernels::mul(g.size(), g.data(), b.data().data(), tmp.data());
      a.accumulate_grad(tmp);
    }
    if (b.requires_grad()) {
      kernels::mul(g.size(), g.data(), a.data().data(), tmp.data());
      b.accumulate_grad(tmp);
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  kernels::scale(out.size(), factor, a.data().data(), out.data());
  return make_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) mutable {
    kernels::axpy(g.size(), factor, g.data(), a.grad_storage().data());
  });
}

Tensor concat_last_axis(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last_axis: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape pl = p.shape();
    pl.pop_back();
    if (pl != lead) {
      throw ShapeError("concat_last_axis: incompatible shapes " + shape_str(parts[0].shape()) + " and " + shape_str(p.shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double* src = parts[i].data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src + r * widths[i], widths[i], out.data() + r * total + offset);
    }
    offset += widths[i];
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(out_shape), std::move(out), inputs,
                     [inputs, widths, rows, total](std::span<const double> g) mutable {
                       std::size_t offset = 0;
                       for (std::size_t i = 0; i < inputs.size(); ++i) {
                         if (inputs[i].requires_grad()) {
                           double* dst = inputs[i].grad_storage().data();
                           for (std::size_t r = 0; r < rows; ++r) {
                             kernels::axpy(widths[i], 1.0, g.data() + r * total + offset, dst + r * widths[i]);
                           }
                         }
                         offset += widths[i];
                       }
                     });
}

Tensor sum_all(const Tensor& a) {
  const double total = kernels::sum(a.numel(), a.data().data());
  return make_result({1}, {total}, {a}, [a](std::span<const double> g) mutable {
    auto da = a.grad_storage();
    for (double& v : da) v += g[0];
  });
}

Tensor row_norms(const Tensor& a) {
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a.data().data() + r * d;
    out[r] = std::sqrt(kernels::dot(d, row, row));
  }
  Shape out_shape = a.shape();
  out_shape.pop_back();
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> norms = out;
  return make_result(std::move(out_shape), std::move(out), {a},
                     [a, norms = std::move(norms), rows, d](std::span<const double> g) mutable {
                       double* da = a.grad_storage().data();
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (norms[r] == 0.0) continue;
                         kernels::axpy(d, g[r] / norms[r], a.data().data() + r * d, da + r * d);
                       }
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return make_result(std::move(shape), copy_data(a), {a}, [a](std::span<const double> g) mutable { a.accumulate_grad(g); });
}

}  // namespace gmlp
