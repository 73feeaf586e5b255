#include <algorithm>
#include <cmath>

#include "gmlp/error.hpp"
#include "gmlp/tensor.hpp"

namespace gmlp {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) {
    // NaN must fail the check, so compare with !(a <= b).
    if (!(p.max_rel_error <= worst)) worst = p.max_rel_error;
  }
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const NamedTensor> params, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");

  Tape::current().reset();
  std::vector<Tensor> handles;
  for (const auto& p : params) {
    handles.push_back(p.tensor);
    handles.back().zero_grad();
  }
  {
    Tensor y = f();
    backward(y);
  }
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : handles) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  Tape::current().reset();

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < handles.size(); ++pi) {
    Tensor& t = handles[pi];
    ParamGradError entry;
    entry.name = params[pi].name;
    entry.size = t.numel();
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double plus = f().item();
      values[i] = original - step;
      const double minus = f().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double rel = std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (i == 0 || !(rel <= entry.max_rel_error)) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic[pi][i];
        entry.numeric = numeric;
      }
    }
    report.params.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double step) {
  std::vector<NamedTensor> named;
  for (std::size_t i = 0; i < params.size(); ++i) named.push_back({"param" + std::to_string(i), params[i]});
  return grad_check(f, std::span<const NamedTensor>(named), step);
}

}  // namespace gmlp
