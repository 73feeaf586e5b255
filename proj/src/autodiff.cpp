#include <algorithm>

#include "gmlp/error.hpp"
#include "gmlp/tensor.hpp"
#include "tensor_impl.hpp"

namespace gmlp {
namespace {

thread_local bool t_grad_enabled = true;

}  // namespace

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::reset() { entries_.clear(); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!t_grad_enabled) return out;
  const bool needs_grad = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs_grad) return out;

  Tape& tape = Tape::current();
  out.impl_->requires_grad = true;
  out.impl_->leaf = false;
  out.impl_->tape = &tape;
  out.impl_->tape_index = tape.entries_.size();
  tape.entries_.push_back({out, std::move(inputs), std::move(backward)});
  return out;
}

void backward(const Tensor& root) {
  if (!root.defined()) throw ContractError("backward: undefined root tensor");
  if (root.numel() != 1) {
    throw ContractError("backward: root must be a scalar, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) throw ContractError("backward: root does not require a gradient");

  const double seed = 1.0;
  if (root.is_leaf()) {
    root.impl_->grad.resize(1, 0.0);
    root.impl_->grad[0] += seed;
    return;
  }

  Tape& tape = Tape::current();
  const std::size_t last = root.impl_->tape_index;
  if (root.impl_->tape != &tape || last >= tape.entries_.size() || !tape.entries_[last].output.same_as(root)) {
    throw ContractError("backward: root was not recorded on the current tape (reset or different thread)");
  }

  // Intermediate gradients are per-call; only leaves accumulate.
  for (std::size_t i = 0; i <= last; ++i) {
    auto& impl = *tape.entries_[i].output.impl_;
    impl.grad.assign(impl.data.size(), 0.0);
  }
  root.impl_->grad[0] = seed;

  for (std::size_t i = last + 1; i-- > 0;) {
    Tape::Entry& entry = tape.entries_[i];
    entry.backward(entry.output.impl_->grad);
  }
}

}  // namespace gmlp
