#pragma once

#include <cstddef>
#include <vector>

#include "gmlp/tensor.hpp"

namespace gmlp::detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty when absent
  bool requires_grad = false;
  bool leaf = true;
  const Tape* tape = nullptr;
  std::size_t tape_index = 0;
};

}  // namespace gmlp::detail
