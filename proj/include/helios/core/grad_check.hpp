#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "helios/core/tensor.hpp"

namespace helios {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;  // index into the checked tensor list
  std::size_t worst_index = 0;   // flat coordinate within that tensor
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Per coordinate the error is
///     |autodiff - central| / max(1e-8, |central| + |autodiff|)
/// and the maximum is returned. Throws ErrorCode::numeric naming the
/// coordinate if any probe evaluates to a non-finite value.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step);

/// Same check over every coordinate of several tensors feeding `loss`.
/// The tensors are perturbed in place and restored afterwards.
GradCheckReport grad_check_tensors(const std::function<Tensor()>& loss, std::span<Tensor> tensors,
                                   double step);

}  // namespace helios
