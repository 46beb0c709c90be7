#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "helios/model/transformer.hpp"

namespace helios {

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Moments are allocated on the first call. Throws ErrorCode::numeric naming
/// the parameter on a non-finite gradient (before anything is modified) and
/// ErrorCode::absent_gradient when a parameter has no gradient.
void adam_step(std::span<const NamedTensor> params, AdamState& state, const AdamHyper& hyper);

/// Global L2 norm of all gradients.
double gradient_norm(std::span<const NamedTensor> params);

/// Scales every gradient so the global norm is at most max_norm; returns the
/// norm before clipping.
double clip_gradients(std::span<const NamedTensor> params, double max_norm);

}  // namespace helios
