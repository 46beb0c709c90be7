#include "helios/train/adam.hpp"

#include <cmath>

#include "helios/core/error.hpp"

namespace helios {

namespace {

std::span<const double> gradient_of(const NamedTensor& p) {
  auto g = p.tensor.grad();
  if (!g) fail(ErrorCode::absent_gradient, "parameter '" + p.name + "' has no gradient");
  return *g;
}

}  // namespace

void adam_step(std::span<const NamedTensor> params, AdamState& state, const AdamHyper& hyper) {
  const bool fresh = state.m.empty();
  if (!fresh && state.m.size() != params.size()) {
    fail(ErrorCode::dimension, "optimizer state holds " + std::to_string(state.m.size()) + " tensors, got " +
                                   std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = gradient_of(params[k]);
    if (!fresh && g.size() != state.m[k].size()) {
      fail(ErrorCode::dimension, "optimizer state for '" + params[k].name + "' has the wrong size");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        fail(ErrorCode::numeric, "non-finite gradient in parameter '" + params[k].name + "' at index " +
                                     std::to_string(i));
      }
    }
  }

  if (fresh) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = gradient_of(params[k]);
    auto theta = params[k].tensor.node()->data.data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      theta[i] -= hyper.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hyper.eps);
    }
  }
}

double gradient_norm(std::span<const NamedTensor> params) {
  double total = 0.0;
  for (const auto& p : params) {
    for (double g : gradient_of(p)) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradients(std::span<const NamedTensor> params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      for (double& g : p.tensor.node()->grad) g *= factor;
    }
  }
  return norm;
}

}  // namespace helios
