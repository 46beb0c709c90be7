#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "helios/core/rng.hpp"
#include "helios/core/tensor.hpp"

// Differentiable primitives. Each one records itself on the active tape when
// any input requires gradients; otherwise it is a plain computation.
namespace helios {

enum class Mode { train, eval };

/// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& x, Shape shape);

// Element-wise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor square(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Numerically stable softmax over the last axis. Rejects non-finite input.
Tensor softmax_lastaxis(const Tensor& x);

Tensor concat_lastaxis(const Tensor& a, const Tensor& b);

/// Drops `axis` by taking slice `index` along it.
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);

/// Per-channel normalisation state; channels are the last axis.
struct BatchNormState {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(std::size_t channels = 0);
  std::size_t channels() const { return running_mean.size(); }
};

/// Normalises every channel over all leading axes combined (batch x time).
/// Train mode uses batch statistics and updates the running ones (momentum
/// 0.1, unbiased variance); eval mode uses the running statistics only.
Tensor batch_norm(const Tensor& x, BatchNormState& state, Mode mode);

/// Classic dropout: train mode multiplies by a Bernoulli(p_keep) mask with no
/// rescaling, eval mode multiplies everything by p_keep.
Tensor dropout(const Tensor& x, double p_keep, Mode mode, RngStream& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

}  // namespace helios
