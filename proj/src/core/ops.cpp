#include "helios/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "helios/core/error.hpp"
#include "helios/core/kernels.hpp"

namespace helios {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

// Row-major strides of `shape`.
std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_strides;  // per output axis, 0 where broadcast
  std::vector<std::size_t> b_strides;
  enum class Kind { same, b_tiles, a_tiles, general } kind = Kind::general;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  const auto as = strides_of(a);
  const auto bs = strides_of(b);
  plan.a_strides.assign(rank, 0);
  plan.b_strides.assign(rank, 0);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ai = i + a.size() >= rank ? i + a.size() - rank : SIZE_MAX;
    const std::size_t bi = i + b.size() >= rank ? i + b.size() - rank : SIZE_MAX;
    const std::size_t ae = ai == SIZE_MAX ? 1 : a[ai];
    const std::size_t be = bi == SIZE_MAX ? 1 : b[bi];
    if (ae != be && ae != 1 && be != 1) {
      fail(ErrorCode::dimension, std::string(op) + ": shapes " + shape_string(a) + " and " +
                                     shape_string(b) + " do not broadcast");
    }
    plan.out[i] = std::max(ae, be);
    if (ae != 1) plan.a_strides[i] = as[ai];
    if (be != 1) plan.b_strides[i] = bs[bi];
  }
  auto is_suffix = [&](const Shape& s) {
    if (s.size() > rank) return false;
    return std::equal(s.begin(), s.end(), plan.out.end() - static_cast<std::ptrdiff_t>(s.size()));
  };
  if (a == b) {
    plan.kind = Broadcast::Kind::same;
  } else if (a == plan.out && is_suffix(b)) {
    plan.kind = Broadcast::Kind::b_tiles;
  } else if (b == plan.out && is_suffix(a)) {
    plan.kind = Broadcast::Kind::a_tiles;
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element, in order.
template <class F>
void for_each_broadcast(const Broadcast& plan, std::size_t na, std::size_t nb, F&& f) {
  const std::size_t n = shape_numel(plan.out);
  switch (plan.kind) {
    case Broadcast::Kind::same:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case Broadcast::Kind::b_tiles:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i % nb);
      return;
    case Broadcast::Kind::a_tiles:
      for (std::size_t i = 0; i < n; ++i) f(i, i % na, i);
      return;
    case Broadcast::Kind::general:
      break;
  }
  const std::size_t rank = plan.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      ia += plan.a_strides[ax];
      ib += plan.b_strides[ax];
      if (idx[ax] < plan.out[ax]) break;
      ia -= plan.a_strides[ax] * idx[ax];
      ib -= plan.b_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

enum class BinaryOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryOp op, const char* name) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  Tensor out(plan->out);
  const auto ad = a.data();
  const auto bd = b.data();
  auto od = out.data();
  switch (op) {
    case BinaryOp::add:
      for_each_broadcast(*plan, a.numel(), b.numel(),
                         [&](std::size_t i, std::size_t ia, std::size_t ib) { od[i] = ad[ia] + bd[ib]; });
      break;
    case BinaryOp::sub:
      for_each_broadcast(*plan, a.numel(), b.numel(),
                         [&](std::size_t i, std::size_t ia, std::size_t ib) { od[i] = ad[ia] - bd[ib]; });
      break;
    case BinaryOp::mul:
      for_each_broadcast(*plan, a.numel(), b.numel(),
                         [&](std::size_t i, std::size_t ia, std::size_t ib) { od[i] = ad[ia] * bd[ib]; });
      break;
  }
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node();
    NodePtr bn = b.node();
    tape->record({an, bn}, out.node(), [an, bn, plan, op](std::span<const double> g) {
      const std::size_t na = an->data.size();
      const std::size_t nb = bn->data.size();
      if (an->requires_grad) {
        auto ga = an->grad_buffer();
        if (op == BinaryOp::mul) {
          const auto& bd = bn->data;
          for_each_broadcast(*plan, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            ga[ia] += g[i] * bd[ib];
          });
        } else {
          for_each_broadcast(*plan, na, nb,
                             [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += g[i]; });
        }
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer();
        if (op == BinaryOp::mul) {
          const auto& ad = an->data;
          for_each_broadcast(*plan, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            gb[ib] += g[i] * ad[ia];
          });
        } else {
          const double sign = op == BinaryOp::sub ? -1.0 : 1.0;
          for_each_broadcast(*plan, na, nb,
                             [&](std::size_t i, std::size_t, std::size_t ib) { gb[ib] += sign * g[i]; });
        }
      }
    });
  }
  return out;
}

// Element-wise unary op: forward value y = f(x), backward dx = g * df(x, y).
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  Tensor out(x.shape());
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = f(xd[i]);
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    NodePtr on = out.node();
    // Hold the output weakly: it is the entry's own output and outlives the call.
    std::weak_ptr<detail::TensorNode> ow = on;
    tape->record({xn}, on, [xn, ow, df](std::span<const double> g) {
      auto on = ow.lock();
      auto gx = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xn->data[i], on->data[i]);
    });
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix product

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    fail(ErrorCode::dimension, "matmul needs rank >= 2 operands, got " + shape_string(a.shape()) +
                                   " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  if (k != kb) {
    fail(ErrorCode::dimension, "matmul inner extents disagree: " + shape_string(a.shape()) + " x " +
                                   shape_string(b.shape()));
  }

  if (b.rank() == 2) {
    // Leading axes of a flatten into rows: one GEMM.
    const std::size_t rows = a.numel() / std::max<std::size_t>(1, k);
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    Tensor out(out_shape);
    kernels::gemm_nn(rows, k, n, a.data().data(), b.data().data(), out.data().data(), false);
    if (Tape* tape = recording_tape({&a, &b})) {
      NodePtr an = a.node();
      NodePtr bn = b.node();
      tape->record({an, bn}, out.node(), [an, bn, rows, k, n](std::span<const double> g) {
        if (an->requires_grad) {
          kernels::gemm_nt(rows, n, k, g.data(), bn->data.data(), an->grad_buffer().data(), true);
        }
        if (bn->requires_grad) {
          kernels::gemm_tn(k, rows, n, an->data.data(), g.data(), bn->grad_buffer().data(), true);
        }
      });
    }
    return out;
  }

  // General batched case: broadcast the leading (batch) axes.
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a_batch, b_batch, "matmul"));
  plan->kind = Broadcast::Kind::general;
  Shape out_shape = plan->out;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  const std::size_t na = shape_numel(a_batch);
  const std::size_t nb = shape_numel(b_batch);
  {
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for_each_broadcast(*plan, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      kernels::gemm_nn(m, k, n, ad + ia * m * k, bd + ib * k * n, od + i * m * n, false);
    });
  }
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node();
    NodePtr bn = b.node();
    tape->record({an, bn}, out.node(), [an, bn, plan, na, nb, m, k, n](std::span<const double> g) {
      double* ga = an->requires_grad ? an->grad_buffer().data() : nullptr;
      double* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
      const double* ad = an->data.data();
      const double* bd = bn->data.data();
      for_each_broadcast(*plan, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        const double* gi = g.data() + i * m * n;
        if (ga) kernels::gemm_nt(m, n, k, gi, bd + ib * k * n, ga + ia * m * k, true);
        if (gb) kernels::gemm_tn(k, m, n, ad + ia * m * k, gi, gb + ib * k * n, true);
      });
    });
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) fail(ErrorCode::dimension, "transpose needs rank >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) fail(ErrorCode::dimension, "permute: axis count mismatch");
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    if (ax >= rank || seen[ax]) fail(ErrorCode::dimension, "permute: axes are not a permutation");
    seen[ax] = true;
  }
  const auto in_strides = strides_of(x.shape());
  Shape out_shape(rank);
  std::vector<std::size_t> src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = x.dim(axes[i]);
    src_strides[i] = in_strides[axes[i]];
  }
  // src_index[i] = flat index in x of output element i.
  auto src_index = std::make_shared<std::vector<std::size_t>>(x.numel());
  {
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < src_index->size(); ++i) {
      (*src_index)[i] = off;
      for (std::size_t ax = rank; ax-- > 0;) {
        ++idx[ax];
        off += src_strides[ax];
        if (idx[ax] < out_shape[ax]) break;
        off -= src_strides[ax] * idx[ax];
        idx[ax] = 0;
      }
    }
  }
  Tensor out(out_shape);
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[(*src_index)[i]];
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    tape->record({xn}, out.node(), [xn, src_index](std::span<const double> g) {
      auto gx = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*src_index)[i]] += g[i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    fail(ErrorCode::dimension, "reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    tape->record({xn}, out.node(), [xn](std::span<const double> g) {
      auto gx = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Element-wise

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    tape->record({xn}, out.node(), [xn](std::span<const double> g) {
      for (auto& v : xn->grad_buffer()) v += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) fail(ErrorCode::dimension, "mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor softmax_lastaxis(const Tensor& x) {
  if (x.rank() == 0 || x.dim(x.rank() - 1) == 0) {
    fail(ErrorCode::dimension, "softmax needs a non-empty last axis");
  }
  const std::size_t width = x.dim(x.rank() - 1);
  const std::size_t rows = x.numel() / width;
  Tensor out(x.shape());
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * width;
    double* yr = od.data() + r * width;
    double mx = xr[0];
    for (std::size_t j = 0; j < width; ++j) {
      if (!std::isfinite(xr[j])) {
        fail(ErrorCode::numeric, "softmax input is not finite at flat index " + std::to_string(r * width + j));
      }
      mx = std::max(mx, xr[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      denom += yr[j];
    }
    const double inv = 1.0 / denom;
    for (std::size_t j = 0; j < width; ++j) yr[j] *= inv;
  }
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    std::weak_ptr<detail::TensorNode> ow = out.node();
    tape->record({xn}, out.node(), [xn, ow, rows, width](std::span<const double> g) {
      auto on = ow.lock();
      auto gx = xn->grad_buffer();
      const double* y = on->data.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * width;
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j) dot += g[base + j] * y[base + j];
        for (std::size_t j = 0; j < width; ++j) gx[base + j] += y[base + j] * (g[base + j] - dot);
      }
    });
  }
  return out;
}

Tensor concat_lastaxis(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    fail(ErrorCode::dimension,
         "concat: leading shapes differ: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t p = a.dim(a.rank() - 1);
  const std::size_t q = b.dim(b.rank() - 1);
  const std::size_t rows = a.numel() / std::max<std::size_t>(1, p);
  Shape out_shape = a.shape();
  out_shape.back() = p + q;
  Tensor out(out_shape);
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * p, p, od.data() + r * (p + q));
    std::copy_n(b.data().data() + r * q, q, od.data() + r * (p + q) + p);
  }
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node();
    NodePtr bn = b.node();
    tape->record({an, bn}, out.node(), [an, bn, rows, p, q](std::span<const double> g) {
      if (an->requires_grad) {
        auto ga = an->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < p; ++j) ga[r * p + j] += g[r * (p + q) + j];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < q; ++j) gb[r * q + j] += g[r * (p + q) + p + j];
      }
    });
  }
  return out;
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank() || index >= x.dim(axis)) {
    fail(ErrorCode::dimension, "select axis " + std::to_string(axis) + " index " + std::to_string(index) +
                                   " out of range for " + shape_string(x.shape()));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t extent = x.dim(axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + (o * extent + index) * inner, inner, out.data().data() + o * inner);
  }
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    tape->record({xn}, out.node(), [xn, outer, inner, extent, index](std::span<const double> g) {
      auto gx = xn->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) gx[(o * extent + index) * inner + i] += g[o * inner + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation and dropout

BatchNormState::BatchNormState(std::size_t channels)
    : gamma(Shape{channels}, 1.0),
      beta(Shape{channels}, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {
  gamma.set_requires_grad();
  beta.set_requires_grad();
}

Tensor batch_norm(const Tensor& x, BatchNormState& state, Mode mode) {
  const std::size_t c = state.channels();
  if (x.rank() == 0 || x.dim(x.rank() - 1) != c || state.gamma.numel() != c || state.beta.numel() != c) {
    fail(ErrorCode::dimension, "batch_norm: input " + shape_string(x.shape()) + " vs " + std::to_string(c) +
                                   " channels");
  }
  const std::size_t rows = x.numel() / c;
  if (mode == Mode::train && rows < 2) {
    fail(ErrorCode::degenerate_batch, "batch_norm in train mode needs at least 2 rows, got " + std::to_string(rows));
  }
  const auto xd = x.data();
  const auto gamma = state.gamma.data();
  const auto beta = state.beta.data();

  auto inv_std = std::make_shared<std::vector<double>>(c);
  auto x_hat = std::make_shared<std::vector<double>>(x.numel());
  if (mode == Mode::train) {
    std::vector<double> mu(c, 0.0);
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) mu[j] += xd[r * c + j];
    for (auto& m : mu) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xd[r * c + j] - mu[j];
        var[j] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(rows);
    for (std::size_t j = 0; j < c; ++j) {
      (*inv_std)[j] = 1.0 / std::sqrt(var[j] + BatchNormState::kEps);
      const double unbiased = var[j] * static_cast<double>(rows) / static_cast<double>(rows - 1);
      state.running_mean[j] =
          (1.0 - BatchNormState::kMomentum) * state.running_mean[j] + BatchNormState::kMomentum * mu[j];
      state.running_var[j] =
          (1.0 - BatchNormState::kMomentum) * state.running_var[j] + BatchNormState::kMomentum * unbiased;
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) (*x_hat)[r * c + j] = (xd[r * c + j] - mu[j]) * (*inv_std)[j];
  } else {
    for (std::size_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(state.running_var[j] + BatchNormState::kEps);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j)
        (*x_hat)[r * c + j] = (xd[r * c + j] - state.running_mean[j]) * (*inv_std)[j];
  }

  Tensor out(x.shape());
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) od[r * c + j] = (*x_hat)[r * c + j] * gamma[j] + beta[j];

  if (Tape* tape = recording_tape({&x, &state.gamma, &state.beta})) {
    NodePtr xn = x.node();
    NodePtr gn = state.gamma.node();
    NodePtr bn = state.beta.node();
    const bool train = mode == Mode::train;
    tape->record({xn, gn, bn}, out.node(), [xn, gn, bn, x_hat, inv_std, rows, c, train](std::span<const double> g) {
      std::vector<double> sum_g(c, 0.0);
      std::vector<double> sum_gx(c, 0.0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) {
          sum_g[j] += g[r * c + j];
          sum_gx[j] += g[r * c + j] * (*x_hat)[r * c + j];
        }
      if (gn->requires_grad) {
        auto gg = gn->grad_buffer();
        for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gx[j];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer();
        for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
      }
      if (xn->requires_grad) {
        auto gx = xn->grad_buffer();
        const auto& gamma = gn->data;
        if (train) {
          const double inv_rows = 1.0 / static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              const std::size_t i = r * c + j;
              gx[i] += gamma[j] * (*inv_std)[j] *
                       (g[i] - inv_rows * sum_g[j] - (*x_hat)[i] * inv_rows * sum_gx[j]);
            }
        } else {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += g[r * c + j] * gamma[j] * (*inv_std)[j];
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p_keep, Mode mode, RngStream& rng) {
  if (!(p_keep > 0.0 && p_keep <= 1.0)) {
    fail(ErrorCode::parameter, "dropout retention must lie in (0, 1], got " + std::to_string(p_keep));
  }
  if (p_keep == 1.0) return x;
  if (mode == Mode::eval) return scale(x, p_keep);

  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (auto& m : *mask) m = rng.bernoulli(p_keep) ? 1.0 : 0.0;
  Tensor out(x.shape());
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] * (*mask)[i];
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node();
    tape->record({xn}, out.node(), [xn, mask](std::span<const double> g) {
      auto gx = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

}  // namespace helios
