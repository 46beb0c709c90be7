#include "helios/core/kernels.hpp"

#include <algorithm>
#include <vector>

#include "helios/core/parallel.hpp"

namespace helios::kernels {

namespace {

// Register tile: kMr rows by kNr columns of C stay in registers for the whole
// reduction over k.
constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 16;

// A(r, p) = a[r * a_rs + p * a_cs]; B is row-major with leading dimension n.
struct View {
  const double* a;
  std::size_t a_rs;
  std::size_t a_cs;
  const double* b;
  double* c;
  std::size_t k;
  std::size_t n;
  bool accumulate;
};

// Eight-lane vector that tolerates unaligned addresses.
typedef double Vec __attribute__((vector_size(64), aligned(8), may_alias));
constexpr std::size_t kLanes = 8;

inline Vec load(const double* p) { return *reinterpret_cast<const Vec*>(p); }
inline void store(double* p, Vec v) { *reinterpret_cast<Vec*>(p) = v; }

template <std::size_t MR, std::size_t NV>
inline void vec_tile(const View& v, std::size_t i0, std::size_t j0) {
  Vec acc[MR][NV] = {};
  for (std::size_t p = 0; p < v.k; ++p) {
    const double* brow = v.b + p * v.n + j0;
    Vec bv[NV];
#pragma GCC unroll 8
    for (std::size_t q = 0; q < NV; ++q) bv[q] = load(brow + q * kLanes);
#pragma GCC unroll 8
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = v.a[(i0 + r) * v.a_rs + p * v.a_cs];
#pragma GCC unroll 8
      for (std::size_t q = 0; q < NV; ++q) acc[r][q] += av * bv[q];
    }
  }
  for (std::size_t r = 0; r < MR; ++r) {
    double* crow = v.c + (i0 + r) * v.n + j0;
    for (std::size_t q = 0; q < NV; ++q) {
      store(crow + q * kLanes, v.accumulate ? load(crow + q * kLanes) + acc[r][q] : acc[r][q]);
    }
  }
}

template <std::size_t MR>
inline void scalar_tile(const View& v, std::size_t i0, std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    double acc[MR] = {};
    for (std::size_t p = 0; p < v.k; ++p) {
      const double bv = v.b[p * v.n + j];
      for (std::size_t r = 0; r < MR; ++r) acc[r] += v.a[(i0 + r) * v.a_rs + p * v.a_cs] * bv;
    }
    for (std::size_t r = 0; r < MR; ++r) {
      double& out = v.c[(i0 + r) * v.n + j];
      out = v.accumulate ? out + acc[r] : acc[r];
    }
  }
}

template <std::size_t MR>
void row_panel(const View& v, std::size_t i0) {
  std::size_t j = 0;
  for (; j + kNr <= v.n; j += kNr) vec_tile<MR, kNr / kLanes>(v, i0, j);
  for (; j + kLanes <= v.n; j += kLanes) vec_tile<MR, 1>(v, i0, j);
  if (j < v.n) scalar_tile<MR>(v, i0, j, v.n);
}

// Long reductions are cut into slices of kKc so that the B slice stays in
// cache across row panels; slices are added into C in ascending order.
constexpr std::size_t kKc = 256;

void rows(const View& v, std::size_t r0, std::size_t r1) {
  for (std::size_t p0 = 0; p0 < v.k || p0 == 0; p0 += kKc) {
    View s = v;
    s.k = std::min(kKc, v.k - p0);
    s.a = v.a + p0 * v.a_cs;
    s.b = v.b + p0 * v.n;
    s.accumulate = v.accumulate || p0 > 0;
    std::size_t i = r0;
    for (; i + kMr <= r1; i += kMr) row_panel<kMr>(s, i);
    for (; i < r1; ++i) row_panel<1>(s, i);
    if (v.k == 0) break;
  }
}

void run(const View& v, std::size_t m) {
  const std::size_t work = m * v.k * v.n;
  if (work < (std::size_t{1} << 18)) {
    rows(v, 0, m);
    return;
  }
  // Chunks of whole tiles carrying roughly 2^17 multiply-adds each.
  const std::size_t per_row = std::max<std::size_t>(1, v.k * v.n);
  std::size_t grain = std::max<std::size_t>(1, (std::size_t{1} << 17) / per_row);
  grain = (grain + kMr - 1) / kMr * kMr;
  parallel_for(m, grain, [&](std::size_t r0, std::size_t r1) { rows(v, r0, r1); });
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  run({a, k, 1, b, c, k, n, accumulate}, m);
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  run({a, k, 1, bt.data(), c, k, n, accumulate}, m);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  run({a, 1, m, b, c, k, n, accumulate}, m);
}

}  // namespace helios::kernels
