#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <vector>

#include "helios/core/error.hpp"
#include "helios/core/kernels.hpp"
#include "helios/core/parallel.hpp"
#include "helios/core/rng.hpp"

namespace helios {
namespace {

// Reference SplitMix64 finalizer written out independently of the library.
std::uint64_t ref_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t ref_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t n) {
  const std::uint64_t key = ref_mix(ref_mix(seed) ^ ref_mix(stream + 0x632BE59BD9B4E019ULL));
  return ref_mix(key + (n + 1) * 0x9E3779B97F4A7C15ULL);
}

TEST(Rng, MatchesDocumentedCounterFormula) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    for (std::uint64_t stream : {0ULL, 7ULL, 0x57455448ULL}) {
      RngStream rng(seed, stream);
      for (std::uint64_t n = 0; n < 100; ++n) ASSERT_EQ(rng.next_u64(), ref_draw(seed, stream, n));
    }
  }
}

TEST(Rng, KnownSplitMixValue) {
  // First output of the canonical SplitMix64 generator seeded with 0.
  EXPECT_EQ(ref_mix(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(splitmix64_mix(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, SameSeedAndStreamRepeatTenThousandDraws) {
  RngStream a(123, 9);
  RngStream b(123, 9);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a.position(), 10000u);
}

TEST(Rng, DistinctStreamsAreUncorrelated) {
  RngStream a(5, 1);
  RngStream b(5, 2);
  const int n = 20000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  int equal = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform();
    const double y = b.uniform();
    equal += x == y;
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_EQ(equal, 0);
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(n));
}

TEST(Rng, UniformMomentsAndRange) {
  RngStream rng(77);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  RngStream rng(78);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.015);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, BelowIsUnbiasedChiSquare) {
  RngStream rng(79);
  const int k = 7;
  const int n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(k);
    ASSERT_LT(v, static_cast<std::uint64_t>(k));
    ++counts[v];
  }
  double chi2 = 0;
  const double expected = static_cast<double>(n) / k;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 22.46);  // 99.9th percentile of chi-square with 6 dof
}

TEST(Rng, SubstreamDoesNotAdvanceParent) {
  RngStream a(1, 2);
  RngStream b(1, 2);
  const RngStream child = a.substream(3);
  EXPECT_EQ(a.position(), 0u);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  RngStream c1 = a.substream(3);
  RngStream c2 = a.substream(3);
  RngStream c3 = a.substream(4);
  const auto x = c1.next_u64();
  EXPECT_EQ(x, c2.next_u64());
  EXPECT_NE(x, c3.next_u64());
  (void)child;
}

TEST(Rng, ShuffleIsADeterministicPermutation) {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  RngStream r1(9);
  RngStream r2(9);
  shuffle(std::span<int>(v), r1);
  shuffle(std::span<int>(w), r2);
  EXPECT_EQ(v, w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}

class ThreadsEnv : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* old = std::getenv("HELIOS_THREADS");
    if (old) saved_ = old;
  }
  void TearDown() override {
    if (saved_.empty()) {
      unsetenv("HELIOS_THREADS");
    } else {
      setenv("HELIOS_THREADS", saved_.c_str(), 1);
    }
  }
  std::string saved_;
};

TEST_F(ThreadsEnv, WorkerCountHonoursEnvironment) {
  setenv("HELIOS_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  setenv("HELIOS_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  setenv("HELIOS_THREADS", "bogus", 1);
  EXPECT_GE(worker_count(), 1u);
}

TEST_F(ThreadsEnv, ParallelForCoversEveryIndexOnce) {
  for (const char* threads : {"1", "4"}) {
    setenv("HELIOS_THREADS", threads, 1);
    std::vector<std::atomic<int>> hits(1003);
    parallel_for(hits.size(), 17, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i]++;
    });
    for (auto& h : hits) ASSERT_EQ(h.load(), 1);
  }
}

TEST_F(ThreadsEnv, ParallelForChunksIgnoreWorkerCount) {
  auto chunks = [&](const char* threads) {
    setenv("HELIOS_THREADS", threads, 1);
    std::vector<std::pair<std::size_t, std::size_t>> out(100, {0, 0});
    parallel_for(1000, 64, [&](std::size_t b, std::size_t e) { out[b / 64] = {b, e}; });
    return out;
  };
  EXPECT_EQ(chunks("1"), chunks("4"));
}

TEST_F(ThreadsEnv, ParallelForPropagatesExceptions) {
  setenv("HELIOS_THREADS", "4", 1);
  EXPECT_THROW(parallel_for(100, 10,
                            [](std::size_t b, std::size_t) {
                              if (b == 50) fail(ErrorCode::numeric, "boom");
                            }),
               Error);
}

std::vector<double> naive(std::size_t m, std::size_t k, std::size_t n, const std::vector<double>& a,
                          const std::vector<double>& b) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<long double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<double>(s);
    }
  return c;
}

std::vector<double> random_vec(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

TEST(Kernels, GemmVariantsMatchTripleLoop) {
  RngStream rng(11);
  const std::size_t shapes[][3] = {{1, 1, 1}, {5, 7, 4}, {3, 0, 2}, {17, 33, 50}, {50, 16, 50},
                                   {64, 300, 19}, {131, 64, 128}, {9, 700, 3}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    const auto ref = naive(m, k, n, a, b);
    const double tol = 1e-13 * std::max<std::size_t>(1, k);

    std::vector<double> c(m * n, 99.0);
    kernels::gemm_nn(m, k, n, a.data(), b.data(), c.data(), false);
    for (std::size_t i = 0; i < c.size(); ++i) ASSERT_NEAR(c[i], ref[i], tol) << m << "x" << k << "x" << n;

    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    std::vector<double> c2(m * n, 1.0);
    kernels::gemm_nt(m, k, n, a.data(), bt.data(), c2.data(), true);
    for (std::size_t i = 0; i < c2.size(); ++i) ASSERT_NEAR(c2[i], ref[i] + 1.0, tol);

    std::vector<double> at(k * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    std::vector<double> c3(m * n, -5.0);
    kernels::gemm_tn(m, k, n, at.data(), b.data(), c3.data(), false);
    for (std::size_t i = 0; i < c3.size(); ++i) ASSERT_NEAR(c3[i], ref[i], tol);
  }
}

TEST_F(ThreadsEnv, GemmIsBitIdenticalAcrossWorkerCounts) {
  RngStream rng(12);
  const std::size_t m = 1000, k = 96, n = 80;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  std::vector<double> c1(m * n), c4(m * n);
  setenv("HELIOS_THREADS", "1", 1);
  kernels::gemm_nn(m, k, n, a.data(), b.data(), c1.data(), false);
  setenv("HELIOS_THREADS", "4", 1);
  kernels::gemm_nn(m, k, n, a.data(), b.data(), c4.data(), false);
  EXPECT_EQ(c1, c4);
}

TEST(Errors, ExitStatusByCategory) {
  EXPECT_EQ(exit_status(ErrorCode::usage), 1);
  EXPECT_EQ(exit_status(ErrorCode::config), 2);
  EXPECT_EQ(exit_status(ErrorCode::integrity), 3);
  EXPECT_EQ(exit_status(ErrorCode::format), 3);
  EXPECT_EQ(exit_status(ErrorCode::numeric), 4);
  EXPECT_EQ(exit_status(ErrorCode::divergence), 4);
  EXPECT_EQ(to_string(ErrorCode::no_daylight), std::string("no_daylight"));
}

TEST(Errors, FailCarriesCode) {
  try {
    fail(ErrorCode::masking, "all masked");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::masking);
    EXPECT_NE(std::string(e.what()).find("all masked"), std::string::npos);
  }
}

}  // namespace
}  // namespace helios
