#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace helios {

/// Counter-based pseudo-random stream.
///
/// Draw n of stream (seed, stream_id) is a pure function of the triple
/// (seed, stream_id, n):
///
///     key   = mix(mix(seed) ^ mix(stream_id + 0x632BE59BD9B4E019))
///     out_n = mix(key + (n + 1) * 0x9E3779B97F4A7C15)
///
/// where mix is the SplitMix64 finalizer. The integer sequence and uniform()
/// are bit-identical on every platform; normal() additionally depends on the
/// C library's log/sin/cos. No <random> distributions are used since their
/// output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; both variates are used.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n); n > 0. Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream; does not advance this stream.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

/// Fisher-Yates shuffle driven by an RngStream (portable, unlike std::shuffle).
template <class T>
void shuffle(std::span<T> items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace helios
