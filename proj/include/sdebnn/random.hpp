#pragma once

#include <array>
#include <cstdint>

namespace sdebnn::rng {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32-10 block function (Salmon et al., Random123).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Standard normal quantile, Phi^{-1}(u) for u in (0, 1).
double normal_quantile(double u);

/// Stateless counter-based stream: every (hi, lo) counter pair maps to a
/// fixed pair of uniforms / normals. Two streams with different
/// (seed, stream_id) are independent.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  /// Two uniforms in the open interval (0, 1) with 53-bit resolution.
  std::array<double, 2> uniforms(std::uint64_t hi, std::uint64_t lo) const noexcept;
  std::array<double, 2> normals(std::uint64_t hi, std::uint64_t lo) const;

 private:
  PhiloxKey key_;
};

/// Sequential convenience wrapper over CounterStream for initialisation and
/// data generation. Results depend only on (seed, stream_id) and call order.
class SequentialRng {
 public:
  SequentialRng(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
      : stream_(seed, stream_id) {}

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  CounterStream stream_;
  std::uint64_t counter_ = 0;
  std::array<double, 2> buffer_{};
  int buffered_ = 0;
  std::array<double, 2> nbuffer_{};
  int nbuffered_ = 0;
};

}  // namespace sdebnn::rng
