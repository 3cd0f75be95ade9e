#include "sdebnn/random.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

namespace sdebnn::rng {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept {
  const std::uint64_t k = mix64(mix64(seed) ^ mix64(stream_id + 0x632BE59BD9B4E019ULL));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::array<double, 2> CounterStream::uniforms(std::uint64_t hi, std::uint64_t lo) const noexcept {
  const PhiloxCounter c{static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32),
                        static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32)};
  const auto r = philox4x32(c, key_);
  return {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
}

std::array<double, 2> CounterStream::normals(std::uint64_t hi, std::uint64_t lo) const {
  const auto u = uniforms(hi, lo);
  return {normal_quantile(u[0]), normal_quantile(u[1])};
}

double SequentialRng::uniform() {
  if (buffered_ == 0) {
    buffer_ = stream_.uniforms(0, counter_++);
    buffered_ = 2;
  }
  return buffer_[2 - buffered_--];
}

double SequentialRng::normal() {
  if (nbuffered_ == 0) {
    nbuffer_ = stream_.normals(1, counter_++);
    nbuffered_ = 2;
  }
  return nbuffer_[2 - nbuffered_--];
}

std::uint64_t SequentialRng::below(std::uint64_t n) {
  auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

}  // namespace sdebnn::rng
