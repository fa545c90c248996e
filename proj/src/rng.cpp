#include "fri/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fri {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t(a) * b;
  hi = std::uint32_t(p >> 32);
  lo = std::uint32_t(p);
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> RngStream::philox(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_ ^ splitmix64(index + 0x632BE59BD9B4E019ull)));
}

void RngStream::refill() {
  std::array<std::uint32_t, 4> ctr = {std::uint32_t(block_), std::uint32_t(block_ >> 32),
                                      std::uint32_t(stream_), std::uint32_t(stream_ >> 32)};
  buf_ = philox(ctr, {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
  ++block_;
  idx_ = 0;
}

std::uint32_t RngStream::below(std::uint32_t n) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t m = std::uint64_t(next_u32()) * n;
  std::uint32_t l = std::uint32_t(m);
  if (l < n) {
    const std::uint32_t t = std::uint32_t(-n) % n;
    while (l < t) {
      m = std::uint64_t(next_u32()) * n;
      l = std::uint32_t(m);
    }
  }
  return std::uint32_t(m >> 32);
}

std::uint64_t RngStream::killed_lifetime(double T) {
  if (!(T > 0)) throw std::invalid_argument("kill mean must be positive");
  const double u = uniform_pos();
  const double k = std::floor(std::log(u) / std::log1p(-1.0 / (T + 1.0)));
  if (!(k < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
  return std::uint64_t(k);
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0)) throw std::invalid_argument("poisson mean must be nonnegative");
  if (mean == 0) return 0;
  if (mean < 30) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform_pos();
    while (prod > limit) {
      ++k;
      prod *= uniform_pos();
    }
    return k;
  }
  // PTRS transformed rejection (Hormann 1993).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  while (true) {
    const double U = uniform() - 0.5;
    const double V = uniform();
    const double us = 0.5 - std::fabs(U);
    const double k = std::floor((2 * a / us + b) * U + mean + 0.43);
    if (us >= 0.07 && V <= vr) return std::uint64_t(k);
    if (k < 0 || (us < 0.013 && V > us)) continue;
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1))
      return std::uint64_t(k);
  }
}

}  // namespace fri
