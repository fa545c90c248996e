#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace fri {

/**
 * Philox4x32-10 counter-based generator. The 64-bit seed is the key; the
 * counter holds a 64-bit block index and the 64-bit stream id, so distinct
 * stream ids give disjoint sequences.
 */
class RngStream {
 public:
  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  // Independent stream derived from this stream's id and an index.
  RngStream child(std::uint64_t index) const;

  result_type operator()() { return next_u32(); }
  std::uint32_t next_u32() {
    if (idx_ == 4) refill();
    return buf_[idx_++];
  }
  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }
  // Uniform on [0,1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  // Uniform on (0,1].
  double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }
  // Unbiased integer in [0, n).
  std::uint32_t below(std::uint32_t n);

  // Geo(1/(T+1)) lifetime: P(k) = (1/(T+1)) (T/(T+1))^k.
  std::uint64_t killed_lifetime(double T);
  std::uint64_t poisson(double mean);
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int idx_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fri
