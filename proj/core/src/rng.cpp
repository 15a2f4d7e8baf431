#include "obflab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace obflab {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxStream::Block PhiloxStream::philox4x32_10(Block ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

PhiloxStream::PhiloxStream(SeedRecord seed, Purpose purpose)
    : key_{static_cast<std::uint32_t>(seed.master),
           static_cast<std::uint32_t>(seed.master >> 32)},
      stream_(seed.stream),
      purpose_(static_cast<std::uint8_t>(purpose)) {}

PhiloxStream::Block PhiloxStream::next_block() {
  if (index_ >> 56) throw std::overflow_error("Philox substream exhausted");
  const Block ctr = {static_cast<std::uint32_t>(index_),
                     static_cast<std::uint32_t>(index_ >> 32) |
                         (static_cast<std::uint32_t>(purpose_) << 24),
                     static_cast<std::uint32_t>(stream_),
                     static_cast<std::uint32_t>(stream_ >> 32)};
  ++index_;
  return philox4x32_10(ctr, key_);
}

std::uint64_t PhiloxStream::next_u64() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const Block b = next_block();
  spare_ = (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
  has_spare_ = true;
  return (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
}

double PhiloxStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double PhiloxStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t PhiloxStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below needs n > 0");
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::complex<double> PhiloxStream::complex_normal() {
  const double radius = std::sqrt(-std::log(uniform_open()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace obflab
