#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace obflab {

/// Master seed plus the substream (one per trial) it was split into.
struct SeedRecord {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const SeedRecord&, const SeedRecord&) = default;
};

/// Philox4x32-10 counter-based generator. The key is the master seed; the
/// counter packs the stream, a purpose tag and a block index, so streams
/// can be generated independently and in any order.
class PhiloxStream {
 public:
  enum class Purpose : std::uint8_t { channel = 0, selection = 1 };

  explicit PhiloxStream(SeedRecord seed, Purpose purpose = Purpose::channel);

  using Block = std::array<std::uint32_t, 4>;
  static Block philox4x32_10(Block counter, std::array<std::uint32_t, 2> key);

  std::uint64_t next_u64();
  /// Uniform on (0, 1] with 53 random bits.
  double uniform_open();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n);
  /// Circularly-symmetric complex normal with E|z|^2 = 1.
  std::complex<double> complex_normal();

 private:
  Block next_block();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint8_t purpose_;
  std::uint64_t index_ = 0;
  std::uint64_t spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace obflab
