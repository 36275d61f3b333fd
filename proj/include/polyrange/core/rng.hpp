#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace polyrange {

// splitmix64 finalizer; fixed-width arithmetic only, so platform independent.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform on the open interval (0,1) from the top 53 bits.
inline constexpr double bits_to_open01(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform on [0,1) from the top 53 bits.
inline constexpr double bits_to_01(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// Independent generator stream identified by (seed, stream id).
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed = 0, std::uint64_t stream_id = 0) : seed_(seed), id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    eng_.seed(seq);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return eng_(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return id_; }

  // Derived stream for sub-tasks; deterministic in (seed, id, k).
  Stream split(std::uint64_t k) const { return Stream(mix64(seed_ ^ mix64(id_)), k); }

  double uniform() { return bits_to_open01(eng_()); }
  double uniform01() { return bits_to_01(eng_()); }

  // Unbiased integer in [0, n) by rejection on the smallest covering power of two.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    while (true) {
      std::uint64_t v = eng_() & mask;
      if (v < n) return v;
    }
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
  std::uint64_t id_;
};

// Draws uniform directions in [0, 2d) from b-bit chunks of 64-bit words,
// rejecting chunks >= 2d.
class StepSource {
 public:
  explicit StepSource(int d) : n_dirs_(2 * d) {
    bits_ = 1;
    while ((1 << bits_) < n_dirs_) ++bits_;
    mask_ = (std::uint64_t{1} << bits_) - 1;
  }

  int next(Stream& rng) {
    while (true) {
      if (avail_ < bits_) {
        word_ = rng();
        avail_ = 64;
      }
      int v = static_cast<int>(word_ & mask_);
      word_ >>= bits_;
      avail_ -= bits_;
      if (v < n_dirs_) return v;
    }
  }

 private:
  int n_dirs_;
  int bits_;
  std::uint64_t mask_;
  std::uint64_t word_ = 0;
  int avail_ = 0;
};

}  // namespace polyrange
