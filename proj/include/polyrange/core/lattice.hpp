#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyrange {

using Site = std::vector<int>;

// Coordinates are packed into 21-bit biased fields for d <= 3.
inline constexpr int kMaxPackedDim = 3;
inline constexpr int kPackBits = 21;
inline constexpr std::int64_t kPackBias = std::int64_t{1} << 20;
inline constexpr std::uint64_t kPackMask = (std::uint64_t{1} << kPackBits) - 1;

inline std::uint64_t pack_site(const int* x, int d) {
  std::uint64_t key = 0;
  for (int i = 0; i < d; ++i) {
    key |= static_cast<std::uint64_t>(x[i] + kPackBias) << (kPackBits * i);
  }
  return key;
}

inline std::uint64_t pack_site(std::span<const int> x) {
  return pack_site(x.data(), static_cast<int>(x.size()));
}

inline Site unpack_site(std::uint64_t key, int d) {
  Site x(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    x[i] = static_cast<int>(static_cast<std::int64_t>((key >> (kPackBits * i)) & kPackMask) - kPackBias);
  }
  return x;
}

// Direction k moves along axis k/2, positive when k is even.
inline int direction_axis(int dir) { return dir >> 1; }
inline int direction_sign(int dir) { return (dir & 1) ? -1 : 1; }
inline int opposite_direction(int dir) { return dir ^ 1; }

inline std::int64_t norm2(std::span<const int> x) {
  std::int64_t s = 0;
  for (int v : x) s += static_cast<std::int64_t>(v) * v;
  return s;
}

inline double norm(std::span<const int> x) { return std::sqrt(static_cast<double>(norm2(x))); }

inline std::int64_t norm1(std::span<const int> x) {
  std::int64_t s = 0;
  for (int v : x) s += v < 0 ? -v : v;
  return s;
}

// Lattice points with Euclidean norm <= r. A small relative slack keeps
// integer radii inclusive under rounding.
inline bool in_ball(std::span<const int> x, double r) {
  return static_cast<double>(norm2(x)) <= r * r * (1.0 + 1e-12);
}

// All sites of the ball in lexicographic order.
inline std::vector<Site> ball_sites(int d, double r) {
  if (d < 1) throw std::invalid_argument("ball_sites: d must be >= 1");
  if (r < 0) throw std::invalid_argument("ball_sites: radius must be >= 0");
  const int R = static_cast<int>(std::floor(r * (1.0 + 1e-12)));
  std::vector<Site> out;
  Site x(static_cast<std::size_t>(d), -R);
  while (true) {
    if (in_ball(x, r)) out.push_back(x);
    int i = d - 1;
    while (i >= 0 && x[i] == R) {
      x[i] = -R;
      --i;
    }
    if (i < 0) break;
    ++x[i];
  }
  return out;
}

struct SiteHash {
  std::size_t operator()(const Site& x) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (int v : x) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::string site_to_string(std::span<const int> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(x[i]);
  }
  return s + ")";
}

}  // namespace polyrange
