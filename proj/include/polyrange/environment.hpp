#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "polyrange/core/lattice.hpp"
#include "polyrange/core/rng.hpp"

namespace polyrange {

// Heavy-tailed site disorder. omega_raw = +U^{-1/alpha} with probability p and
// -U^{-1/alpha} otherwise, so P(omega_raw > t) = p t^{-alpha} exactly for t >= 1.
// The field is a pure function of (seed, x).
class DisorderField {
 public:
  DisorderField(std::uint64_t seed, double alpha, double p) : seed_(seed), alpha_(alpha), p_(p), q_(1.0 - p) {
    if (!(alpha > 0.0)) throw std::invalid_argument("DisorderField: alpha must be > 0");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("DisorderField: p must lie in (0, 1)");
    inv_alpha_ = 1.0 / alpha;
    centering_ = alpha > 1.0 ? (p_ - q_) * alpha / (alpha - 1.0) : 0.0;
  }

  std::uint64_t seed() const { return seed_; }
  double alpha() const { return alpha_; }
  double p() const { return p_; }
  double q() const { return q_; }
  double centering() const { return centering_; }

  double omega_raw(const int* x, int d) const {
    std::uint64_t h = mix64(seed_ ^ 0x5851F42D4C957F2DULL);
    for (int i = 0; i < d; ++i) {
      h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x[i])) + (static_cast<std::uint64_t>(i) << 32)));
    }
    const double sign_u = bits_to_01(mix64(h ^ 0xA0761D6478BD642FULL));
    const double mag_u = bits_to_open01(mix64(h ^ 0xE7037ED1A0B428DBULL));
    const double mag = std::pow(mag_u, -inv_alpha_);
    return sign_u < p_ ? mag : -mag;
  }

  double omega(const int* x, int d) const { return omega_raw(x, d) - centering_; }
  double omega_at(const Site& x) const { return omega(x.data(), static_cast<int>(x.size())); }

 private:
  std::uint64_t seed_;
  double alpha_;
  double p_;
  double q_;
  double inv_alpha_;
  double centering_;
};

inline double omega_at(const DisorderField& f, const Site& x) { return f.omega_at(x); }

struct OrderStat {
  int rank;
  double value;
  Site position;
};

// Top-k values of omega on the ball, descending, ties broken by
// lexicographic position.
inline std::vector<OrderStat> order_stats(const DisorderField& f, int d, double r, std::size_t k) {
  const auto sites = ball_sites(d, r);
  if (k < 1 || k > sites.size()) throw std::invalid_argument("order_stats: k must lie in [1, |ball|]");
  std::vector<OrderStat> all;
  all.reserve(sites.size());
  for (const auto& x : sites) all.push_back({0, f.omega_at(x), x});
  auto before = [](const OrderStat& a, const OrderStat& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.position < b.position;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  for (std::size_t i = 0; i < k; ++i) all[i].rank = static_cast<int>(i + 1);
  return all;
}

// Sum of omega over delta; every point must lie in the ball of radius r.
inline double energy_on(const DisorderField& f, double r, const std::vector<Site>& delta) {
  double s = 0.0;
  for (const auto& x : delta) {
    if (!in_ball(x, r)) throw std::out_of_range("energy_on: point " + site_to_string(x) + " lies outside the ball");
    s += f.omega_at(x);
  }
  return s;
}

}  // namespace polyrange
