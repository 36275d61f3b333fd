#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrange/core/lattice.hpp"
#include "polyrange/core/parallel.hpp"
#include "polyrange/core/rng.hpp"
#include "polyrange/core/site_set.hpp"
#include "polyrange/environment.hpp"

namespace polyrange {

// Non-return probability of the simple random walk on Z^3, 1/G(0) with G the
// lattice Green's function. Reproduced to 1e-8 by green_function(3, 0) in the
// test suite and checked against gamma_d_estimate.
inline constexpr double kLambda3 = 0.6594626704;

struct Atom {
  std::vector<double> x;
  double w;
};

struct WeightedPointProcess {
  int d = 2;
  std::vector<Atom> atoms;
  double L = 1.0;
  double w_min = 1.0;
  double alpha = 1.5;
  double p = 0.5;
  double q = 0.5;
};

// Poisson process on [-L, L]^d x {|w| >= w_min} with intensity
// alpha p^{1{w>0}} q^{1{w<0}} |w|^{-1-alpha} dx dw.
inline WeightedPointProcess sample_ppp(int d, double L, double w_min, double alpha, double p, Stream& rng) {
  if (d < 1) throw std::invalid_argument("sample_ppp: d must be >= 1");
  if (!(L > 0.0)) throw std::invalid_argument("sample_ppp: L must be > 0");
  if (!(w_min > 0.0)) throw std::invalid_argument("sample_ppp: w_min must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_ppp: alpha must be > 0");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("sample_ppp: p must lie in (0, 1)");
  WeightedPointProcess pp;
  pp.d = d;
  pp.L = L;
  pp.w_min = w_min;
  pp.alpha = alpha;
  pp.p = p;
  pp.q = 1.0 - p;
  const double mass = std::pow(2.0 * L, d) * std::pow(w_min, -alpha);
  const auto n = std::poisson_distribution<long long>(mass)(rng);
  pp.atoms.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    Atom a;
    a.x.resize(static_cast<std::size_t>(d));
    for (auto& c : a.x) c = L * (2.0 * rng.uniform01() - 1.0);
    const double mag = w_min * std::pow(rng.uniform(), -1.0 / alpha);
    a.w = rng.uniform01() < p ? mag : -mag;
    pp.atoms.push_back(std::move(a));
  }
  return pp;
}

// Radial kernel f(r): d = 2 gives E1(r^2/2); d = 3 gives
// 2 lambda_3 int_0^1 rho_3(u, r) du with rho_3 the Gaussian kernel
// (2 pi u / 3)^{-3/2} exp(-3 r^2 / (2u)).
inline double f_kernel_radial(int d, double r, double lambda3 = kLambda3) {
  if (d != 2 && d != 3) throw std::invalid_argument("f_kernel: d must be 2 or 3");
  if (!(r > 0.0)) throw std::invalid_argument("f_kernel: x must be nonzero");
  if (d == 2) return boost::math::expint(1, 0.5 * r * r);
  // In v = log u: integrand rho_3(u) u dv, which is negligible once 3r^2/(2u) > 800.
  const double a = 1.5 * r * r;
  const double lo = std::min(std::log(a / 800.0), -1e-3);
  auto g = [a](double v) {
    const double u = std::exp(v);
    return std::pow(2.0 * std::numbers::pi * u / 3.0, -1.5) * std::exp(-a / u) * u;
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  return 2.0 * lambda3 * GK::integrate(g, lo, 0.0, 20, 1e-13);
}

inline double f_kernel(int d, const std::vector<double>& x, double lambda3 = kLambda3) {
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("f_kernel: point dimension mismatch");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return f_kernel_radial(d, std::sqrt(r2), lambda3);
}

// Integral of f over the box [-L, L]^d, from f = kappa int_0^1 phi_{sigma^2(u)}(x) du
// with phi a centred Gaussian density.
inline double f_box_integral(int d, double L, double lambda3 = kLambda3) {
  if (d != 2 && d != 3) throw std::invalid_argument("f_box_integral: d must be 2 or 3");
  const double kappa = d == 2 ? 2.0 * std::numbers::pi : 2.0 * lambda3;
  const double var_scale = d == 2 ? 1.0 : 1.0 / 3.0;
  auto g = [&](double u) {
    if (u <= 0.0) return 1.0;
    return std::pow(std::erf(L / std::sqrt(2.0 * u * var_scale)), d);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  return kappa * GK::integrate(g, 0.0, 1.0, 15, 1e-13);
}

// Integral of f^2 over the ball of radius R (radial quadrature).
inline double f_squared_ball_integral(int d, double R, double lambda3 = kLambda3) {
  const double surface = d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  auto g = [&](double s) {
    const double r = std::exp(s);
    const double f = f_kernel_radial(d, r, lambda3);
    return f * f * std::pow(r, d);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  return surface * GK::integrate(g, std::log(1e-12), std::log(R), 12, 1e-10);
}

struct WEstimate {
  double value = 0.0;
  double atom_sum = 0.0;
  double compensator = 0.0;
  double w_cut = 0.0;
  // Standard deviation of the discarded small-weight part (|w| < w_cut);
  // infinite when alpha >= 2.
  double truncation_sd = 0.0;
  double value_at_double_cut = 0.0;
  double sensitivity = 0.0;  // value - value_at_double_cut
};

namespace detail {

inline void w_sums(const WeightedPointProcess& pp, double w_cut, double lambda3, double& atom_sum, double& comp) {
  atom_sum = 0.0;
  for (const auto& a : pp.atoms) {
    if (std::abs(a.w) < w_cut) continue;
    atom_sum += a.w * f_kernel(pp.d, a.x, lambda3);
  }
  comp = 0.0;
  if (pp.alpha > 1.0) {
    comp = (pp.p - pp.q) * pp.alpha / (pp.alpha - 1.0) * std::pow(w_cut, 1.0 - pp.alpha) * f_box_integral(pp.d, pp.L, lambda3);
  }
}

}  // namespace detail

// Compensated atom sum over |w| >= w_cut (default: the sampling cutoff).
// For alpha < 1 the sum is used without compensation.
inline WEstimate estimate_W(const WeightedPointProcess& pp, double w_cut = 0.0, double lambda3 = kLambda3) {
  if (pp.d != 2 && pp.d != 3) throw std::invalid_argument("estimate_W: d must be 2 or 3");
  if (pp.alpha == 1.0) throw std::invalid_argument("estimate_W: alpha = 1 makes the compensator log-divergent");
  if (w_cut <= 0.0) w_cut = pp.w_min;
  if (w_cut < pp.w_min) throw std::invalid_argument("estimate_W: cutoff below the sampling cutoff");
  WEstimate e;
  e.w_cut = w_cut;
  detail::w_sums(pp, w_cut, lambda3, e.atom_sum, e.compensator);
  e.value = e.atom_sum - e.compensator;
  double s2, c2;
  detail::w_sums(pp, 2.0 * w_cut, lambda3, s2, c2);
  e.value_at_double_cut = s2 - c2;
  e.sensitivity = e.value - e.value_at_double_cut;
  if (pp.alpha < 2.0) {
    const double wsq = (pp.p + pp.q) * pp.alpha / (2.0 - pp.alpha) * std::pow(w_cut, 2.0 - pp.alpha);
    e.truncation_sd = std::sqrt(wsq * f_squared_ball_integral(pp.d, pp.L * std::sqrt(pp.d), lambda3));
  } else {
    e.truncation_sd = std::numeric_limits<double>::infinity();
  }
  return e;
}

// Principal Dirichlet eigenvalue of -(1/2d) Laplacian on the unit-volume ball.
inline double dirichlet_lambda1(int d) {
  if (d < 1) throw std::invalid_argument("dirichlet_lambda1: d must be >= 1");
  const double j = boost::math::cyl_bessel_j_zero(d / 2.0 - 1.0, 1);
  const double r = std::pow(std::tgamma(d / 2.0 + 1.0) / std::pow(std::numbers::pi, d / 2.0), 1.0 / d);
  return (j / r) * (j / r) / (2.0 * d);
}

inline double c_d_constant(int d, double h_hat) {
  if (d < 2) throw std::invalid_argument("c_d_constant: d must be >= 2");
  if (!(h_hat > 0.0)) throw std::invalid_argument("c_d_constant: h_hat must be > 0");
  const double lam = dirichlet_lambda1(d);
  return std::pow(h_hat, 2.0 / (d + 2.0)) * ((d + 2.0) / 2.0) * std::pow(2.0 * lam / d, d / (d + 2.0));
}

struct GammaEstimate {
  int d = 3;
  std::size_t horizon = 0;
  std::size_t n_samples = 0;
  double non_return = 0.0;
  double non_return_se = 0.0;
  // Upper bound on P(first return after the horizon), from the local limit
  // theorem: sum_{n > H} P(S_n = 0) ~ (d / 2 pi)^{d/2} H^{1-d/2} / (d/2 - 1).
  double bias_bound = 0.0;
  bool has_range_density = false;
  double range_density = 0.0;  // mean |R_H| / H
  double range_density_se = 0.0;
};

inline GammaEstimate gamma_d_estimate(int d, std::size_t horizon, std::size_t n_samples, std::uint64_t seed,
                                      bool with_range_density = true) {
  if (d <= 2) throw std::invalid_argument("gamma_d_estimate: d must be >= 3 (the walk is recurrent for d <= 2)");
  if (horizon < 1 || n_samples < 2) throw std::invalid_argument("gamma_d_estimate: need horizon >= 1 and n_samples >= 2");
  with_range_density = with_range_density && d <= kMaxPackedDim;
  const std::size_t chunks = std::min<std::size_t>(64, n_samples);
  struct Part {
    double nr = 0, rd = 0, rd2 = 0;
  };
  std::vector<Part> parts(chunks);
  for_each_index(chunks, [&](std::size_t k) {
    Stream rng(seed, k);
    StepSource src(d);
    PackedKeySet seen(with_range_density ? horizon + 1 : 1);
    std::vector<int> x(static_cast<std::size_t>(d));
    const std::size_t lo = n_samples * k / chunks, hi = n_samples * (k + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      std::fill(x.begin(), x.end(), 0);
      std::int64_t n2 = 0;
      bool returned = false;
      if (with_range_density) {
        seen.clear();
        seen.insert(pack_site(x.data(), d));
      }
      for (std::size_t t = 0; t < horizon; ++t) {
        const int dir = src.next(rng);
        const int a = direction_axis(dir), s = direction_sign(dir);
        n2 += 2 * static_cast<std::int64_t>(s) * x[a] + 1;
        x[a] += s;
        if (n2 == 0) {
          returned = true;
          if (!with_range_density) break;
        }
        if (with_range_density) seen.insert(pack_site(x.data(), d));
      }
      parts[k].nr += returned ? 0.0 : 1.0;
      if (with_range_density) {
        const double r = static_cast<double>(seen.size()) / static_cast<double>(horizon);
        parts[k].rd += r;
        parts[k].rd2 += r * r;
      }
    }
  });
  Part all = pairwise_reduce(parts, [](Part& a, const Part& b) {
    a.nr += b.nr;
    a.rd += b.rd;
    a.rd2 += b.rd2;
  });
  const double n = static_cast<double>(n_samples);
  GammaEstimate g;
  g.d = d;
  g.horizon = horizon;
  g.n_samples = n_samples;
  g.non_return = all.nr / n;
  g.non_return_se = std::sqrt(g.non_return * (1.0 - g.non_return) / (n - 1.0));
  const double H = static_cast<double>(horizon);
  g.bias_bound = std::pow(d / (2.0 * std::numbers::pi), d / 2.0) * std::pow(H, 1.0 - d / 2.0) / (d / 2.0 - 1.0);
  g.has_range_density = with_range_density;
  if (with_range_density) {
    g.range_density = all.rd / n;
    g.range_density_se = std::sqrt(std::max(0.0, all.rd2 / n - g.range_density * g.range_density) / (n - 1.0));
  }
  return g;
}

// Lattice Green's function G(x) = sum_n P(S_n = x) for d >= 3, from
// G(x) = int_0^inf prod_i e^{-t/d} I_{x_i}(t/d) dt (the Fourier integral after
// the angular integration). The tail beyond T uses the large-argument
// expansion of the scaled Bessel functions.
inline double green_function(int d, const std::vector<int>& x) {
  if (d < 3) throw std::invalid_argument("green_function: d must be >= 3");
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("green_function: dimension mismatch");
  gsl_set_error_handler_off();
  std::vector<int> n(x.size());
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    n[i] = std::abs(x[i]);
    r2 += static_cast<double>(n[i]) * n[i];
  }
  auto integrand = [&](double t) {
    double v = 1.0;
    for (int ni : n) v *= gsl_sf_bessel_In_scaled(ni, t / d);
    return v;
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double T = 1e4 * std::max(1.0, r2);
  double total = GK::integrate(integrand, 0.0, 1.0, 10, 1e-12);
  total += GK::integrate([&](double s) { return integrand(std::exp(s)) * std::exp(s); }, 0.0, std::log(T), 12, 1e-12);
  // prod_i (2 pi t/d)^{-1/2} (1 + a_i / t + b_i / t^2) with mu = 4 n^2.
  double A = 0.0, B = 0.0;
  for (int ni : n) {
    const double mu = 4.0 * ni * ni;
    const double a = -d * (mu - 1.0) / 8.0;
    const double b = d * d * (mu - 1.0) * (mu - 9.0) / 128.0;
    B += b + A * a;
    A += a;
  }
  const double h = d / 2.0;
  const double tail = std::pow(2.0 * std::numbers::pi / d, -h) *
                      (std::pow(T, 1.0 - h) / (h - 1.0) + A * std::pow(T, -h) / h + B * std::pow(T, -h - 1.0) / (h + 1.0));
  return total + tail;
}

enum class HitMethod { fourier, monte_carlo };

inline std::string to_string(HitMethod m) { return m == HitMethod::fourier ? "fourier" : "monte_carlo"; }

struct HitProb {
  double value = 0.0;
  double std_err = 0.0;
  HitMethod method = HitMethod::fourier;
};

struct HitMcOptions {
  std::size_t horizon = 1000;
  std::size_t n_samples = 100000;
  std::uint64_t seed = 1;
};

// P(x in R_infinity) = G(x) / G(0); 1 at the origin.
inline HitProb hit_prob_infty(int d, const std::vector<int>& x, HitMethod method = HitMethod::fourier,
                              const HitMcOptions& opt = {}) {
  if (d <= 2) throw std::invalid_argument("hit_prob_infty: d must be >= 3 (the walk is recurrent for d <= 2)");
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("hit_prob_infty: dimension mismatch");
  HitProb out;
  out.method = method;
  if (std::all_of(x.begin(), x.end(), [](int v) { return v == 0; })) {
    out.value = 1.0;
    return out;
  }
  if (method == HitMethod::fourier) {
    out.value = green_function(d, x) / green_function(d, std::vector<int>(static_cast<std::size_t>(d), 0));
    return out;
  }
  // Walks to the horizon; a walk that has not hit x continues with the
  // asymptotic hitting probability lambda * a_d |y - x|^{2-d}, lambda being
  // the non-return fraction of the same walks.
  const double a_d = d * std::tgamma(d / 2.0 - 1.0) / (2.0 * std::pow(std::numbers::pi, d / 2.0));
  const std::size_t chunks = std::min<std::size_t>(64, opt.n_samples);
  struct Part {
    double hits = 0, nonret = 0, n = 0;
    std::vector<double> tails;  // |y - x|^{2-d} for walks that did not hit
  };
  std::vector<Part> parts(chunks);
  for_each_index(chunks, [&](std::size_t k) {
    Stream rng(opt.seed, k);
    StepSource src(d);
    std::vector<int> y(static_cast<std::size_t>(d));
    const std::size_t lo = opt.n_samples * k / chunks, hi = opt.n_samples * (k + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      std::fill(y.begin(), y.end(), 0);
      bool hit = false, returned = false;
      for (std::size_t t = 0; t < opt.horizon && !(hit && returned); ++t) {
        const int dir = src.next(rng);
        y[direction_axis(dir)] += direction_sign(dir);
        if (!hit && y == x) hit = true;
        if (!returned && std::all_of(y.begin(), y.end(), [](int v) { return v == 0; })) returned = true;
      }
      parts[k].n += 1;
      parts[k].nonret += returned ? 0.0 : 1.0;
      if (hit) {
        parts[k].hits += 1;
      } else {
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) r2 += static_cast<double>(y[j] - x[j]) * (y[j] - x[j]);
        parts[k].tails.push_back(std::pow(r2, (2.0 - d) / 2.0));
      }
    }
  });
  double hits = 0, nonret = 0, n = 0;
  for (auto& p : parts) {
    hits += p.hits;
    nonret += p.nonret;
    n += p.n;
  }
  const double lambda = nonret / n;
  double s = 0.0, s2 = 0.0;
  for (auto& p : parts) {
    // Per-walk value: 1 if hit, else the continuation probability.
    s += p.hits;
    s2 += p.hits;
    for (double t : p.tails) {
      const double v = std::min(1.0, lambda * a_d * t);
      s += v;
      s2 += v * v;
    }
  }
  out.value = s / n;
  out.std_err = std::sqrt(std::max(0.0, s2 / n - out.value * out.value) / (n - 1.0));
  return out;
}

struct XEstimate {
  double value = 0.0;
  double half_cutoff_value = 0.0;
  double tail_diagnostic = 0.0;  // value - half_cutoff_value
  std::size_t n_sites = 0;
};

// Partial sums of sum_x w(x) P(x in R_infinity) over the ball of the given
// radius and of half that radius. Hitting probabilities are shared across
// sites related by coordinate permutations and sign flips.
inline XEstimate estimate_X(const std::function<double(const Site&)>& site_value, int d, double cutoff) {
  if (d <= 2) throw std::invalid_argument("estimate_X: d must be >= 3 (the walk is recurrent for d <= 2)");
  if (!(cutoff >= 0.0)) throw std::invalid_argument("estimate_X: cutoff must be >= 0");
  std::map<std::vector<int>, double> cache;
  XEstimate e;
  for (const auto& x : ball_sites(d, cutoff)) {
    std::vector<int> key(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) key[i] = std::abs(x[i]);
    std::sort(key.begin(), key.end());
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, hit_prob_infty(d, key).value).first;
    const double term = site_value(x) * it->second;
    e.value += term;
    if (in_ball(x, cutoff / 2.0)) e.half_cutoff_value += term;
    ++e.n_sites;
  }
  e.tail_diagnostic = e.value - e.half_cutoff_value;
  return e;
}

inline XEstimate estimate_X(const DisorderField& f, int d, double cutoff) {
  return estimate_X([&f](const Site& x) { return f.omega_at(x); }, d, cutoff);
}

}  // namespace polyrange
