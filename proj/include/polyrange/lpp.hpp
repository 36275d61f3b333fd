#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrange/core/held_karp.hpp"
#include "polyrange/core/lattice.hpp"
#include "polyrange/core/parallel.hpp"
#include "polyrange/core/rng.hpp"
#include "polyrange/environment.hpp"
#include "polyrange/params.hpp"
#include "polyrange/walk.hpp"

namespace polyrange {

namespace detail {

inline std::vector<Point> to_points(const std::vector<Site>& pts) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const auto& x : pts) out.emplace_back(x.begin(), x.end());
  return out;
}

}  // namespace detail

// (d/2) (sum_k |x_k - x_{k-1}|)^2 along the given visit order, x_0 = 0.
inline double ent_ordered(const std::vector<Site>& pts, const std::vector<int>& order, int d) {
  if (order.size() != pts.size()) throw std::invalid_argument("ent_ordered: order must be a permutation of the points");
  std::vector<char> seen(pts.size(), 0);
  Point prev(static_cast<std::size_t>(d), 0.0);
  double len = 0.0;
  for (int i : order) {
    if (i < 0 || i >= static_cast<int>(pts.size()) || seen[i]) throw std::invalid_argument("ent_ordered: order must be a permutation of the points");
    seen[i] = 1;
    if (static_cast<int>(pts[i].size()) != d) throw std::invalid_argument("ent_ordered: dimension mismatch");
    Point x(pts[i].begin(), pts[i].end());
    len += euclidean(prev, x);
    prev = std::move(x);
  }
  return 0.5 * d * len * len;
}

inline constexpr int kLBCap = 15;

// Largest subset whose best visit order has Ent <= B.
inline int L_B(const std::vector<Site>& pts, double B, int d, int cap = kLBCap) {
  if (static_cast<int>(pts.size()) > cap) {
    throw BudgetExceeded("L_B: " + std::to_string(pts.size()) + " points exceed the exact cap of " + std::to_string(cap));
  }
  if (B < 0.0) return 0;
  SubsetPaths sp(detail::to_points(pts), euclidean);
  int best = 0;
  for (std::size_t S = 1; S < (std::size_t{1} << pts.size()); ++S) {
    const int c = std::popcount(S);
    if (c > best && 0.5 * d * sp.length(S) * sp.length(S) <= B * (1.0 + 1e-12)) best = c;
  }
  return best;
}

// B = (d/2) C_d^2 p^4 (r s)^2. C_d = 2 is sufficient for the optimal order:
// a depth-first tour of a spanning tree of the range from the origin passes
// every range site within 2(|R_N| - 1) steps.
inline double entropy_budget(int d, double p, double r, double s, double C_d = 2.0) {
  const double a = C_d * p * p * r * s;
  return 0.5 * d * a * a;
}

// m distinct sites drawn uniformly from the ball of radius R.
inline std::vector<Site> sample_distinct_sites(int d, double R, int m, Stream& rng) {
  auto ball = ball_sites(d, R);
  if (m < 0 || m > static_cast<int>(ball.size())) {
    throw std::invalid_argument("sample_distinct_sites: m exceeds the number of sites in the ball");
  }
  for (int i = 0; i < m; ++i) std::swap(ball[i], ball[i + rng.below(ball.size() - i)]);
  ball.resize(static_cast<std::size_t>(m));
  return ball;
}

struct LTailReport {
  int d = 2, m = 0, trials = 0;
  double p = 1.5, r = 1, s = 1, C_d = 2, B = 0;
  std::vector<double> tail;  // P(L >= k), k = 0..m
  bool nonincreasing = true;
  bool log_concave = true;  // over the k with positive tail
  double fitted_c = 0.0;    // smallest c with (c s m^{1/d} / k)^{dk} >= tail at every k >= 1
  std::vector<double> bound;
};

inline LTailReport check_L_tail(int d, double p, double r, double s, int m, int trials, std::uint64_t seed,
                                double C_d = 2.0) {
  if (!(p > 1.0)) throw std::invalid_argument("check_L_tail: p must be > 1");
  if (!(r > 0.0) || !(s > 0.0) || m < 1 || trials < 1) throw std::invalid_argument("check_L_tail: parameters must be positive");
  if (m > static_cast<int>(ball_sites(d, p * r).size())) throw std::invalid_argument("check_L_tail: m exceeds |Lambda_pr|");
  LTailReport rep;
  rep.d = d;
  rep.m = m;
  rep.trials = trials;
  rep.p = p;
  rep.r = r;
  rep.s = s;
  rep.C_d = C_d;
  rep.B = entropy_budget(d, p, r, s, C_d);
  std::vector<int> L(static_cast<std::size_t>(trials));
  for_each_index(L.size(), [&](std::size_t t) {
    Stream rng(seed, t);
    L[t] = L_B(sample_distinct_sites(d, p * r, m, rng), rep.B, d);
  });
  std::vector<int> count(static_cast<std::size_t>(m) + 1, 0);
  for (int v : L)
    for (int k = 0; k <= v; ++k) ++count[k];
  for (int c : count) rep.tail.push_back(static_cast<double>(c) / trials);
  for (int k = 1; k <= m; ++k) {
    if (rep.tail[k] > rep.tail[k - 1]) rep.nonincreasing = false;
    if (k + 1 <= m && rep.tail[k + 1] > 0.0) {
      const double dd = std::log(rep.tail[k + 1]) - 2 * std::log(rep.tail[k]) + std::log(rep.tail[k - 1]);
      if (dd > 1e-12) rep.log_concave = false;
    }
  }
  const double scale = s * std::pow(m, 1.0 / d);
  for (int k = 1; k <= m; ++k)
    if (rep.tail[k] > 0.0) rep.fitted_c = std::max(rep.fitted_c, k * std::pow(rep.tail[k], 1.0 / (d * k)) / scale);
  rep.bound.assign(static_cast<std::size_t>(m) + 1, 1.0);
  for (int k = 1; k <= m; ++k) rep.bound[k] = std::min(1.0, std::pow(rep.fitted_c * scale / k, d * k));
  return rep;
}

// Sites inside the ball of the given radius, for walks sampled from the class
// M(r, s) through the shell sampler r <= M_N <= p r. The class maximum is
// taken over this sub-ensemble, so it is a lower bound on the true maximum.
struct ClassEnsemble {
  std::size_t drawn = 0;
  std::vector<std::vector<Site>> ranges;
};

inline ClassEnsemble sample_class_walks(int N, int d, double M_lo, double M_hi, double range_lo, double range_hi,
                                        double restrict_radius, std::size_t n_walks, std::uint64_t seed) {
  ClassEnsemble e;
  if (M_hi < 1.0 || M_lo > N) return e;
  ConfinedSampler sampler(N, d, M_hi, std::nextafter(M_lo, 0.0));
  if (!std::isfinite(sampler.log_prob())) return e;
  Stream rng(seed);
  for (std::size_t i = 0; i < n_walks; ++i) {
    auto w = sampler.sample(rng);
    ++e.drawn;
    const double R = static_cast<double>(w.range_size);
    if (w.max_disp < M_lo || w.max_disp > M_hi || R < range_lo || R > range_hi) continue;
    std::vector<Site> in;
    for (const auto& x : w.range.sites())
      if (in_ball(x, restrict_radius)) in.push_back(x);
    e.ranges.push_back(std::move(in));
  }
  return e;
}

inline double max_energy(const ClassEnsemble& e, const DisorderField& f) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : e.ranges) {
    double s = 0.0;
    for (const auto& x : r) s += f.omega_at(x);
    best = std::max(best, s);
  }
  return best;
}

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::size_t points = 0;
};

inline SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(x.size());
  f.points = x.size();
  if (x.size() < 2) return f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

struct EnergyReport {
  std::vector<double> t_grid;
  std::vector<double> prob;  // P(max Omega_r > r^{d/alpha} s t)
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t fit_points = 0;
  double theory_slope = 0.0;  // -alpha d / (alpha + d)
  double slope_limit = 0.0;   // theory_slope + 0.25
  bool slope_ok = false;
  bool nonincreasing = true;
  bool empty_class = false;
  std::size_t class_walks = 0;
};

// Points enter the slope fit in the tail regime: at least min_count seeds
// exceed the threshold and the frequency is at most tail_max. Frequencies
// near 1 carry no information about the decay and flatten the fit.
inline EnergyReport check_energy_bound(int d, double alpha, double field_p, double r, double s, double p, int N,
                                       const std::vector<double>& t_grid, int seeds, std::size_t n_walks,
                                       std::uint64_t seed, int min_count = 5,
                                       double tail_max = 0.5) {
  if (!(alpha > 0.0 && alpha < d)) throw std::invalid_argument("check_energy_bound: alpha must lie in (0, d)");
  if (!(p > 1.0) || !(s >= 1.0) || !(r > 0.0)) throw std::invalid_argument("check_energy_bound: need p > 1, s >= 1, r > 0");
  EnergyReport rep;
  rep.t_grid = t_grid;
  rep.theory_slope = -alpha * d / (alpha + d);
  rep.slope_limit = rep.theory_slope + 0.25;
  const auto ens = sample_class_walks(N, d, r, p * r, r * s, p * p * r * s, r, n_walks, seed);
  rep.class_walks = ens.ranges.size();
  if (ens.ranges.empty()) {
    rep.empty_class = true;
    return rep;
  }
  std::vector<double> maxima(static_cast<std::size_t>(seeds));
  for_each_index(maxima.size(), [&](std::size_t i) {
    maxima[i] = max_energy(ens, DisorderField(mix64(seed) + i, alpha, field_p));
  });
  const double scale = std::pow(r, d / alpha) * s;
  std::vector<double> fx, fy;
  for (double t : t_grid) {
    const auto c = std::count_if(maxima.begin(), maxima.end(), [&](double v) { return v > scale * t; });
    rep.prob.push_back(static_cast<double>(c) / seeds);
    if (c >= min_count && rep.prob.back() <= tail_max) {
      fx.push_back(t);
      fy.push_back(rep.prob.back());
    }
  }
  for (std::size_t i = 1; i < rep.prob.size(); ++i)
    if (t_grid[i] >= t_grid[i - 1] && rep.prob[i] > rep.prob[i - 1]) rep.nonincreasing = false;
  const auto fit = loglog_slope(fx, fy);
  rep.slope = fit.slope;
  rep.fit_points = fit.points;
  rep.slope_ok = std::isfinite(rep.slope) && rep.slope <= rep.slope_limit;
  return rep;
}

// Cell bookkeeping for the decomposition of {M_N > A_N}: M_N in
// [p^k A, p^{k+1} A] and |R_N| in [p^{k+j} A, p^{k+j+2} A].
inline double scale_A_N(int N, int d, double alpha) { return std::pow(static_cast<double>(N), 1.0 - alpha / d); }

inline int cell_k_max(int N, double A, double p) {
  return static_cast<int>(std::floor(std::log(N / A) / std::log(p) + 1e-12));
}

// Number of lattice sites with |x| <= r, by slicing along the first axis.
inline double ball_count(int d, double r) {
  if (r < 0.0) return 0.0;
  if (d == 0) return 1.0;
  const double r2 = r * r * (1.0 + 1e-12);
  const int m = static_cast<int>(std::floor(std::sqrt(r2)));
  if (d == 1) return 2.0 * m + 1.0;
  double s = 0.0;
  for (int x = -m; x <= m; ++x) s += ball_count(d - 1, std::sqrt(std::max(0.0, r2 - double(x) * x)));
  return s;
}

inline double cell_B(int N, int k, double A, double p, int d) {
  const double r = std::pow(p, k) * A;
  const double ball = ball_count(d, r);
  return std::log(std::min(ball / A, N / r)) / std::log(p);
}

inline int cell_j_max(int N, int k, double A, double p, int d) {
  return static_cast<int>(std::floor(cell_B(N, k, A, p, d) + 1e-12));
}

inline bool in_cell(double max_disp, std::size_t range_size, int j, int k, double A, double p) {
  const double R = static_cast<double>(range_size);
  return max_disp >= std::pow(p, k) * A && max_disp <= std::pow(p, k + 1) * A && R >= std::pow(p, k + j) * A &&
         R <= std::pow(p, k + j + 2) * A;
}

struct LemmaGCell {
  int j = 0, k = 0;
  std::size_t class_walks = 0;
  double threshold = 0.0;
  double prob = 0.0;
};

struct LemmaGPoint {
  int N = 0;
  double A_N = 0.0;
  std::vector<LemmaGCell> cells;
  std::size_t empty_cells = 0;
  double sum_prob = 0.0;
  double rate_shape = 0.0;  // log N * N^{rate_exponent}
};

struct LemmaGReport {
  double rate_exponent = 0.0;  // -alpha d / (alpha + d) * (gamma - zeta - (d - alpha) / alpha)
  std::vector<LemmaGPoint> points;
  bool nonincreasing = true;
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();  // over points with positive sums
  bool slope_ok = true;  // fitted_slope <= rate_exponent + 0.25 when defined
};

inline LemmaGReport check_lemma_g(const ModelParams& m, const std::vector<int>& N_grid, double p, double eps, int seeds,
                                  std::size_t n_walks, std::uint64_t seed) {
  m.validate();
  const double gap = m.gamma - m.zeta - (m.d - m.alpha) / m.alpha;
  if (!(gap > 0.0)) throw std::invalid_argument("check_lemma_g: hypothesis gamma > zeta + (d - alpha) / alpha fails");
  if (!(m.beta_hat > 0.0) || !(m.h_hat > 0.0)) throw std::invalid_argument("check_lemma_g: beta_hat and h_hat must be > 0");
  if (!(p > 1.0)) throw std::invalid_argument("check_lemma_g: p must be > 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("check_lemma_g: eps must lie in (0, 1)");
  LemmaGReport rep;
  rep.rate_exponent = -m.alpha * m.d / (m.alpha + m.d) * gap;
  std::vector<double> fx, fy;
  for (int N : N_grid) {
    LemmaGPoint pt;
    pt.N = N;
    pt.A_N = scale_A_N(N, m.d, m.alpha);
    const double A = pt.A_N;
    const double ratio = m.h_N(N) / m.beta_N(N);
    struct CellWork {
      LemmaGCell cell;
      ClassEnsemble ens;
    };
    std::vector<CellWork> work;
    for (int k = 0; k <= cell_k_max(N, A, p); ++k) {
      const double lo = std::pow(p, k) * A, hi = std::pow(p, k + 1) * A;
      for (int j = 0; j <= cell_j_max(N, k, A, p, m.d); ++j) {
        CellWork w;
        w.cell.j = j;
        w.cell.k = k;
        w.cell.threshold = eps * eps * std::pow(p, k + j) * ratio * A;
        w.ens = sample_class_walks(N, m.d, lo, hi, std::pow(p, k + j) * A, std::pow(p, k + j + 2) * A, hi, n_walks,
                                   mix64(seed ^ (static_cast<std::uint64_t>(N) << 32 | k << 16 | j)));
        w.cell.class_walks = w.ens.ranges.size();
        work.push_back(std::move(w));
      }
    }
    std::vector<std::vector<char>> hit(static_cast<std::size_t>(seeds), std::vector<char>(work.size(), 0));
    for_each_index(hit.size(), [&](std::size_t i) {
      DisorderField f(mix64(seed + 1) + i, m.alpha, m.p);
      for (std::size_t c = 0; c < work.size(); ++c)
        if (!work[c].ens.ranges.empty()) hit[i][c] = max_energy(work[c].ens, f) > work[c].cell.threshold;
    });
    for (std::size_t c = 0; c < work.size(); ++c) {
      double n = 0;
      for (const auto& h : hit) n += h[c];
      work[c].cell.prob = n / seeds;
      if (work[c].ens.ranges.empty()) ++pt.empty_cells;
      pt.sum_prob += work[c].cell.prob;
      pt.cells.push_back(work[c].cell);
    }
    pt.rate_shape = std::log(static_cast<double>(N)) * std::pow(static_cast<double>(N), rep.rate_exponent);
    if (!rep.points.empty() && pt.sum_prob > rep.points.back().sum_prob) rep.nonincreasing = false;
    if (pt.sum_prob > 0.0) {
      fx.push_back(N);
      fy.push_back(pt.sum_prob);
    }
    rep.points.push_back(std::move(pt));
  }
  const auto fit = loglog_slope(fx, fy);
  rep.fitted_slope = fit.slope;
  if (std::isfinite(fit.slope)) rep.slope_ok = fit.slope <= rep.rate_exponent + 0.25;
  return rep;
}

}  // namespace polyrange
