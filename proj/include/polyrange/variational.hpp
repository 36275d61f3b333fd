#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "polyrange/core/held_karp.hpp"
#include "polyrange/limits.hpp"

namespace polyrange {

struct PolyPath {
  std::vector<Point> vertices;  // vertices[0] is the origin
  std::vector<double> times;    // optional, one per segment

  void validate() const {
    if (vertices.empty()) throw std::invalid_argument("PolyPath: needs at least the origin");
    for (double c : vertices[0])
      if (c != 0.0) throw std::invalid_argument("PolyPath: first vertex must be the origin");
    for (const auto& v : vertices)
      if (v.size() != vertices[0].size()) throw std::invalid_argument("PolyPath: mixed dimensions");
    if (!times.empty()) {
      if (times.size() + 1 != vertices.size()) throw std::invalid_argument("PolyPath: one time per segment");
      double s = 0.0;
      for (double t : times) {
        if (!(t > 0.0)) throw std::invalid_argument("PolyPath: times must be > 0");
        s += t;
      }
      if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("PolyPath: times must sum to 1");
    }
  }

  static PolyPath origin(int d) { return PolyPath{{Point(static_cast<std::size_t>(d), 0.0)}, {}}; }
};

inline double arclength(const PolyPath& path, const Metric& metric = euclidean) {
  double s = 0.0;
  for (std::size_t i = 1; i < path.vertices.size(); ++i) s += metric(path.vertices[i - 1], path.vertices[i]);
  return s;
}

inline double ent(const PolyPath& path, int d) {
  path.validate();
  const double l = arclength(path);
  return 0.5 * d * l * l;
}

inline double distance_to_segment(const Point& x, const Point& a, const Point& b) {
  double ab2 = 0.0, t = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ab2 += (b[i] - a[i]) * (b[i] - a[i]);
    t += (x[i] - a[i]) * (b[i] - a[i]);
  }
  t = ab2 > 0.0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = a[i] + t * (b[i] - a[i]) - x[i];
    s += c * c;
  }
  return std::sqrt(s);
}

// Sum of atom weights within distance tol of the polyline's image.
inline double pi_collect(const PolyPath& path, const WeightedPointProcess& pp, double tol = 0.0) {
  if (tol < 0.0) throw std::invalid_argument("pi_collect: tol must be >= 0");
  path.validate();
  double s = 0.0;
  for (const auto& a : pp.atoms) {
    double best = euclidean(a.x, path.vertices[0]);
    for (std::size_t i = 1; i < path.vertices.size() && best > tol; ++i)
      best = std::min(best, distance_to_segment(a.x, path.vertices[i - 1], path.vertices[i]));
    if (best <= tol) s += a.w;
  }
  return s;
}

struct VariationalResult {
  double value = 0.0;
  PolyPath path;
  bool exact = true;  // false: beam-search lower bound
  std::vector<std::size_t> atoms;  // indices into pp.atoms, in visit order
};

inline constexpr int kExactAtomCap = 14;

namespace detail {

inline std::vector<std::size_t> positive_atoms(const WeightedPointProcess& pp) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pp.atoms.size(); ++i)
    if (pp.atoms[i].w > 0.0) idx.push_back(i);
  return idx;
}

inline VariationalResult make_result(const WeightedPointProcess& pp, int d, const std::vector<std::size_t>& visit,
                                     double value, bool exact) {
  VariationalResult r;
  r.value = value;
  r.exact = exact;
  r.atoms = visit;
  r.path = PolyPath::origin(d);
  for (auto i : visit) r.path.vertices.push_back(pp.atoms[i].x);
  return r;
}

// Beam search over visit sequences; score(weight, length) is maximised,
// infeasible extensions (score = -inf) are dropped.
template <class Score>
VariationalResult beam_search(const WeightedPointProcess& pp, int d, const std::vector<std::size_t>& cand,
                              const Metric& metric, Score score, std::size_t width) {
  struct State {
    std::vector<std::size_t> seq;
    std::vector<bool> used;
    double w, len, score;
  };
  const Point origin(static_cast<std::size_t>(d), 0.0);
  std::vector<State> beam{{{}, std::vector<bool>(cand.size(), false), 0.0, 0.0, score(0.0, 0.0)}};
  State best = beam[0];
  while (!beam.empty()) {
    std::vector<State> next;
    for (const auto& s : beam) {
      const Point& from = s.seq.empty() ? origin : pp.atoms[cand[s.seq.back()]].x;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        if (s.used[k]) continue;
        State t = s;
        t.seq.push_back(k);
        t.used[k] = true;
        t.w += pp.atoms[cand[k]].w;
        t.len += metric(from, pp.atoms[cand[k]].x);
        t.score = score(t.w, t.len);
        if (t.score == -std::numeric_limits<double>::infinity()) continue;
        next.push_back(std::move(t));
      }
    }
    std::sort(next.begin(), next.end(), [](const State& a, const State& b) { return a.score > b.score; });
    if (next.size() > width) next.resize(width);
    for (const auto& s : next)
      if (s.score > best.score) best = s;
    beam = std::move(next);
  }
  std::vector<std::size_t> visit;
  for (auto k : best.seq) visit.push_back(cand[k]);
  return make_result(pp, d, visit, best.score, false);
}

template <class Score>
VariationalResult solve_subsets(const WeightedPointProcess& pp, int d, const Metric& metric, Score score, int cap,
                                std::size_t beam_width) {
  if (pp.d != d) throw std::invalid_argument("variational: point process dimension mismatch");
  const auto cand = positive_atoms(pp);
  if (static_cast<int>(cand.size()) > cap) return beam_search(pp, d, cand, metric, score, beam_width);
  std::vector<Point> pts;
  for (auto i : cand) pts.push_back(pp.atoms[i].x);
  SubsetPaths sp(pts, metric);
  double best = score(0.0, 0.0);
  std::size_t arg = 0;
  for (std::size_t S = 1; S < (std::size_t{1} << cand.size()); ++S) {
    double w = 0.0;
    for (std::size_t k = 0; k < cand.size(); ++k)
      if (S >> k & 1) w += pp.atoms[cand[k]].w;
    const double v = score(w, sp.length(S));
    if (v > best) {
      best = v;
      arg = S;
    }
  }
  std::vector<std::size_t> visit;
  for (int k : sp.order(arg)) visit.push_back(cand[static_cast<std::size_t>(k)]);
  return make_result(pp, d, visit, best, true);
}

}  // namespace detail

// sup over polylines of beta pi(s) - Ent(s). Vertices are restricted to atom
// locations: the objective depends only on the visited atom set and on
// arclength, which straight segments minimise.
inline VariationalResult solve_T_beta(const WeightedPointProcess& pp, double beta, int d, int cap = kExactAtomCap,
                                      std::size_t beam_width = 256) {
  if (!(beta >= 0.0)) throw std::invalid_argument("solve_T_beta: beta must be >= 0");
  return detail::solve_subsets(
      pp, d, euclidean, [&](double w, double len) { return beta * w - 0.5 * d * len * len; }, cap, beam_width);
}

// Largest positive weight collectible by a polyline of l1-arclength <= 1.
inline VariationalResult solve_T_hat_inf(const WeightedPointProcess& pp, int d, int cap = kExactAtomCap,
                                         std::size_t beam_width = 256) {
  return detail::solve_subsets(
      pp, d, manhattan,
      [](double w, double len) { return len <= 1.0 + 1e-12 ? w : -std::numeric_limits<double>::infinity(); }, cap,
      beam_width);
}

// log((1/d) sum_i cosh lambda_i), evaluated without overflow.
inline double log_mean_cosh(const Eigen::VectorXd& lam) {
  const double m = lam.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    s += std::exp(std::abs(lam[i]) - m) * 0.5 * (1.0 + std::exp(-2.0 * std::abs(lam[i])));
  return m + std::log(s / static_cast<double>(lam.size()));
}

inline double rate_inner_objective(const Eigen::VectorXd& lam, const Eigen::VectorXd& v) {
  return lam.dot(v) - log_mean_cosh(lam);
}

inline Eigen::VectorXd rate_inner_gradient(const Eigen::VectorXd& lam, const Eigen::VectorXd& v) {
  const double m = lam.cwiseAbs().maxCoeff();
  Eigen::VectorXd c(lam.size()), s(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    // cosh and sinh scaled by e^{-m}
    c[i] = 0.5 * (std::exp(lam[i] - m) + std::exp(-lam[i] - m));
    s[i] = 0.5 * (std::exp(lam[i] - m) - std::exp(-lam[i] - m));
  }
  return v - s / c.sum();
}

struct RateSolution {
  double value = 0.0;
  Eigen::VectorXd lambda;  // maximiser; empty on or outside the boundary
};

inline RateSolution rate_J_solve(int d, const Eigen::VectorXd& v) {
  if (d < 1 || v.size() != d) throw std::invalid_argument("rate_J: dimension mismatch");
  RateSolution out;
  const double l1 = v.cwiseAbs().sum();
  if (l1 > 1.0 + 1e-14) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  if (l1 >= 1.0 - 1e-14) {
    // Only steps along sign(v_i) survive: multinomial entropy.
    double s = std::log(2.0 * d);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double a = std::abs(v[i]) / l1;
      if (a > 0.0) s += a * std::log(a);
    }
    out.value = s;
    return out;
  }
  // Damped Newton on the concave inner problem.
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd g = rate_inner_gradient(lam, v);
    if (g.norm() < 1e-15) break;
    const double m = lam.cwiseAbs().maxCoeff();
    Eigen::VectorXd c(d), s(d);
    for (int i = 0; i < d; ++i) {
      c[i] = 0.5 * (std::exp(lam[i] - m) + std::exp(-lam[i] - m));
      s[i] = 0.5 * (std::exp(lam[i] - m) - std::exp(-lam[i] - m));
    }
    const double C = c.sum();
    Eigen::MatrixXd H = -Eigen::MatrixXd(c.asDiagonal()) / C + s * s.transpose() / (C * C);
    Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite() || step.dot(g) <= 0.0) step = g;
    const double f0 = rate_inner_objective(lam, v);
    double t = 1.0;
    while (t > 1e-12 && rate_inner_objective(lam + t * step, v) < f0 + 1e-4 * t * step.dot(g)) t *= 0.5;
    if (t <= 1e-12) break;
    lam += t * step;
  }
  out.value = std::max(0.0, rate_inner_objective(lam, v));
  out.lambda = lam;
  return out;
}

inline double rate_J(int d, const Eigen::VectorXd& v) { return rate_J_solve(d, v).value; }

inline double rate_J(int d, const std::vector<double>& v) {
  return rate_J(d, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

struct EntHat {
  double value = 0.0;
  std::vector<double> times;  // optimal allocation, one per segment
};

// inf over time allocations t_k of sum_k t_k J(delta_k / t_k). The perspective
// phi_k(t) = t J(delta_k / t) is convex with phi' = -log mean cosh(lambda*) and
// phi'' = v' H^{-1} v / t (v = delta_k / t, H the Hessian of log mean cosh at
// lambda*), so the optimum equalises phi'_k = mu. Both the per-segment
// equations and the outer one in mu are solved by Newton inside a bracket.
inline EntHat ent_hat(const PolyPath& path, int d) {
  path.validate();
  if (static_cast<int>(path.vertices[0].size()) != d) throw std::invalid_argument("ent_hat: dimension mismatch");
  const std::size_t K = path.vertices.size() - 1;
  EntHat out;
  out.times.assign(K, 0.0);
  std::vector<Eigen::VectorXd> delta;
  std::vector<double> l1;
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = path.vertices[k + 1][i] - path.vertices[k][i];
    delta.push_back(v);
    l1.push_back(v.cwiseAbs().sum());
    total += l1.back();
  }
  if (total == 0.0) return out;
  if (total > 1.0 + 1e-12) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  auto seg_value = [&](std::size_t k, double t) {
    if (l1[k] == 0.0) return 0.0;
    return t * rate_J(d, Eigen::VectorXd(delta[k] / t));
  };
  if (total >= 1.0 - 1e-12) {
    for (std::size_t k = 0; k < K; ++k) {
      out.times[k] = l1[k] / total;
      out.value += seg_value(k, out.times[k]);
    }
    return out;
  }
  struct Deriv {
    double d1, d2;
  };
  auto derivs = [&](std::size_t k, double t) {
    const Eigen::VectorXd v = delta[k] / t;
    const auto sol = rate_J_solve(d, v);
    const Eigen::VectorXd& lam = sol.lambda;
    const double m = lam.cwiseAbs().maxCoeff();
    Eigen::VectorXd c(d), s(d);
    for (int i = 0; i < d; ++i) {
      c[i] = 0.5 * (std::exp(lam[i] - m) + std::exp(-lam[i] - m));
      s[i] = 0.5 * (std::exp(lam[i] - m) - std::exp(-lam[i] - m));
    }
    const double C = c.sum();
    Eigen::MatrixXd H = Eigen::MatrixXd(c.asDiagonal()) / C - s * s.transpose() / (C * C);
    return Deriv{-log_mean_cosh(lam), v.dot(H.ldlt().solve(v)) / t};
  };
  // Solve phi'_k(t) = mu for t in (l1_k, inf); returns t and dt/dmu.
  auto time_for = [&](std::size_t k, double mu, double& dt) {
    dt = 0.0;
    if (l1[k] == 0.0) return 0.0;
    double lo = l1[k], hi = 2.0 * l1[k];
    while (derivs(k, hi).d1 < mu) hi *= 2.0;
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const auto g = derivs(k, t);
      dt = 1.0 / g.d2;
      const double f = g.d1 - mu;
      (f < 0.0 ? lo : hi) = t;
      double nt = t - f / g.d2;
      if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
      if (std::abs(nt - t) <= 1e-15 * t || hi - lo <= 1e-15 * hi) {
        t = nt;
        break;
      }
      t = nt;
    }
    return t;
  };
  auto sum_times = [&](double mu, double& slope) {
    double s = 0.0;
    slope = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double dt;
      s += time_for(k, mu, dt);
      slope += dt;
    }
    return s;
  };
  // Sum of times increases from total l1 (mu -> -inf) to +inf (mu -> 0).
  double lo = -1.0, hi = 0.0, slope;
  while (sum_times(lo, slope) > 1.0) lo *= 2.0;
  double mu = 0.5 * lo;
  for (int it = 0; it < 200; ++it) {
    const double f = sum_times(mu, slope) - 1.0;
    (f > 0.0 ? hi : lo) = mu;
    double nm = mu - f / slope;
    if (!(nm > lo && nm < hi)) nm = 0.5 * (lo + hi);
    if (std::abs(nm - mu) <= 1e-15 * std::abs(mu) || hi - lo <= 1e-15 * std::abs(lo)) {
      mu = nm;
      break;
    }
    mu = nm;
  }
  double s = 0.0, dt;
  for (std::size_t k = 0; k < K; ++k) s += out.times[k] = time_for(k, mu, dt);
  for (std::size_t k = 0; k < K; ++k) {
    out.times[k] /= s;
    out.value += seg_value(k, out.times[k]);
  }
  return out;
}

}  // namespace polyrange
