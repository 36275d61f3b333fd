#pragma once

#include <openssl/evp.h>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrange/core/parallel.hpp"
#include "polyrange/core/rng.hpp"
#include "polyrange/environment.hpp"
#include "polyrange/limits.hpp"
#include "polyrange/params.hpp"
#include "polyrange/partition.hpp"
#include "polyrange/walk.hpp"

#ifndef POLYRANGE_VERSION
#define POLYRANGE_VERSION "0.1.0"
#endif

namespace polyrange {

inline constexpr const char* kCodeVersion = POLYRANGE_VERSION;

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitBudget = 3 };

// ---------------------------------------------------------------------------
// Exponent regression

struct ExponentFit {
  double exponent = 0.0;
  double intercept = 0.0;  // log c in value ~ c N^exponent
  double stderr_ = 0.0;
  std::vector<double> N_grid;
  std::string statistic;
  std::vector<double> residuals;  // log(value) - fit
  double chi2 = 0.0;
  bool weighted = false;
};

// Weighted least squares of log(value) on log N. Per-point error bars are
// converted to log scale (err / value). The slope error is the covariance
// estimate scaled by chi2 / (n - 2), so an exact power law has stderr 0.
inline ExponentFit fit_exponent(const std::vector<double>& N_grid, const std::vector<double>& values,
                                const std::vector<double>& errors, const std::string& statistic) {
  const std::size_t n = N_grid.size();
  if (values.size() != n) throw std::invalid_argument("fit_exponent: N_grid and values differ in length");
  if (!errors.empty() && errors.size() != n) throw std::invalid_argument("fit_exponent: errors differ in length");
  if (n < 4) throw std::invalid_argument("fit_exponent: need at least 4 grid points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(N_grid[i] > 0.0)) throw std::invalid_argument("fit_exponent: grid points must be positive");
    if (!(values[i] > 0.0)) {
      throw std::invalid_argument("fit_exponent: statistic '" + statistic + "' is nonpositive at N=" +
                                  std::to_string(static_cast<long long>(N_grid[i])));
    }
  }
  bool weighted = false;
  for (double e : errors) weighted = weighted || e > 0.0;
  std::vector<double> w(n, 1.0);
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(errors[i] > 0.0)) throw std::invalid_argument("fit_exponent: mixed zero and nonzero error bars");
      const double s = errors[i] / values[i];
      w[i] = 1.0 / (s * s);
    }
  }
  double S = 0, Sx = 0, Sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    S += w[i];
    Sx += w[i] * std::log(N_grid[i]);
    Sy += w[i] * std::log(values[i]);
  }
  const double mx = Sx / S, my = Sy / S;
  double Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(N_grid[i]) - mx;
    Sxx += w[i] * dx * dx;
    Sxy += w[i] * dx * (std::log(values[i]) - my);
  }
  if (!(Sxx > 0.0)) throw std::invalid_argument("fit_exponent: grid has a single distinct N");
  ExponentFit f;
  f.exponent = Sxy / Sxx;
  f.intercept = my - f.exponent * mx;
  f.N_grid = N_grid;
  f.statistic = statistic;
  f.weighted = weighted;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(values[i]) - (f.intercept + f.exponent * std::log(N_grid[i]));
    f.residuals.push_back(r);
    f.chi2 += w[i] * r * r;
  }
  f.stderr_ = std::sqrt(f.chi2 / static_cast<double>(n - 2) / Sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Estimators driven over N grids

struct QuantileEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t n_samples = 0;
};

// Median of M_N under the simple walk, with a standard error from the
// distribution-free order-statistic 95% interval.
inline QuantileEstimate median_max_displacement(int N, int d, std::size_t n_samples, std::uint64_t seed) {
  if (N < 1 || d < 1 || n_samples < 16) throw std::invalid_argument("median_max_displacement: need N, d >= 1 and n >= 16");
  std::vector<std::int64_t> m2(n_samples);
  const std::size_t chunks = std::min(kSampleChunks, n_samples);
  for_each_index(chunks, [&](std::size_t k) {
    Stream rng(seed, k);
    StepSource src(d);
    std::vector<int> x(static_cast<std::size_t>(d));
    for (std::size_t i = n_samples * k / chunks; i < n_samples * (k + 1) / chunks; ++i) {
      std::fill(x.begin(), x.end(), 0);
      std::int64_t n2 = 0, best = 0;
      for (int t = 0; t < N; ++t) {
        const int dir = src.next(rng);
        const int a = direction_axis(dir), s = direction_sign(dir);
        n2 += 2 * static_cast<std::int64_t>(s) * x[a] + 1;
        x[a] += s;
        best = std::max(best, n2);
      }
      m2[i] = best;
    }
  });
  std::sort(m2.begin(), m2.end());
  const double n = static_cast<double>(n_samples);
  auto at = [&](double idx) {
    const auto i = static_cast<std::size_t>(std::clamp(idx, 0.0, n - 1));
    return std::sqrt(static_cast<double>(m2[i]));
  };
  QuantileEstimate q;
  q.n_samples = n_samples;
  q.value = 0.5 * (at(std::floor((n - 1) / 2)) + at(std::ceil((n - 1) / 2)));
  const double half = 0.98 * std::sqrt(n);
  q.std_err = (at(std::ceil(n / 2 + half)) - at(std::floor(n / 2 - half))) / (2.0 * 1.96);
  return q;
}

// Displacement strata for the homogeneous estimator: integer radii spanning
// [rho/2, 3 rho] around the optimal confinement scale rho = (N/h)^{1/(d+2)}.
inline std::vector<double> homogeneous_strata(int N, int d, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("homogeneous_strata: h must be > 0");
  const double rho = std::pow(static_cast<double>(N) / h, 1.0 / (d + 2.0));
  const double lo = std::max(1.0, std::floor(rho / 2.0));
  const double hi = std::max(lo + 1.0, std::ceil(3.0 * rho));
  std::vector<double> r;
  for (double x = lo; x <= hi; x += 1.0) r.push_back(x);
  return r;
}

inline PartitionEstimate homogeneous_log_Z(int N, int d, double h, std::size_t n_per_stratum, std::uint64_t seed) {
  auto strata = homogeneous_strata(N, d, h);
  return partition_homogeneous_strata(N, d, h, strata.back(), strata, n_per_stratum, seed);
}

// ---------------------------------------------------------------------------
// Theorem-targeted scenarios

class RegionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline RegionReport require_region(const ModelParams& m, Region want, const char* who) {
  m.validate();
  const RegionReport rep = classify_region(m);
  if (rep.region != want) {
    std::string msg = std::string(who) + ": classify_region places (d=" + std::to_string(m.d) +
                      ", alpha=" + std::to_string(m.alpha) + ", zeta=" + std::to_string(m.zeta) +
                      ", gamma=" + std::to_string(m.gamma) + ") in " + to_string(rep.region) + ", not " +
                      to_string(want);
    if (rep.region == Region::R5Unsolved) {
      msg += "; this part of R5 lies below the line gamma = zeta + (d - alpha)/alpha where the scaling is "
             "only conjectured, so no theorem is tested";
    }
    throw RegionMismatch(msg);
  }
  return rep;
}

struct R6SeedResult {
  std::uint64_t seed = 0;
  double log_Z = 0.0;
  double scaled = 0.0;            // N^zeta log Z_N
  double scaled_two_site = 0.0;   // N^zeta log Z_N(|R_N| = 2), enumerated
  double scaled_two_site_closed = 0.0;
  double prob_two_site = 0.0;     // P_N(|R_N| = 2)
  double log_ratio_three_plus = 0.0;  // log Z_N(|R_N| >= 3) - log Z_N
};

struct R6Report {
  ModelParams m;
  int N = 0;
  double target = 0.0;             // -2 h_hat
  double finite_size_model = 0.0;  // N^zeta N log(2d)
  std::vector<R6SeedResult> seeds;
};

// Two-site closed form: the 2d bouncing paths, each of probability (2d)^{-N}.
inline double log_Z_two_site(const DisorderField& f, int d, int N, Coupling c) {
  Site o(static_cast<std::size_t>(d), 0);
  const double w0 = f.omega_at(o);
  LogSumExp s;
  for (int dir = 0; dir < 2 * d; ++dir) {
    Site e = o;
    e[direction_axis(dir)] += direction_sign(dir);
    s.add(c.beta * (w0 + f.omega_at(e)));
  }
  return -2.0 * c.h - N * std::log(2.0 * d) + s.value();
}

inline R6Report scenario_R6(const ModelParams& m, int N, const std::vector<std::uint64_t>& seeds,
                            double budget = kDefaultLeafBudget) {
  require_region(m, Region::R6, "scenario_R6");
  check_enumeration_budget(N, m.d, budget);
  R6Report r;
  r.m = m;
  r.N = N;
  r.target = -2.0 * m.h_hat;
  const double scale = std::pow(static_cast<double>(N), m.zeta);
  r.finite_size_model = scale * N * std::log(2.0 * m.d);
  const Coupling c = coupling_at(m, N);
  for (auto seed : seeds) {
    DisorderField f(seed, m.alpha, m.p);
    const auto v = exact_log_partitions(
        f, m.d, N,
        {{c, {}},
         {c, [](const PathStats& s) { return s.range_size == 2; }},
         {c, [](const PathStats& s) { return s.range_size >= 3; }}},
        budget);
    R6SeedResult s;
    s.seed = seed;
    s.log_Z = v[0];
    s.scaled = scale * v[0];
    s.scaled_two_site = scale * v[1];
    s.scaled_two_site_closed = scale * log_Z_two_site(f, m.d, N, c);
    s.prob_two_site = std::exp(v[1] - v[0]);
    s.log_ratio_three_plus = v[2] - v[0];
    r.seeds.push_back(s);
  }
  return r;
}

struct R5HomogeneousPoint {
  int N = 0;
  double log_Z = 0.0;
  double std_err = 0.0;  // of log Z
  double scaled = 0.0;   // -N^{2 xi - 1} log Z_N, compare with c_d(h_hat)
};

struct R5DisorderPoint {
  std::uint64_t seed = 0;
  double log_Z = 0.0;
  double log_Z_hom = 0.0;
  double rel_gap = 0.0;
};

struct R5Report {
  ModelParams m;
  TheoremTag tag = TheoremTag::R5a_1;
  double xi = 0.0;
  double c_d = 0.0;
  std::vector<R5HomogeneousPoint> homogeneous;
  std::optional<ExponentFit> fit;
  int N_enum = 0;
  std::vector<R5DisorderPoint> disordered;
};

inline R5Report scenario_R5(const ModelParams& m, const std::vector<int>& N_grid, std::size_t n_per_stratum,
                            std::uint64_t seed, int N_enum, const std::vector<std::uint64_t>& seeds,
                            double budget = kDefaultLeafBudget) {
  const RegionReport rep = require_region(m, Region::R5, "scenario_R5");
  R5Report r;
  r.m = m;
  r.tag = *rep.applicable_theorem;
  r.xi = *rep.xi;
  r.c_d = c_d_constant(m.d, m.h_hat);
  const double rho = 1.0 - 2.0 * r.xi;
  std::vector<double> Ns, vals, errs;
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    const int N = N_grid[i];
    const auto e = homogeneous_log_Z(N, m.d, m.h_N(N), n_per_stratum, mix64(seed + i));
    R5HomogeneousPoint p{N, e.log_value, e.std_err, -e.log_value / std::pow(static_cast<double>(N), rho)};
    r.homogeneous.push_back(p);
    Ns.push_back(N);
    vals.push_back(-e.log_value);
    errs.push_back(e.std_err);
  }
  if (Ns.size() >= 4) r.fit = fit_exponent(Ns, vals, errs, "-log Z_N (homogeneous)");
  if (N_enum > 0) {
    r.N_enum = N_enum;
    check_enumeration_budget(N_enum, m.d, budget);
    const Coupling c = coupling_at(m, N_enum);
    for (auto s : seeds) {
      DisorderField f(s, m.alpha, m.p);
      const auto v = exact_log_partitions(f, m.d, N_enum, {{c, {}}, {{0.0, c.h}, {}}}, budget);
      r.disordered.push_back({s, v[0], v[1], std::abs(v[0] - v[1]) / std::abs(v[1])});
    }
  }
  return r;
}

struct R4TrendPoint {
  int N = 0;
  std::uint64_t seed = 0;
  Method method = Method::exact;
  double log_Z = 0.0;
  double std_err = 0.0;
  ErrorScale err_scale = ErrorScale::linear;
  double scaled = 0.0;  // N^{zeta - 1} log Z_N, compare with -h_hat gamma_d
};

struct R4RangePoint {
  int N = 0;
  std::uint64_t seed = 0;
  double mean_abs_dev = 0.0;  // E_N | |R_N|/N - gamma_d |
};

struct LdpPoint {
  int N = 0;
  std::size_t n_walks = 0;
  double mean_range = 0.0;
  double frequency = 0.0;  // of |R_N| - mean <= -delta N
  double std_err = 0.0;
};

struct R4Report {
  ModelParams m;
  double gamma_d = 0.0;
  double target = 0.0;  // -h_hat gamma_d
  std::vector<R4TrendPoint> trend;
  std::vector<R4RangePoint> range;
  double delta = 0.0;
  std::vector<LdpPoint> ldp;
};

struct R4Options {
  std::vector<int> N_grid;
  std::vector<std::uint64_t> seeds{1};
  std::size_t n_samples = 100000;  // plain MC beyond the enumeration budget
  std::uint64_t mc_seed = 1;
  double delta = 0.1;
  std::vector<int> ldp_N_grid;
  std::size_t ldp_walks = 2000;
  double budget = kDefaultLeafBudget;
};

// Frequencies of the lower range deviation {|R_N| - mean <= -delta N}; the
// mean is the sample mean of the same ensemble.
inline LdpPoint range_ldp_frequency(int N, int d, double delta, std::size_t n_walks, std::uint64_t seed) {
  if (n_walks < 2) throw std::invalid_argument("range_ldp_frequency: need >= 2 walks");
  std::vector<std::size_t> sizes(n_walks);
  const std::size_t chunks = std::min(kSampleChunks, n_walks);
  for_each_index(chunks, [&](std::size_t k) {
    Stream rng(seed, k);
    StepSource src(d);
    WalkTracker w(d, static_cast<std::size_t>(N));
    for (std::size_t i = n_walks * k / chunks; i < n_walks * (k + 1) / chunks; ++i) {
      w.reset();
      for (int t = 0; t < N; ++t) w.step(src.next(rng));
      sizes[i] = w.range_size();
    }
  });
  LdpPoint p;
  p.N = N;
  p.n_walks = n_walks;
  double sum = 0.0;
  for (auto s : sizes) sum += static_cast<double>(s);
  p.mean_range = sum / static_cast<double>(n_walks);
  std::size_t hits = 0;
  for (auto s : sizes) hits += static_cast<double>(s) - p.mean_range <= -delta * N;
  p.frequency = static_cast<double>(hits) / static_cast<double>(n_walks);
  p.std_err = std::sqrt(p.frequency * (1.0 - p.frequency) / static_cast<double>(n_walks));
  return p;
}

inline R4Report scenario_R4(const ModelParams& m, const R4Options& opt) {
  require_region(m, Region::R4, "scenario_R4");
  if (m.d < 3) throw RegionMismatch("scenario_R4: gamma_d > 0 requires a transient walk (d >= 3)");
  R4Report r;
  r.m = m;
  r.gamma_d = 1.0 / green_function(m.d, Site(static_cast<std::size_t>(m.d), 0));
  r.target = -m.h_hat * r.gamma_d;
  r.delta = opt.delta;
  for (int N : opt.N_grid) {
    const bool exact = leaf_count(N, m.d) <= opt.budget;
    const double scale = std::pow(static_cast<double>(N), m.zeta - 1.0);
    for (auto s : opt.seeds) {
      DisorderField f(s, m.alpha, m.p);
      const auto e = exact ? partition_exact(f, m, N, {}, opt.budget) : partition_mc(f, m, N, opt.n_samples, opt.mc_seed);
      r.trend.push_back({N, s, e.method, e.log_value, e.std_err, e.err_scale, scale * e.log_value});
      if (exact) {
        const double g = r.gamma_d;
        auto obs = [g](const PathStats& st) { return std::abs(static_cast<double>(st.range_size) / st.N - g); };
        r.range.push_back({N, s, polymer_expectation(f, m, N, obs, Method::exact, {}, opt.budget).value});
      }
    }
  }
  for (std::size_t i = 0; i < opt.ldp_N_grid.size(); ++i) {
    r.ldp.push_back(range_ldp_frequency(opt.ldp_N_grid[i], m.d, opt.delta, opt.ldp_walks, mix64(opt.mc_seed + i)));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Configuration

class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> errs)
      : std::invalid_argument(join(errs)), errors_(std::move(errs)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "invalid configuration:";
    for (const auto& x : e) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> errors_;
};

inline const std::vector<std::string>& experiment_methods() {
  static const std::vector<std::string> names = {"partition",           "phase_scan",  "walk_exponent",
                                                 "homogeneous_exponent", "scenario_R4", "scenario_R5",
                                                 "scenario_R6"};
  return names;
}

struct ExperimentConfig {
  ModelParams model;
  std::string method = "partition";
  std::string estimator = "exact";  // partition: exact | plain_mc
  std::vector<int> N_grid;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t mc_seed = 1;
  std::size_t n_samples = 100000;
  std::size_t n_per_stratum = 4000;
  double zeta_range[2] = {-3.0, 2.0};
  double gamma_range[2] = {-1.0, 3.0};
  int grid = 50;
  double delta = 0.1;
  std::vector<int> ldp_N_grid;
  std::size_t ldp_walks = 2000;
  int N_enum = 0;
  double max_leaves = kDefaultLeafBudget;
  std::string out_dir = ".";
  std::string prefix = "experiment";
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const toml::table& t) : t_(t) {}

  template <class T>
  void num(const char* sec, const char* key, T& out, bool required) {
    const toml::node* n = t_.at_path(std::string(sec) + "." + key).node();
    if (!n) {
      if (required) errs.push_back(name(sec, key) + ": missing");
      return;
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (auto v = n->value<double>()) {
        out = *v;
        return;
      }
      errs.push_back(name(sec, key) + ": must be a number");
    } else {
      auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer()) {
        errs.push_back(name(sec, key) + ": must be an integer");
      } else if (*v < 0 && std::is_unsigned_v<T>) {
        errs.push_back(name(sec, key) + ": must be >= 0");
      } else {
        out = static_cast<T>(*v);
      }
    }
  }

  void str(const char* sec, const char* key, std::string& out, bool required) {
    const toml::node* n = t_.at_path(std::string(sec) + "." + key).node();
    if (!n) {
      if (required) errs.push_back(name(sec, key) + ": missing");
      return;
    }
    if (auto v = n->value<std::string>()) {
      out = *v;
    } else {
      errs.push_back(name(sec, key) + ": must be a string");
    }
  }

  template <class T>
  void list(const char* sec, const char* key, std::vector<T>& out, bool required) {
    const toml::node* n = t_.at_path(std::string(sec) + "." + key).node();
    if (!n) {
      if (required) errs.push_back(name(sec, key) + ": missing");
      return;
    }
    const toml::array* a = n->as_array();
    if (!a) {
      errs.push_back(name(sec, key) + ": must be an array");
      return;
    }
    std::vector<T> v;
    for (const auto& el : *a) {
      if constexpr (std::is_floating_point_v<T>) {
        auto x = el.value<double>();
        if (!x) return errs.push_back(name(sec, key) + ": entries must be numbers");
        v.push_back(*x);
      } else {
        auto x = el.value<std::int64_t>();
        if (!x || !el.is_integer() || *x < 0) return errs.push_back(name(sec, key) + ": entries must be integers >= 0");
        v.push_back(static_cast<T>(*x));
      }
    }
    out = std::move(v);
  }

  std::vector<std::string> errs;

 private:
  static std::string name(const char* sec, const char* key) { return std::string(sec) + "." + key; }
  const toml::table& t_;
};

}  // namespace detail

inline ExperimentConfig parse_config_table(const toml::table& t) {
  detail::ConfigReader r(t);
  ExperimentConfig c;
  for (const char* sec : {"model", "method"}) {
    if (!t.contains(sec)) r.errs.push_back(std::string(sec) + ": missing section");
  }
  r.str("method", "name", c.method, true);
  const bool known = std::find(experiment_methods().begin(), experiment_methods().end(), c.method) !=
                     experiment_methods().end();
  if (!known) r.errs.push_back("method.name: unknown method '" + c.method + "'");
  const bool scan = c.method == "phase_scan";
  const bool walk_only = c.method == "walk_exponent";

  ModelParams& m = c.model;
  r.num("model", "d", m.d, true);
  r.num("model", "alpha", m.alpha, !walk_only);
  r.num("model", "p", m.p, false);
  m.q = 1.0 - m.p;
  r.num("model", "q", m.q, false);
  r.num("model", "beta_hat", m.beta_hat, false);
  r.num("model", "h_hat", m.h_hat, false);
  r.num("model", "gamma", m.gamma, !scan && !walk_only);
  r.num("model", "zeta", m.zeta, !scan && !walk_only);

  r.str("method", "estimator", c.estimator, false);
  r.list("method", "N_grid", c.N_grid, !scan);
  r.list("method", "seeds", c.seeds, false);
  r.num("method", "mc_seed", c.mc_seed, false);
  r.num("method", "n_samples", c.n_samples, false);
  r.num("method", "n_per_stratum", c.n_per_stratum, false);
  std::vector<double> zr, gr;
  r.list("method", "zeta_range", zr, false);
  r.list("method", "gamma_range", gr, false);
  r.num("method", "grid", c.grid, false);
  r.num("method", "delta", c.delta, false);
  r.list("method", "ldp_N_grid", c.ldp_N_grid, false);
  r.num("method", "ldp_walks", c.ldp_walks, false);
  r.num("method", "N_enum", c.N_enum, false);
  r.num("budgets", "max_leaves", c.max_leaves, false);
  r.num("budgets", "n_samples", c.n_samples, false);
  r.num("budgets", "n_per_stratum", c.n_per_stratum, false);
  r.str("output", "dir", c.out_dir, false);
  r.str("output", "prefix", c.prefix, false);

  auto& e = r.errs;
  for (const auto& p : m.problems()) {
    if (walk_only && (p.rfind("alpha", 0) == 0 || p.rfind("gamma", 0) == 0 || p.rfind("zeta", 0) == 0)) continue;
    e.push_back("model." + p);
  }
  if (c.estimator != "exact" && c.estimator != "plain_mc") e.push_back("method.estimator: must be exact or plain_mc");
  for (int N : c.N_grid) {
    if (N < 1) e.push_back("method.N_grid: entries must be >= 1");
  }
  for (int N : c.ldp_N_grid) {
    if (N < 1) e.push_back("method.ldp_N_grid: entries must be >= 1");
  }
  if (c.seeds.empty()) e.push_back("method.seeds: must not be empty");
  if (c.n_samples < 2) e.push_back("budgets.n_samples: must be >= 2");
  if (c.n_per_stratum < 2) e.push_back("budgets.n_per_stratum: must be >= 2");
  if (c.ldp_walks < 2) e.push_back("method.ldp_walks: must be >= 2");
  if (!(c.max_leaves >= 1.0)) e.push_back("budgets.max_leaves: must be >= 1");
  if (!(c.delta > 0.0)) e.push_back("method.delta: must be > 0");
  if (c.grid < 2) e.push_back("method.grid: must be >= 2");
  auto range2 = [&](const std::vector<double>& v, double* out, const char* key) {
    if (v.empty()) return;
    if (v.size() != 2 || !(v[0] < v[1])) {
      e.push_back(std::string("method.") + key + ": must be [lo, hi] with lo < hi");
      return;
    }
    out[0] = v[0];
    out[1] = v[1];
  };
  range2(zr, c.zeta_range, "zeta_range");
  range2(gr, c.gamma_range, "gamma_range");
  if ((c.method == "walk_exponent" || c.method == "homogeneous_exponent") && c.N_grid.size() < 4) {
    e.push_back("method.N_grid: exponent fits need at least 4 grid points");
  }
  if (c.prefix.empty() || c.prefix.find('/') != std::string::npos) e.push_back("output.prefix: must be a plain file stem");
  if (!e.empty()) throw ValidationError(e);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  try {
    return parse_config_table(toml::parse(text));
  } catch (const toml::parse_error& err) {
    std::ostringstream os;
    os << "toml: " << err.description() << " at line " << err.source().begin.line;
    throw ValidationError({os.str()});
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({"config: cannot open '" + path + "'"});
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline ExperimentConfig parse_config_file(const std::string& path) { return parse_config_string(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Outputs and manifest

using Json = nlohmann::ordered_json;

// Round-trip formatting; identical doubles always print identically.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

struct OutputFile {
  std::string path;
  std::string sha256;
};

struct ExperimentManifest {
  Json config;
  std::vector<std::uint64_t> seeds;
  std::string code_version = kCodeVersion;
  std::vector<OutputFile> outputs;
  double wall_time = 0.0;
};

inline Json to_json(const ModelParams& m) {
  return Json{{"d", m.d},       {"alpha", m.alpha}, {"p", m.p},         {"q", m.q},
              {"beta_hat", m.beta_hat}, {"gamma", m.gamma}, {"h_hat", m.h_hat}, {"zeta", m.zeta}};
}

inline Json to_json(const ExperimentConfig& c) {
  return Json{{"model", to_json(c.model)},
              {"method",
               {{"name", c.method},
                {"estimator", c.estimator},
                {"N_grid", c.N_grid},
                {"seeds", c.seeds},
                {"mc_seed", c.mc_seed},
                {"zeta_range", {c.zeta_range[0], c.zeta_range[1]}},
                {"gamma_range", {c.gamma_range[0], c.gamma_range[1]}},
                {"grid", c.grid},
                {"delta", c.delta},
                {"ldp_N_grid", c.ldp_N_grid},
                {"ldp_walks", c.ldp_walks},
                {"N_enum", c.N_enum}}},
              {"budgets", {{"max_leaves", c.max_leaves}, {"n_samples", c.n_samples}, {"n_per_stratum", c.n_per_stratum}}},
              {"output", {{"dir", c.out_dir}, {"prefix", c.prefix}}}};
}

inline Json to_json(const ExponentFit& f) {
  return Json{{"statistic", f.statistic}, {"exponent", f.exponent}, {"intercept", f.intercept},
              {"stderr", f.stderr_},      {"N_grid", f.N_grid},     {"residuals", f.residuals},
              {"chi2", f.chi2},           {"weighted", f.weighted}};
}

inline Json to_json(const ExperimentManifest& mf) {
  Json outs = Json::array();
  for (const auto& o : mf.outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
  return Json{{"config", mf.config},   {"seeds", mf.seeds},         {"code_version", mf.code_version},
              {"outputs", outs},       {"wall_time", mf.wall_time}};
}

// Long-format CSV: one row per (N, seed, statistic).
class CsvRows {
 public:
  void add(long long N, std::optional<std::uint64_t> seed, const std::string& stat, double value, double err) {
    os_ << N << ',' << (seed ? std::to_string(*seed) : "") << ',' << stat << ',' << format_double(value) << ','
        << format_double(err) << '\n';
  }
  std::string str() const { return "N,seed,statistic,value,std_err\n" + os_.str(); }

 private:
  std::ostringstream os_;
};

struct ExperimentOutput {
  std::string csv;
  Json summary;
};

inline std::string phase_scan_csv(int d, double alpha, const double zr[2], const double gr[2], int grid) {
  std::ostringstream os;
  os << "zeta,gamma,region,xi,theorem_tag\n";
  ModelParams m;
  m.d = d;
  m.alpha = alpha;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      m.zeta = zr[0] + (zr[1] - zr[0]) * i / (grid - 1);
      m.gamma = gr[0] + (gr[1] - gr[0]) * j / (grid - 1);
      const auto rep = classify_region(m);
      os << format_double(m.zeta) << ',' << format_double(m.gamma) << ',' << to_string(rep.region) << ','
         << (rep.xi ? format_double(*rep.xi) : "") << ','
         << (rep.applicable_theorem ? to_string(*rep.applicable_theorem) : "") << '\n';
    }
  }
  return os.str();
}

inline ExperimentOutput compute_experiment(const ExperimentConfig& c) {
  ExperimentOutput out;
  CsvRows rows;
  Json& s = out.summary;
  s["method"] = c.method;
  const ModelParams& m = c.model;
  const int d = m.d;

  if (c.method == "phase_scan") {
    out.csv = phase_scan_csv(d, m.alpha, c.zeta_range, c.gamma_range, c.grid);
    s["grid"] = c.grid;
    return out;
  }
  if (c.method == "partition") {
    for (int N : c.N_grid) {
      for (auto seed : c.seeds) {
        DisorderField f(seed, m.alpha, m.p);
        const auto e = c.estimator == "exact" ? partition_exact(f, m, N, {}, c.max_leaves)
                                              : partition_mc(f, m, N, c.n_samples, c.mc_seed);
        rows.add(N, seed, "log Z_N", e.log_value, e.std_err);
        s["points"].push_back({{"N", N},
                               {"seed", seed},
                               {"log_value", e.log_value},
                               {"std_err", e.std_err},
                               {"err_scale", to_string(e.err_scale)},
                               {"method", to_string(e.method)},
                               {"n_samples", e.n_samples}});
      }
    }
  } else if (c.method == "walk_exponent") {
    std::vector<double> Ns, v, e;
    for (std::size_t i = 0; i < c.N_grid.size(); ++i) {
      const auto q = median_max_displacement(c.N_grid[i], d, c.n_samples, mix64(c.mc_seed + i));
      rows.add(c.N_grid[i], std::nullopt, "median M_N", q.value, q.std_err);
      Ns.push_back(c.N_grid[i]);
      v.push_back(q.value);
      e.push_back(q.std_err);
    }
    s["fit"] = to_json(fit_exponent(Ns, v, e, "median M_N under P_N"));
    s["target"] = 0.5;
  } else if (c.method == "homogeneous_exponent") {
    std::vector<double> Ns, v, e;
    for (std::size_t i = 0; i < c.N_grid.size(); ++i) {
      const int N = c.N_grid[i];
      const auto est = homogeneous_log_Z(N, d, m.h_N(N), c.n_per_stratum, mix64(c.mc_seed + i));
      rows.add(N, std::nullopt, "-log Z_N", -est.log_value, est.std_err);
      Ns.push_back(N);
      v.push_back(-est.log_value);
      e.push_back(est.std_err);
    }
    s["fit"] = to_json(fit_exponent(Ns, v, e, "-log Z_N (homogeneous)"));
    s["target"] = d / (d + 2.0);
  } else if (c.method == "scenario_R6") {
    s["reports"] = Json::array();
    for (int N : c.N_grid) {
      const auto r = scenario_R6(m, N, c.seeds, c.max_leaves);
      Json rep{{"N", N}, {"target", r.target}, {"finite_size_model", r.finite_size_model}};
      for (const auto& x : r.seeds) {
        rows.add(N, x.seed, "N^zeta log Z_N", x.scaled, 0.0);
        rows.add(N, x.seed, "N^zeta log Z_N(|R_N|=2)", x.scaled_two_site, 0.0);
        rows.add(N, x.seed, "P_N(|R_N|=2)", x.prob_two_site, 0.0);
        rows.add(N, x.seed, "log Z_N(|R_N|>=3)/Z_N", x.log_ratio_three_plus, 0.0);
        rep["seeds"].push_back({{"seed", x.seed},
                                {"scaled", x.scaled},
                                {"scaled_two_site", x.scaled_two_site},
                                {"scaled_two_site_closed", x.scaled_two_site_closed},
                                {"prob_two_site", x.prob_two_site},
                                {"log_ratio_three_plus", x.log_ratio_three_plus}});
      }
      s["reports"].push_back(rep);
    }
  } else if (c.method == "scenario_R5") {
    const auto r = scenario_R5(m, c.N_grid, c.n_per_stratum, c.mc_seed, c.N_enum, c.seeds, c.max_leaves);
    s["theorem"] = to_string(r.tag);
    s["xi"] = r.xi;
    s["c_d"] = r.c_d;
    for (const auto& p : r.homogeneous) {
      rows.add(p.N, std::nullopt, "-N^{2xi-1} log Z_N (homogeneous)", p.scaled,
               p.std_err / std::pow(static_cast<double>(p.N), 1.0 - 2.0 * r.xi));
      s["homogeneous"].push_back({{"N", p.N}, {"log_Z", p.log_Z}, {"std_err", p.std_err}, {"scaled", p.scaled}});
    }
    if (r.fit) s["fit"] = to_json(*r.fit);
    for (const auto& p : r.disordered) {
      rows.add(r.N_enum, p.seed, "log Z_N", p.log_Z, 0.0);
      rows.add(r.N_enum, p.seed, "log Z_N (homogeneous)", p.log_Z_hom, 0.0);
      s["disordered"].push_back(
          {{"N", r.N_enum}, {"seed", p.seed}, {"log_Z", p.log_Z}, {"log_Z_hom", p.log_Z_hom}, {"rel_gap", p.rel_gap}});
    }
  } else if (c.method == "scenario_R4") {
    R4Options o;
    o.N_grid = c.N_grid;
    o.seeds = c.seeds;
    o.n_samples = c.n_samples;
    o.mc_seed = c.mc_seed;
    o.delta = c.delta;
    o.ldp_N_grid = c.ldp_N_grid;
    o.ldp_walks = c.ldp_walks;
    o.budget = c.max_leaves;
    const auto r = scenario_R4(m, o);
    s["gamma_d"] = r.gamma_d;
    s["target"] = r.target;
    for (const auto& p : r.trend) {
      rows.add(p.N, p.seed, "N^{zeta-1} log Z_N", p.scaled, 0.0);
      s["trend"].push_back({{"N", p.N},
                            {"seed", p.seed},
                            {"method", to_string(p.method)},
                            {"log_Z", p.log_Z},
                            {"std_err", p.std_err},
                            {"err_scale", to_string(p.err_scale)},
                            {"scaled", p.scaled}});
    }
    for (const auto& p : r.range) {
      rows.add(p.N, p.seed, "E_N| |R_N|/N - gamma_d |", p.mean_abs_dev, 0.0);
      s["range"].push_back({{"N", p.N}, {"seed", p.seed}, {"mean_abs_dev", p.mean_abs_dev}});
    }
    s["delta"] = r.delta;
    for (const auto& p : r.ldp) {
      rows.add(p.N, std::nullopt, "P(|R_N| - E|R_N| <= -delta N)", p.frequency, p.std_err);
      s["ldp"].push_back({{"N", p.N}, {"n_walks", p.n_walks}, {"mean_range", p.mean_range}, {"frequency", p.frequency},
                          {"std_err", p.std_err}});
    }
  }
  out.csv = rows.str();
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << bytes;
}

// Writes <prefix>.csv, <prefix>_summary.json and <prefix>_manifest.json under
// the output directory. Everything except the manifest's wall_time is a pure
// function of the configuration.
inline ExperimentManifest run_experiment(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentOutput out = compute_experiment(c);
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  ExperimentManifest mf;
  mf.config = to_json(c);
  mf.seeds = c.seeds;
  if (std::find(mf.seeds.begin(), mf.seeds.end(), c.mc_seed) == mf.seeds.end()) mf.seeds.push_back(c.mc_seed);
  auto emit = [&](const std::string& name, const std::string& bytes) {
    write_file(dir / name, bytes);
    mf.outputs.push_back({name, sha256_hex(bytes)});
  };
  emit(c.prefix + ".csv", out.csv);
  emit(c.prefix + "_summary.json", out.summary.dump(2) + "\n");
  mf.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(dir / (c.prefix + "_manifest.json"), to_json(mf).dump(2) + "\n");
  return mf;
}

inline ExperimentManifest run_experiment(const std::string& config_path) {
  return run_experiment(parse_config_file(config_path));
}

}  // namespace polyrange
