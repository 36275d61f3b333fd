#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrange/core/logsum.hpp"
#include "polyrange/core/parallel.hpp"
#include "polyrange/core/rng.hpp"
#include "polyrange/environment.hpp"
#include "polyrange/params.hpp"
#include "polyrange/walk.hpp"

namespace polyrange {

enum class Method { exact, plain_mc, confined_strata, mcmc };
enum class ErrorScale { linear, log };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::exact: return "exact";
    case Method::plain_mc: return "plain_mc";
    case Method::confined_strata: return "confined_strata";
    case Method::mcmc: return "mcmc";
  }
  return "?";
}

inline std::string to_string(ErrorScale s) { return s == ErrorScale::linear ? "linear" : "log"; }

struct PartitionEstimate {
  double log_value = 0.0;
  // Linear scale: standard error of Z itself. Log scale: standard error of
  // log Z (equivalently, relative error of Z).
  double std_err = 0.0;
  ErrorScale err_scale = ErrorScale::linear;
  std::size_t n_samples = 0;
  Method method = Method::exact;
  double truncation_bound = 0.0;
};

// Raw coupling constants (beta_N, h_N) at a fixed N.
struct Coupling {
  double beta = 0.0;
  double h = 0.0;
};

inline Coupling coupling_at(const ModelParams& m, int N) { return {m.beta_N(N), m.h_N(N)}; }

// Path summary passed to events and observables.
struct PathStats {
  int d = 2;
  int N = 0;
  std::size_t range_size = 1;
  double max_disp = 0.0;
  double energy = 0.0;  // sum of omega over the range
  const std::uint8_t* steps = nullptr;
};

using PathEvent = std::function<bool(const PathStats&)>;
using Observable = std::function<double(const PathStats&)>;

inline PathStats stats_of(const LeafView& v) {
  return {v.d, v.N, v.range_size, v.max_disp(), v.site_sum, v.steps};
}

inline void check_field_matches(const DisorderField& f, const ModelParams& m) {
  if (std::abs(f.alpha() - m.alpha) > 1e-12 || std::abs(f.p() - m.p) > 1e-12) {
    throw std::invalid_argument("disorder field (alpha, p) does not match the model parameters");
  }
}

// One exact log Z_N(event) per query, all from a single enumeration pass.
struct WeightQuery {
  Coupling c;
  PathEvent event;  // empty: all paths
};

inline std::vector<double> exact_log_partitions(const DisorderField& f, int d, int N,
                                                const std::vector<WeightQuery>& queries,
                                                double budget = kDefaultLeafBudget) {
  struct Acc {
    const std::vector<WeightQuery>* q;
    std::vector<LogSumExp> sums;
    void operator()(const LeafView& v) {
      const PathStats st = stats_of(v);
      for (std::size_t i = 0; i < q->size(); ++i) {
        const auto& w = (*q)[i];
        if (w.event && !w.event(st)) continue;
        sums[i].add(w.c.beta * v.site_sum - w.c.h * static_cast<double>(v.range_size) + v.log_prob);
      }
    }
  };
  auto branches = enumerate_paths_branched(
      N, d, [&] { return Acc{&queries, std::vector<LogSumExp>(queries.size())}; },
      [&f, d](const int* x) { return f.omega(x, d); }, budget);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::vector<LogSumExp> parts;
    for (auto& b : branches) parts.push_back(b.sums[i]);
    out[i] = pairwise_reduce(parts, [](LogSumExp& a, const LogSumExp& b) { a.merge(b); }).value();
  }
  return out;
}

inline PartitionEstimate partition_exact(const DisorderField& f, const ModelParams& m, int N,
                                         const PathEvent& event = {}, double budget = kDefaultLeafBudget) {
  m.validate();
  check_field_matches(f, m);
  PartitionEstimate e;
  e.log_value = exact_log_partitions(f, m.d, N, {{coupling_at(m, N), event}}, budget)[0];
  e.n_samples = static_cast<std::size_t>(leaf_count(N, m.d));
  e.method = Method::exact;
  return e;
}

// Energy of a sampled path.
inline double range_energy(const DisorderField& f, const PathSample& s) {
  double e = 0.0;
  for (const auto& x : s.range.sites()) e += f.omega(x.data(), s.d);
  return e;
}

inline constexpr std::size_t kSampleChunks = 64;

// Plain Monte Carlo over simulated walks. Samples are split into fixed
// chunks with their own streams, so the estimate is worker-count independent.
inline PartitionEstimate partition_mc(const DisorderField& f, const ModelParams& m, int N, std::size_t n_samples,
                                      std::uint64_t seed, const PathEvent& event = {}) {
  m.validate();
  check_field_matches(f, m);
  if (n_samples < 2) throw std::invalid_argument("partition_mc: n_samples must be >= 2");
  const Coupling c = coupling_at(m, N);
  const int d = m.d;
  const std::size_t chunks = std::min(kSampleChunks, n_samples);
  std::vector<WeightMoments> parts(chunks);
  for_each_index(chunks, [&](std::size_t k) {
    Stream rng(seed, k);
    StepSource src(d);
    WalkTracker w(d, static_cast<std::size_t>(N));
    std::vector<std::uint8_t> steps(static_cast<std::size_t>(N));
    const std::size_t lo = n_samples * k / chunks, hi = n_samples * (k + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      w.reset();
      double energy = f.omega(w.position().data(), d);
      for (int t = 0; t < N; ++t) {
        const int dir = src.next(rng);
        steps[t] = static_cast<std::uint8_t>(dir);
        if (w.step(dir)) energy += f.omega(w.position().data(), d);
      }
      PathStats st{d, N, w.range_size(), std::sqrt(static_cast<double>(w.max_norm2())), energy, steps.data()};
      if (event && !event(st)) {
        parts[k].add(kNegInf);
      } else {
        parts[k].add(c.beta * energy - c.h * static_cast<double>(st.range_size));
      }
    }
  });
  WeightMoments all = pairwise_reduce(parts, [](WeightMoments& a, const WeightMoments& b) { a.merge(b); });
  PartitionEstimate e;
  e.method = Method::plain_mc;
  e.n_samples = n_samples;
  e.log_value = all.log_mean();
  const double lse = all.log_std_err();
  if (lse == kNegInf) {
    e.std_err = 0.0;
  } else if (lse < 700.0) {
    e.std_err = std::exp(lse);
  } else {
    e.std_err = std::exp(lse - e.log_value);
    e.err_scale = ErrorScale::log;
  }
  return e;
}

// Geometric radii with ratio 1.5 from ceil(N^{1/(d+2)}) up to R_max.
inline std::vector<double> default_strata(int N, int d, double R_max) {
  std::vector<double> r;
  double x = std::max(1.0, std::ceil(std::pow(static_cast<double>(N), 1.0 / (d + 2.0))));
  while (x < R_max) {
    r.push_back(x);
    x *= 1.5;
  }
  r.push_back(R_max);
  return r;
}

// Homogeneous partition function E[exp(-h |R_N|)] summed over displacement
// shells R_{i-1} < M_N <= R_i, each sampled exactly by the confined sampler.
inline PartitionEstimate partition_homogeneous_strata(int N, int d, double h, double R_max, std::vector<double> strata,
                                                      std::size_t n_per_stratum, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("partition_homogeneous_strata: N must be >= 1");
  if (!(h >= 0.0)) throw std::invalid_argument("partition_homogeneous_strata: h must be >= 0");
  if (!(R_max >= 1.0)) throw std::invalid_argument("partition_homogeneous_strata: R_max must be >= 1");
  if (n_per_stratum < 2) throw std::invalid_argument("partition_homogeneous_strata: need >= 2 samples per stratum");
  if (strata.empty()) strata = default_strata(N, d, R_max);
  for (std::size_t i = 0; i < strata.size(); ++i) {
    if (strata[i] < 1.0) throw std::invalid_argument("partition_homogeneous_strata: radii must be >= 1");
    if (i && strata[i] <= strata[i - 1]) throw std::invalid_argument("partition_homogeneous_strata: radii must increase");
  }
  if (std::abs(strata.back() - R_max) > 1e-12) {
    throw std::invalid_argument("partition_homogeneous_strata: last radius must equal R_max");
  }

  struct Part {
    double log_p = kNegInf;
    WeightMoments w;
  };
  std::vector<Part> parts(strata.size());
  for_each_index(strata.size(), [&](std::size_t i) {
    const double inner = i == 0 ? -1.0 : strata[i - 1];
    ConfinedSampler sampler(N, d, strata[i], inner);
    parts[i].log_p = sampler.log_prob();
    if (parts[i].log_p == kNegInf) return;
    Stream rng(seed, i);
    for (std::size_t k = 0; k < n_per_stratum; ++k) {
      PathSample s = sampler.sample(rng);
      parts[i].w.add(-h * static_cast<double>(s.range_size));
    }
  });

  // Z = sum_i P_i mean_i; variance sum_i P_i^2 var_i / n, all on a log shift.
  LogSumExp total;
  LogSumExp var_total;
  for (const auto& p : parts) {
    if (p.log_p == kNegInf) continue;
    total.add(p.log_p + p.w.log_mean());
    const double lse = p.w.log_std_err();
    if (lse != kNegInf) var_total.add(2.0 * (p.log_p + lse));
  }
  PartitionEstimate e;
  e.method = Method::confined_strata;
  e.n_samples = n_per_stratum * strata.size();
  e.log_value = total.value();
  const double lv = var_total.value();
  e.err_scale = ErrorScale::log;
  e.std_err = lv == kNegInf ? 0.0 : std::exp(0.5 * lv - e.log_value);
  e.truncation_bound = R_max >= N ? 0.0 : std::exp(-h * std::ceil(R_max));
  return e;
}

namespace detail {

// Integral of y^j * alpha * y^{-alpha-1} over [a, b].
inline double pareto_power_integral(double alpha, int j, double a, double b) {
  if (!(b > a)) return 0.0;
  const double e = j - alpha;
  if (std::abs(e) < 1e-14) return alpha * (std::log(b) - std::log(a));
  return alpha * (std::pow(b, e) - std::pow(a, e)) / e;
}

}  // namespace detail

struct TruncatedMoments {
  double m1;
  double m2;
};

// Moments of omega * 1{|omega| <= k} under the centred exact-Pareto law.
inline TruncatedMoments truncated_moments(double alpha, double p, double q, double k) {
  const double c = alpha > 1.0 ? (p - q) * alpha / (alpha - 1.0) : 0.0;
  // Positive branch omega = y - c, negative branch omega = -y - c, y >= 1.
  const double pa = std::max(1.0, c - k), pb = c + k;
  const double na = std::max(1.0, -k - c), nb = k - c;
  auto P = [&](int j, double a, double b) { return detail::pareto_power_integral(alpha, j, a, b); };
  const double m1 = p * (P(1, pa, pb) - c * P(0, pa, pb)) + q * (-P(1, na, nb) - c * P(0, na, nb));
  const double m2 = p * (P(2, pa, pb) - 2 * c * P(1, pa, pb) + c * c * P(0, pa, pb)) +
                    q * (P(2, na, nb) + 2 * c * P(1, na, nb) + c * c * P(0, na, nb));
  return {m1, m2};
}

inline constexpr double kSeriesThreshold = 1e-2;

// log E[exp(beta * omega * 1{|omega| <= k})].
inline double truncated_log_mgf(double alpha, double p, double q, double beta, double k) {
  if (!(alpha > 0.0)) throw std::invalid_argument("truncated_log_mgf: alpha must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("truncated_log_mgf: beta must be >= 0");
  if (!(k >= 1.0)) throw std::invalid_argument("truncated_log_mgf: k must be >= 1");
  if (beta == 0.0) return 0.0;
  if (beta * k > 700.0) throw std::overflow_error("truncated_log_mgf: beta * k exceeds the floating-point range");
  if (beta * k <= kSeriesThreshold) {
    const auto m = truncated_moments(alpha, p, q, k);
    return beta * m.m1 + 0.5 * beta * beta * (m.m2 - m.m1 * m.m1);
  }
  const double c = alpha > 1.0 ? (p - q) * alpha / (alpha - 1.0) : 0.0;
  // E[e^{beta w~}] = 1 + integral over |omega| <= k of (e^{beta omega} - 1) dF,
  // integrated in s = log y with dF = alpha e^{-alpha s} ds.
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto branch = [&](double weight, double sign, double a, double b) {
    if (!(b > a)) return 0.0;
    auto f = [&](double s) {
      const double y = std::exp(s);
      return alpha * std::exp(-alpha * s) * std::expm1(beta * (sign * y - c));
    };
    return weight * GK::integrate(f, std::log(a), std::log(b), 15, 1e-13);
  };
  const double I = branch(p, 1.0, std::max(1.0, c - k), c + k) + branch(q, -1.0, std::max(1.0, -k - c), k - c);
  return std::log1p(I);
}

struct HolderReport {
  double eps = 0.0;
  double log_Z = 0.0;
  double log_Z_hom_plus = 0.0;   // beta = 0, field (1 + eps) h
  double log_Z_dis_plus = 0.0;   // h = 0, coupling (1 + eps) / eps * beta
  double log_Z_hom_minus = 0.0;  // beta = 0, field (1 - eps) h
  double log_Z_dis_minus = 0.0;  // h = 0, coupling -(1 - eps) / eps * beta
  double upper_slack = 0.0;
  double lower_slack = 0.0;
  bool holds = false;
};

inline constexpr double kHolderSlackFloor = -1e-10;

// Both Holder bounds on Z_N from one exact enumeration. Slacks use the
// un-divided forms
//   upper: log Z_hom(+)/(1+e) + e/(1+e) log Z_dis(+) - log Z
//   lower: (1-e) log Z + e log Z_dis(-) - log Z_hom(-)
// so the lower bound is also defined at e = 1, where it reads 0 >= 0.
inline HolderReport holder_sandwich_check(const DisorderField& f, const ModelParams& m, int N, double eps,
                                          double budget = kDefaultLeafBudget) {
  m.validate();
  check_field_matches(f, m);
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("holder_sandwich_check: eps must lie in (0, 1]");
  const Coupling c = coupling_at(m, N);
  std::vector<WeightQuery> q = {
      {c, {}},
      {{0.0, (1.0 + eps) * c.h}, {}},
      {{(1.0 + eps) / eps * c.beta, 0.0}, {}},
      {{0.0, (1.0 - eps) * c.h}, {}},
      {{-(1.0 - eps) / eps * c.beta, 0.0}, {}},
  };
  const auto v = exact_log_partitions(f, m.d, N, q, budget);
  HolderReport r;
  r.eps = eps;
  r.log_Z = v[0];
  r.log_Z_hom_plus = v[1];
  r.log_Z_dis_plus = v[2];
  r.log_Z_hom_minus = v[3];
  r.log_Z_dis_minus = v[4];
  r.upper_slack = v[1] / (1.0 + eps) + eps / (1.0 + eps) * v[2] - v[0];
  r.lower_slack = (1.0 - eps) * v[0] + eps * v[4] - v[3];
  r.holds = r.upper_slack >= kHolderSlackFloor && r.lower_slack >= kHolderSlackFloor;
  return r;
}

struct McmcOptions {
  int chains = 4;
  std::size_t sweeps = 2000;  // one sweep = N proposals
  double burn_in_fraction = 0.2;
  std::size_t batches = 20;
  std::uint64_t seed = 1;
};

struct Expectation {
  double value = 0.0;
  double std_err = 0.0;
  Method method = Method::exact;
  bool converged = true;
  std::vector<double> chain_means;
  double between_chain_sd = 0.0;
  double pooled_se = 0.0;
};

namespace detail {

struct McmcState {
  std::vector<std::uint8_t> steps;
  PathStats stats;
  double log_target = 0.0;
};

inline void evaluate_path(const DisorderField& f, int d, Coupling c, PackedKeySet& seen, McmcState& s) {
  seen.clear();
  Site x(static_cast<std::size_t>(d), 0);
  std::int64_t n2 = 0, max_n2 = 0;
  double energy = 0.0;
  SiteSet fallback(d);
  auto visit = [&] {
    bool fresh = d <= kMaxPackedDim ? seen.insert(pack_site(x.data(), d)) : fallback.insert(x);
    if (fresh) energy += f.omega(x.data(), d);
  };
  visit();
  for (auto dir : s.steps) {
    const int a = direction_axis(dir), sg = direction_sign(dir);
    n2 += 2 * static_cast<std::int64_t>(sg) * x[a] + 1;
    x[a] += sg;
    max_n2 = std::max(max_n2, n2);
    visit();
  }
  s.stats.d = d;
  s.stats.N = static_cast<int>(s.steps.size());
  s.stats.range_size = d <= kMaxPackedDim ? seen.size() : fallback.size();
  s.stats.max_disp = std::sqrt(static_cast<double>(max_n2));
  s.stats.energy = energy;
  s.stats.steps = s.steps.data();
  s.log_target = c.beta * energy - c.h * static_cast<double>(s.stats.range_size);
}

}  // namespace detail

// Polymer-measure expectation E_N[observable] = Z_N(obs) / Z_N.
inline Expectation polymer_expectation(const DisorderField& f, const ModelParams& m, int N, const Observable& obs,
                                       Method method, const McmcOptions& opt = {},
                                       double budget = kDefaultLeafBudget) {
  m.validate();
  check_field_matches(f, m);
  const Coupling c = coupling_at(m, N);
  const int d = m.d;
  Expectation out;
  out.method = method;
  if (method == Method::exact) {
    struct Acc {
      const Observable* obs;
      Coupling c;
      WeightedMean wm;
      void operator()(const LeafView& v) {
        wm.add(c.beta * v.site_sum - c.h * static_cast<double>(v.range_size), (*obs)(stats_of(v)));
      }
    };
    auto parts = enumerate_paths_branched(
        N, d, [&] { return Acc{&obs, c, {}}; }, [&f, d](const int* x) { return f.omega(x, d); }, budget);
    std::vector<WeightedMean> wms;
    for (auto& p : parts) wms.push_back(p.wm);
    out.value = pairwise_reduce(wms, [](WeightedMean& a, const WeightedMean& b) { a.merge(b); }).mean();
    return out;
  }
  if (method != Method::mcmc) throw std::invalid_argument("polymer_expectation: method must be exact or mcmc");
  if (opt.chains < 2) throw std::invalid_argument("polymer_expectation: need >= 2 chains");
  if (N < 1) throw std::invalid_argument("polymer_expectation: N must be >= 1");

  const std::size_t keep_from = static_cast<std::size_t>(opt.burn_in_fraction * static_cast<double>(opt.sweeps));
  const std::size_t kept = opt.sweeps - keep_from;
  if (kept < opt.batches || opt.batches < 2) throw std::invalid_argument("polymer_expectation: too few sweeps after burn-in");

  std::vector<double> means(static_cast<std::size_t>(opt.chains)), ses(static_cast<std::size_t>(opt.chains));
  for_each_index(static_cast<std::size_t>(opt.chains), [&](std::size_t ch) {
    Stream rng(opt.seed, ch);
    StepSource src(d);
    PackedKeySet seen(static_cast<std::size_t>(N) + 1);
    detail::McmcState cur, prop;
    cur.steps.resize(static_cast<std::size_t>(N));
    for (auto& s : cur.steps) s = static_cast<std::uint8_t>(src.next(rng));
    detail::evaluate_path(f, d, c, seen, cur);
    std::vector<double> trace;
    trace.reserve(kept);
    for (std::size_t sweep = 0; sweep < opt.sweeps; ++sweep) {
      for (int t = 0; t < N; ++t) {
        prop.steps = cur.steps;
        if (N >= 2 && rng.uniform01() < 0.5) {
          // Reverse the step order inside [i, j].
          std::size_t i = rng.below(static_cast<std::uint64_t>(N));
          std::size_t j = rng.below(static_cast<std::uint64_t>(N));
          if (i > j) std::swap(i, j);
          if (i == j) continue;
          std::reverse(prop.steps.begin() + static_cast<std::ptrdiff_t>(i), prop.steps.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        } else {
          // Replace one step by a uniformly chosen different direction.
          const std::size_t i = rng.below(static_cast<std::uint64_t>(N));
          int nd = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d - 1)));
          if (nd >= prop.steps[i]) ++nd;
          prop.steps[i] = static_cast<std::uint8_t>(nd);
        }
        detail::evaluate_path(f, d, c, seen, prop);
        const double delta = prop.log_target - cur.log_target;
        if (delta >= 0.0 || rng.uniform() < std::exp(delta)) {
          std::swap(cur, prop);
          cur.stats.steps = cur.steps.data();
        }
      }
      if (sweep >= keep_from) trace.push_back(obs(cur.stats));
    }
    // Batch means standard error.
    const std::size_t B = opt.batches, len = trace.size() / B;
    double mean = 0.0;
    for (double v : trace) mean += v;
    mean /= static_cast<double>(trace.size());
    double bvar = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      double bm = 0.0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += trace[i];
      bm /= static_cast<double>(len);
      bvar += (bm - mean) * (bm - mean);
    }
    bvar /= static_cast<double>(B - 1);
    means[ch] = mean;
    ses[ch] = std::sqrt(bvar / static_cast<double>(B));
  });
  const double C = static_cast<double>(opt.chains);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= C;
  double between = 0.0, pooled = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    between += (means[i] - grand) * (means[i] - grand);
    pooled += ses[i] * ses[i];
  }
  between = std::sqrt(between / (C - 1.0));
  pooled = std::sqrt(pooled / C);
  out.value = grand;
  out.chain_means = means;
  out.between_chain_sd = between;
  out.pooled_se = pooled;
  out.std_err = std::max(between, pooled) / std::sqrt(C);
  out.converged = between <= 2.0 * pooled;
  return out;
}

}  // namespace polyrange
