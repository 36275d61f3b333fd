#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrange/core/lattice.hpp"
#include "polyrange/core/logsum.hpp"
#include "polyrange/core/parallel.hpp"
#include "polyrange/core/rng.hpp"
#include "polyrange/core/site_set.hpp"

namespace polyrange {

struct PathSample {
  int d = 2;
  std::vector<std::uint8_t> steps;
  SiteSet range{2};
  std::size_t range_size = 1;
  double max_disp = 0.0;
  double log_weight = 0.0;
  Site endpoint;
};

// Incremental walk bookkeeping: position, range and running max |S_n|^2.
class WalkTracker {
 public:
  explicit WalkTracker(int d, std::size_t expected_steps = 64) : d_(d), pos_(static_cast<std::size_t>(d), 0), range_(d, expected_steps + 1) {
    range_.insert(pos_);
  }

  void reset() {
    std::fill(pos_.begin(), pos_.end(), 0);
    range_.clear();
    range_.insert(pos_);
    norm2_ = 0;
    max_norm2_ = 0;
  }

  // Returns true when the step reaches a new site.
  bool step(int dir) {
    const int a = direction_axis(dir);
    const int s = direction_sign(dir);
    norm2_ += 2 * static_cast<std::int64_t>(s) * pos_[a] + 1;
    pos_[a] += s;
    if (norm2_ > max_norm2_) max_norm2_ = norm2_;
    return range_.insert(pos_.data());
  }

  const Site& position() const { return pos_; }
  std::int64_t norm2() const { return norm2_; }
  std::int64_t max_norm2() const { return max_norm2_; }
  std::size_t range_size() const { return range_.size(); }
  const SiteSet& range() const { return range_; }

  PathSample to_sample(std::vector<std::uint8_t> steps, double log_weight = 0.0) const {
    PathSample out;
    out.d = d_;
    out.steps = std::move(steps);
    out.range = range_;
    out.range_size = range_.size();
    out.max_disp = std::sqrt(static_cast<double>(max_norm2_));
    out.log_weight = log_weight;
    out.endpoint = pos_;
    return out;
  }

 private:
  int d_;
  Site pos_;
  SiteSet range_;
  std::int64_t norm2_ = 0;
  std::int64_t max_norm2_ = 0;
};

inline PathSample simulate_walk(Stream& rng, int N, int d) {
  if (N < 1) throw std::invalid_argument("simulate_walk: N must be >= 1");
  if (d < 1) throw std::invalid_argument("simulate_walk: d must be >= 1");
  StepSource src(d);
  WalkTracker w(d, static_cast<std::size_t>(N));
  std::vector<std::uint8_t> steps(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const int dir = src.next(rng);
    steps[n] = static_cast<std::uint8_t>(dir);
    w.step(dir);
  }
  return w.to_sample(std::move(steps));
}

// Range and max displacement rebuilt from the step sequence alone.
inline PathSample path_from_steps(const std::vector<std::uint8_t>& steps, int d, double log_weight = 0.0) {
  WalkTracker w(d, steps.size());
  for (auto s : steps) w.step(s);
  return w.to_sample(steps, log_weight);
}

struct PathClass {
  double r;
  double s;
  double p;
};

inline bool class_membership(double max_disp, std::size_t range_size, const PathClass& c) {
  const double R = static_cast<double>(range_size);
  return max_disp >= c.r && max_disp <= c.p * c.r && R >= c.r * c.s && R <= c.p * c.p * c.r * c.s;
}

inline bool class_membership(const PathSample& x, const PathClass& c) {
  return class_membership(x.max_disp, x.range_size, c);
}

// What a visitor sees at each enumerated path.
struct LeafView {
  int d;
  int N;
  std::size_t range_size;
  std::int64_t max_norm2;
  double site_sum;  // sum of the site value over the range
  double log_prob;  // -N log(2d)
  const std::uint8_t* steps;
  const int* endpoint;

  double max_disp() const { return std::sqrt(static_cast<double>(max_norm2)); }
};

inline constexpr double kDefaultLeafBudget = 1e9;

inline double leaf_count(int N, int d) { return std::pow(2.0 * d, N); }

inline void check_enumeration_budget(int N, int d, double budget) {
  if (N < 0) throw std::invalid_argument("enumerate_paths: N must be >= 0");
  if (d < 1) throw std::invalid_argument("enumerate_paths: d must be >= 1");
  const double leaves = leaf_count(N, d);
  if (leaves > budget) {
    throw BudgetExceeded("enumeration of (2d)^N = " + std::to_string(leaves) + " paths exceeds the budget of " +
                         std::to_string(budget) + " leaves");
  }
}

// Depth-first enumeration of all (2d)^N step sequences with incremental
// undo. Site values are cached on a dense grid covering every reachable site.
class PathEnumerator {
 public:
  using SiteValue = std::function<double(const int*)>;

  PathEnumerator(int N, int d, const SiteValue& site_value = nullptr, double budget = kDefaultLeafBudget)
      : N_(N), d_(d) {
    check_enumeration_budget(N, d, budget);
    side_ = 2 * N + 1;
    double cells = std::pow(static_cast<double>(side_), d);
    if (cells > 2e8) throw BudgetExceeded("enumerate_paths: dense grid too large");
    stride_.assign(static_cast<std::size_t>(d), 1);
    for (int i = 1; i < d; ++i) stride_[i] = stride_[i - 1] * side_;
    const std::size_t n_cells = static_cast<std::size_t>(cells);
    count_.assign(n_cells, 0);
    value_.assign(n_cells, 0.0);
    if (site_value) {
      Site x(static_cast<std::size_t>(d), -N);
      for (std::size_t c = 0; c < n_cells; ++c) {
        std::int64_t l1 = 0;
        for (int v : x) l1 += v < 0 ? -v : v;
        if (l1 <= N) value_[c] = site_value(x.data());
        for (int i = 0; i < d; ++i) {
          if (++x[i] <= N) break;
          x[i] = -N;
        }
      }
    }
    origin_ = 0;
    for (int i = 0; i < d; ++i) origin_ += static_cast<std::size_t>(N) * stride_[i];
    steps_.assign(static_cast<std::size_t>(N), 0);
    range_.assign(static_cast<std::size_t>(N) + 1, 0);
    sum_.assign(static_cast<std::size_t>(N) + 1, 0.0);
    maxn2_.assign(static_cast<std::size_t>(N) + 1, 0);
    pos_.assign(static_cast<std::size_t>(d), 0);
    log_prob_ = -N * std::log(2.0 * d);
  }

  int N() const { return N_; }
  int d() const { return d_; }

  // Visits every path whose first step is first_dir (every path when N = 0).
  template <class Visitor>
  void run_branch(int first_dir, Visitor& visit) {
    reset();
    if (N_ == 0) {
      emit(visit);
      return;
    }
    apply(0, first_dir);
    dfs(1, visit);
    undo(0, first_dir);
  }

  template <class Visitor>
  void run(Visitor& visit) {
    if (N_ == 0) {
      run_branch(0, visit);
      return;
    }
    for (int dir = 0; dir < 2 * d_; ++dir) run_branch(dir, visit);
  }

 private:
  void reset() {
    idx_ = origin_;
    std::fill(pos_.begin(), pos_.end(), 0);
    norm2_ = 0;
    std::fill(count_.begin(), count_.end(), 0);
    count_[origin_] = 1;
    range_[0] = 1;
    sum_[0] = value_[origin_];
    maxn2_[0] = 0;
  }

  void apply(int t, int dir) {
    const int a = direction_axis(dir);
    const int s = direction_sign(dir);
    norm2_ += 2 * static_cast<std::int64_t>(s) * pos_[a] + 1;
    pos_[a] += s;
    idx_ = s > 0 ? idx_ + stride_[a] : idx_ - stride_[a];
    steps_[t] = static_cast<std::uint8_t>(dir);
    const bool fresh = count_[idx_]++ == 0;
    range_[t + 1] = range_[t] + (fresh ? 1 : 0);
    sum_[t + 1] = fresh ? sum_[t] + value_[idx_] : sum_[t];
    maxn2_[t + 1] = norm2_ > maxn2_[t] ? norm2_ : maxn2_[t];
  }

  void undo(int /*t*/, int dir) {
    --count_[idx_];
    const int a = direction_axis(dir);
    const int s = direction_sign(dir);
    idx_ = s > 0 ? idx_ - stride_[a] : idx_ + stride_[a];
    pos_[a] -= s;
    norm2_ -= 2 * static_cast<std::int64_t>(s) * pos_[a] + 1;
  }

  template <class Visitor>
  void emit(Visitor& visit) {
    LeafView v{d_, N_, range_[N_], maxn2_[N_], sum_[N_], log_prob_, steps_.data(), pos_.data()};
    visit(v);
  }

  template <class Visitor>
  void dfs(int t, Visitor& visit) {
    if (t == N_) {
      emit(visit);
      return;
    }
    for (int dir = 0; dir < 2 * d_; ++dir) {
      apply(t, dir);
      dfs(t + 1, visit);
      undo(t, dir);
    }
  }

  int N_;
  int d_;
  int side_ = 1;
  std::vector<std::size_t> stride_;
  std::vector<std::uint32_t> count_;
  std::vector<double> value_;
  std::size_t origin_ = 0;
  std::size_t idx_ = 0;
  Site pos_;
  std::int64_t norm2_ = 0;
  std::vector<std::uint8_t> steps_;
  std::vector<std::size_t> range_;
  std::vector<double> sum_;
  std::vector<std::int64_t> maxn2_;
  double log_prob_ = 0.0;
};

// Sequential enumeration over every path.
template <class Visitor>
void enumerate_paths(int N, int d, Visitor& visit, const PathEnumerator::SiteValue& site_value = nullptr,
                     double budget = kDefaultLeafBudget) {
  PathEnumerator e(N, d, site_value, budget);
  e.run(visit);
}

// Enumeration split over the first step's 2d branches. make_visitor() builds a
// fresh accumulator per branch; the branch accumulators are returned in
// direction order so callers merge deterministically.
template <class MakeVisitor>
auto enumerate_paths_branched(int N, int d, MakeVisitor&& make_visitor,
                              const PathEnumerator::SiteValue& site_value = nullptr,
                              double budget = kDefaultLeafBudget) {
  check_enumeration_budget(N, d, budget);
  using V = decltype(make_visitor());
  const std::size_t branches = N == 0 ? 1 : static_cast<std::size_t>(2 * d);
  std::vector<V> out;
  out.reserve(branches);
  for (std::size_t b = 0; b < branches; ++b) out.push_back(make_visitor());
  for_each_index(branches, [&](std::size_t b) {
    PathEnumerator e(N, d, site_value, budget);
    e.run_branch(static_cast<int>(b), out[b]);
  });
  return out;
}

// Walks conditioned on staying inside the ball of radius R for N steps, and
// optionally on leaving the ball of radius R_inner at some time, by exact
// backward dynamic programming over the ball.
class ConfinedSampler {
 public:
  static constexpr double kDefaultMemoryBudget = 1024.0 * 1024.0 * 1024.0;

  ConfinedSampler(int N, int d, double R, double R_inner = -1.0, double memory_budget = kDefaultMemoryBudget)
      : N_(N), d_(d), R_(R), R_in_(R_inner) {
    if (N < 1) throw std::invalid_argument("ConfinedSampler: N must be >= 1");
    if (d < 1) throw std::invalid_argument("ConfinedSampler: d must be >= 1");
    if (!(R >= 1.0)) throw std::invalid_argument("ConfinedSampler: R must be >= 1");
    if (R_inner >= R) throw std::invalid_argument("ConfinedSampler: inner radius must be below the outer radius");
    sites_ = ball_sites(d, R);
    const std::size_t n = sites_.size();
    const bool shell = R_inner >= 0.0;
    const double bytes = static_cast<double>(N + 1) * static_cast<double>(n) * sizeof(double) * (shell ? 2.0 : 1.0);
    if (bytes > memory_budget) {
      throw BudgetExceeded("ConfinedSampler: survival tables need " + std::to_string(bytes) + " bytes, over the budget");
    }
    const int k = 2 * d;
    std::map<Site, int> index;
    for (std::size_t i = 0; i < n; ++i) index.emplace(sites_[i], static_cast<int>(i));
    nbr_.assign(n * k, -1);
    for (std::size_t i = 0; i < n; ++i) {
      Site y = sites_[i];
      for (int dir = 0; dir < k; ++dir) {
        const int a = direction_axis(dir);
        y[a] += direction_sign(dir);
        auto it = index.find(y);
        if (it != index.end()) nbr_[i * k + dir] = it->second;
        y[a] -= direction_sign(dir);
      }
    }
    origin_ = index.at(Site(static_cast<std::size_t>(d), 0));
    inner_.assign(n, 0);
    if (shell) {
      for (std::size_t i = 0; i < n; ++i) inner_[i] = in_ball(sites_[i], R_inner) ? 1 : 0;
    }

    const double inv_k = 1.0 / k;
    u_.assign((N + 1) * n, 0.0);
    su_.assign(N + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) u_[i] = 1.0;
    for (int t = 1; t <= N; ++t) {
      const double* prev = &u_[(t - 1) * n];
      double* cur = &u_[t * n];
      double mx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int dir = 0; dir < k; ++dir) {
          const int j = nbr_[i * k + dir];
          if (j >= 0) s += prev[j];
        }
        cur[i] = s * inv_k;
        mx = std::max(mx, cur[i]);
      }
      su_[t] = su_[t - 1] + std::log(mx);
      for (std::size_t i = 0; i < n; ++i) cur[i] /= mx;
    }

    if (shell) {
      w_.assign((N + 1) * n, 0.0);
      sw_.assign(N + 1, 0.0);
      for (int t = 1; t <= N; ++t) {
        const double* wp = &w_[(t - 1) * n];
        const double* up = &u_[(t - 1) * n];
        double* cur = &w_[t * n];
        const double m = std::max(sw_[t - 1], su_[t - 1]);
        const double fw = std::exp(sw_[t - 1] - m);
        const double fu = std::exp(su_[t - 1] - m);
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!inner_[i]) continue;
          double s = 0.0;
          for (int dir = 0; dir < k; ++dir) {
            const int j = nbr_[i * k + dir];
            if (j < 0) continue;
            s += inner_[j] ? wp[j] * fw : up[j] * fu;
          }
          cur[i] = s * inv_k;
          mx = std::max(mx, cur[i]);
        }
        if (mx > 0.0) {
          sw_[t] = m + std::log(mx);
          for (std::size_t i = 0; i < n; ++i) cur[i] /= mx;
        } else {
          sw_[t] = m;
        }
      }
    }
  }

  int N() const { return N_; }
  int d() const { return d_; }
  double radius() const { return R_; }
  double inner_radius() const { return R_in_; }
  std::size_t ball_size() const { return sites_.size(); }

  // log P(M_N <= R), or log P(R_inner < M_N <= R) for a shell.
  double log_prob() const {
    const std::size_t n = sites_.size();
    if (R_in_ >= 0.0) {
      const double v = w_[N_ * n + origin_];
      return v > 0.0 ? std::log(v) + sw_[N_] : kNegInf;
    }
    return std::log(u_[N_ * n + origin_]) + su_[N_];
  }

  PathSample sample(Stream& rng) const {
    if (log_prob() == kNegInf) throw std::domain_error("ConfinedSampler: conditioning event has probability 0");
    const std::size_t n = sites_.size();
    const int k = 2 * d_;
    WalkTracker w(d_, static_cast<std::size_t>(N_));
    std::vector<std::uint8_t> steps(static_cast<std::size_t>(N_));
    int at = origin_;
    bool escaped = R_in_ < 0.0;
    double weights[64];
    for (int t = 0; t < N_; ++t) {
      const int m = N_ - t;
      const double* urow = &u_[(m - 1) * n];
      double total = 0.0;
      if (escaped) {
        for (int dir = 0; dir < k; ++dir) {
          const int j = nbr_[at * k + dir];
          weights[dir] = j >= 0 ? urow[j] : 0.0;
          total += weights[dir];
        }
      } else {
        const double* wrow = &w_[(m - 1) * n];
        const double sh = std::max(sw_[m - 1], su_[m - 1]);
        const double fw = std::exp(sw_[m - 1] - sh);
        const double fu = std::exp(su_[m - 1] - sh);
        for (int dir = 0; dir < k; ++dir) {
          const int j = nbr_[at * k + dir];
          weights[dir] = j < 0 ? 0.0 : (inner_[j] ? wrow[j] * fw : urow[j] * fu);
          total += weights[dir];
        }
      }
      double x = rng.uniform() * total;
      int choice = -1;
      for (int dir = 0; dir < k; ++dir) {
        if (weights[dir] <= 0.0) continue;
        choice = dir;
        if (x < weights[dir]) break;
        x -= weights[dir];
      }
      steps[t] = static_cast<std::uint8_t>(choice);
      w.step(choice);
      at = nbr_[at * k + choice];
      if (!inner_[at]) escaped = true;
    }
    return w.to_sample(std::move(steps), log_prob());
  }

 private:
  int N_;
  int d_;
  double R_;
  double R_in_;
  std::vector<Site> sites_;
  std::vector<int> nbr_;
  std::vector<std::uint8_t> inner_;
  int origin_ = 0;
  std::vector<double> u_, su_, w_, sw_;
};

inline PathSample confined_walk_sampler(int N, int d, double R, Stream& rng) {
  return ConfinedSampler(N, d, R).sample(rng);
}

}  // namespace polyrange
