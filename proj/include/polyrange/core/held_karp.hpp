#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace polyrange {

using Point = std::vector<double>;
using Metric = std::function<double(const Point&, const Point&)>;

inline double euclidean(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double manhattan(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

// Shortest origin-anchored path through every subset of at most ~20 points.
class SubsetPaths {
 public:
  SubsetPaths(const std::vector<Point>& pts, const Metric& metric) : n_(static_cast<int>(pts.size())) {
    if (n_ > 24) throw std::invalid_argument("SubsetPaths: too many points");
    const std::size_t full = std::size_t{1} << n_;
    constexpr double inf = std::numeric_limits<double>::infinity();
    dp_.assign(full * n_, inf);
    parent_.assign(full * n_, -1);
    best_.assign(full, inf);
    best_last_.assign(full, -1);
    best_[0] = 0.0;
    if (n_ == 0) return;
    std::vector<double> D(static_cast<std::size_t>(n_) * n_);
    const Point origin(pts[0].size(), 0.0);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) D[i * n_ + j] = metric(pts[i], pts[j]);
      dp_[(std::size_t{1} << i) * n_ + i] = metric(origin, pts[i]);
    }
    for (std::size_t S = 1; S < full; ++S) {
      for (int j = 0; j < n_; ++j) {
        const double cur = dp_[S * n_ + j];
        if (cur == inf) continue;
        if (cur < best_[S]) {
          best_[S] = cur;
          best_last_[S] = j;
        }
        for (int k = 0; k < n_; ++k) {
          if (S >> k & 1) continue;
          const std::size_t T = S | (std::size_t{1} << k);
          const double c = cur + D[j * n_ + k];
          if (c < dp_[T * n_ + k]) {
            dp_[T * n_ + k] = c;
            parent_[T * n_ + k] = static_cast<std::int8_t>(j);
          }
        }
      }
    }
  }

  int size() const { return n_; }
  double length(std::size_t subset) const { return best_[subset]; }

  // Visit order realising length(subset).
  std::vector<int> order(std::size_t subset) const {
    std::vector<int> out;
    int j = best_last_[subset];
    while (subset != 0 && j >= 0) {
      out.push_back(j);
      const int pj = parent_[subset * n_ + j];
      subset &= ~(std::size_t{1} << j);
      j = pj;
    }
    return {out.rbegin(), out.rend()};
  }

 private:
  int n_;
  std::vector<double> dp_;
  std::vector<std::int8_t> parent_;
  std::vector<double> best_;
  std::vector<int> best_last_;
};

}  // namespace polyrange
