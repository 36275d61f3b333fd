#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

namespace polyrange {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Streaming log-sum-exp.
class LogSumExp {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  void merge(const LogSumExp& o) {
    if (o.max_ == kNegInf) return;
    if (o.max_ <= max_) {
      sum_ += o.sum_ * std::exp(o.max_ - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - o.max_) + o.sum_;
      max_ = o.max_;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

// Log-weights plus a weighted observable sum on a shared shift, so that
// sum(w * f) / sum(w) is available without overflow.
class WeightedMean {
 public:
  void add(double log_w, double f) {
    if (log_w == kNegInf) return;
    if (log_w > max_) {
      double s = std::exp(max_ - log_w);
      w_ *= s;
      wf_ *= s;
      max_ = log_w;
    }
    double e = std::exp(log_w - max_);
    w_ += e;
    wf_ += e * f;
  }
  void merge(const WeightedMean& o) {
    if (o.max_ == kNegInf) return;
    if (o.max_ > max_) {
      double s = std::exp(max_ - o.max_);
      w_ = w_ * s + o.w_;
      wf_ = wf_ * s + o.wf_;
      max_ = o.max_;
    } else {
      double s = std::exp(o.max_ - max_);
      w_ += o.w_ * s;
      wf_ += o.wf_ * s;
    }
  }
  double log_total() const { return max_ == kNegInf ? kNegInf : max_ + std::log(w_); }
  double mean() const { return wf_ / w_; }

 private:
  double max_ = kNegInf;
  double w_ = 0.0;
  double wf_ = 0.0;
};

// First and second moments of e^x from log inputs, kept on a common shift.
class WeightMoments {
 public:
  void add(double x) {
    ++n_;
    if (x == kNegInf) return;
    if (x > max_) {
      double s = std::exp(max_ - x);
      s1_ *= s;
      s2_ *= s * s;
      max_ = x;
    }
    double e = std::exp(x - max_);
    s1_ += e;
    s2_ += e * e;
  }
  void merge(const WeightMoments& o) {
    n_ += o.n_;
    if (o.max_ == kNegInf) return;
    if (o.max_ > max_) {
      double s = std::exp(max_ - o.max_);
      s1_ = s1_ * s + o.s1_;
      s2_ = s2_ * s * s + o.s2_;
      max_ = o.max_;
    } else {
      double s = std::exp(o.max_ - max_);
      s1_ += o.s1_ * s;
      s2_ += o.s2_ * s * s;
    }
  }
  std::size_t count() const { return n_; }
  // log of the sample mean of e^x.
  double log_mean() const {
    if (max_ == kNegInf || n_ == 0) return kNegInf;
    return max_ + std::log(s1_ / static_cast<double>(n_));
  }
  // log of the standard error of the sample mean (sample sd / sqrt(n)).
  double log_std_err() const {
    if (max_ == kNegInf || n_ < 2) return kNegInf;
    double n = static_cast<double>(n_);
    double m = s1_ / n;
    double var = (s2_ / n - m * m) * n / (n - 1.0);
    if (var <= 0) return kNegInf;
    return max_ + 0.5 * std::log(var / n);
  }

 private:
  std::size_t n_ = 0;
  double max_ = kNegInf;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

}  // namespace polyrange
