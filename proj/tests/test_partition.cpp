#include <gtest/gtest.h>

#include <cmath>

#include "polyrange/partition.hpp"

using namespace polyrange;

namespace {

ModelParams model(double beta_hat, double h_hat, double gamma, double zeta, int d = 2, double alpha = 1.5, double p = 0.7) {
  ModelParams m;
  m.d = d;
  m.alpha = alpha;
  m.p = p;
  m.q = 1 - p;
  m.beta_hat = beta_hat;
  m.h_hat = h_hat;
  m.gamma = gamma;
  m.zeta = zeta;
  return m;
}

// Linear-scale comparison of Z values: |exp(a) - exp(b)| <= k * se.
void expect_close_linear(const PartitionEstimate& mc, double exact_log, double k) {
  ASSERT_EQ(mc.err_scale, ErrorScale::linear);
  EXPECT_LE(std::abs(std::exp(mc.log_value) - std::exp(exact_log)), k * mc.std_err)
      << "mc=" << mc.log_value << " exact=" << exact_log << " se=" << mc.std_err;
}

}  // namespace

TEST(PartitionExact, NoCouplingGivesOne) {
  DisorderField f(1, 1.5, 0.7);
  auto e = partition_exact(f, model(0, 0, 0.5, 0.5), 6);
  EXPECT_NEAR(e.log_value, 0.0, 1e-13);
  EXPECT_EQ(e.std_err, 0.0);
  EXPECT_EQ(e.truncation_bound, 0.0);
  EXPECT_EQ(e.method, Method::exact);
}

TEST(PartitionExact, OneStepClosedForm) {
  DisorderField f(3, 1.5, 0.7);
  auto m = model(0.8, 0.3, 0.0, 0.0);
  const double b = m.beta_N(1), h = m.h_N(1);
  double s = 0.0;
  for (Site e : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) s += std::exp(b * f.omega_at(e));
  const double expect = b * f.omega_at({0, 0}) - 2 * h + std::log(s / 4);
  EXPECT_NEAR(partition_exact(f, m, 1).log_value, expect, 1e-13);
}

TEST(PartitionExact, AgreesWithPlainMonteCarlo) {
  DisorderField f(2024, 1.5, 0.7);
  auto m = model(0.5, 0.5, 0.5, 0.5);
  auto ex = partition_exact(f, m, 6);
  auto mc = partition_mc(f, m, 6, 100000, 17);
  expect_close_linear(mc, ex.log_value, 3.0);
}

TEST(PartitionMc, ConstantWeightHasZeroError) {
  DisorderField f(1, 1.5, 0.7);
  auto mc = partition_mc(f, model(0, 0, 0, 0), 8, 1000, 3);
  EXPECT_EQ(mc.log_value, 0.0);
  EXPECT_EQ(mc.std_err, 0.0);
  EXPECT_THROW(partition_mc(f, model(0, 0, 0, 0), 8, 1, 3), std::invalid_argument);
}

TEST(PartitionMc, MonotoneInFieldAmplitude) {
  DisorderField f(5, 1.5, 0.7);
  double prev = INFINITY;
  for (double h : {0.1, 0.2, 0.4, 0.8}) {
    auto mc = partition_mc(f, model(0.5, h, 0.5, 0.5), 10, 2000, 99);
    EXPECT_LT(mc.log_value, prev);
    prev = mc.log_value;
  }
}

TEST(PartitionExact, EventsAndDecomposition) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DisorderField f(seed, 1.5, 0.7);
    auto m = model(0.7, 0.4, 0.2, 0.1);
    const Coupling c = coupling_at(m, 8);
    auto two = [](const PathStats& s) { return s.range_size == 2; };
    auto more = [](const PathStats& s) { return s.range_size >= 3; };
    auto v = exact_log_partitions(f, 2, 8, {{c, {}}, {c, two}, {c, more}});
    EXPECT_TRUE(std::isfinite(v[0]));
    EXPECT_LE(v[1], v[0]);
    EXPECT_LE(v[2], v[0]);
    EXPECT_NEAR(log_add(v[1], v[2]), v[0], 1e-12 * (1 + std::abs(v[0])));

    // Two-site closed form: e^{-2h} sum_{k, j=+-1} e^{beta(w_0 + w_{j e_k})} (2d)^{-N}.
    double s = 0.0;
    for (Site e : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) {
      s += std::exp(c.beta * (f.omega_at({0, 0}) + f.omega_at(e)));
    }
    const double closed = std::log(s) - 2 * c.h - 8 * std::log(4.0);
    EXPECT_NEAR(v[1], closed, 1e-12 * std::abs(closed));
  }
}

TEST(PartitionExact, JensenLowerBound) {
  DisorderField f(1, 1.5, 0.7);
  for (int N : {4, 7, 10}) {
    for (double theta : {0.5, 1.0, 2.0}) {
      const double h = 0.3;
      auto v = exact_log_partitions(f, 2, N, {{{0.0, theta * h}, {}}});
      struct Mean {
        double s = 0;
        void operator()(const LeafView& l) { s += std::exp(l.log_prob) * static_cast<double>(l.range_size); }
      } mean;
      enumerate_paths(N, 2, mean);
      EXPECT_GE(v[0], -theta * h * mean.s - 1e-12);
    }
  }
}

TEST(PartitionExact, BudgetRefusal) {
  DisorderField f(1, 1.5, 0.7);
  EXPECT_THROW(partition_exact(f, model(1, 1, 0, 0), 8, {}, 1000), BudgetExceeded);
  EXPECT_THROW(partition_exact(DisorderField(1, 1.2, 0.7), model(1, 1, 0, 0), 4), std::invalid_argument);
}

TEST(HomogeneousStrata, NoPenaltyGivesOne) {
  auto e = partition_homogeneous_strata(12, 2, 0.0, 12.0, {}, 50, 1);
  EXPECT_NEAR(e.log_value, 0.0, 1e-12);
  EXPECT_EQ(e.truncation_bound, 0.0);
  EXPECT_EQ(e.method, Method::confined_strata);
}

TEST(HomogeneousStrata, AgreesWithEnumeration) {
  DisorderField f(1, 1.5, 0.7);
  const int N = 10;
  const double h = 0.3;
  const double exact = exact_log_partitions(f, 2, N, {{{0.0, h}, {}}})[0];
  auto e = partition_homogeneous_strata(N, 2, h, 10.0, {}, 20000, 7);
  ASSERT_EQ(e.err_scale, ErrorScale::log);
  EXPECT_LE(std::abs(e.log_value - exact), 3 * e.std_err + e.truncation_bound) << e.log_value << " vs " << exact;
  // Explicit integer shells as well.
  auto e2 = partition_homogeneous_strata(N, 2, h, 10.0, {1, 2, 3, 4, 5, 10}, 20000, 8);
  EXPECT_LE(std::abs(e2.log_value - exact), 3 * e2.std_err + e2.truncation_bound);
}

TEST(HomogeneousStrata, TruncationBoundShrinks) {
  double prev = INFINITY;
  for (double rmax : {3.0, 5.0, 8.0, 13.0, 20.0, 30.0}) {
    auto e = partition_homogeneous_strata(30, 2, 0.2, rmax, {}, 10, 1);
    EXPECT_LE(e.truncation_bound, prev);
    prev = e.truncation_bound;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(HomogeneousStrata, DefaultRadiiAreGeometric) {
  auto r = default_strata(256, 2, 20.0);
  EXPECT_EQ(r.front(), 4.0);
  EXPECT_EQ(r.back(), 20.0);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) EXPECT_DOUBLE_EQ(r[i] / r[i - 1], 1.5);
}

TEST(HomogeneousStrata, RejectsBadRadii) {
  EXPECT_THROW(partition_homogeneous_strata(10, 2, 0.3, 5, {3, 2, 5}, 10, 1), std::invalid_argument);
  EXPECT_THROW(partition_homogeneous_strata(10, 2, 0.3, 5, {2, 4}, 10, 1), std::invalid_argument);
}

TEST(TruncatedLogMgf, ZeroCoupling) { EXPECT_EQ(truncated_log_mgf(2.5, 0.6, 0.4, 0.0, 100), 0.0); }

TEST(TruncatedLogMgf, SmallCouplingGivesTruncatedVariance) {
  const double alpha = 2.5, p = 0.6, q = 0.4, k = 1000;
  const auto m = truncated_moments(alpha, p, q, k);
  for (double beta : {1e-6, 1e-7, 1e-8}) {
    const double lam = truncated_log_mgf(alpha, p, q, beta, k);
    EXPECT_NEAR((lam - beta * m.m1) / (beta * beta / 2), m.m2 - m.m1 * m.m1, 1e-3 * (m.m2 - m.m1 * m.m1));
  }
}

TEST(TruncatedLogMgf, QuadratureMatchesSeriesNearThreshold) {
  const double k = 50;
  const double beta_series = 0.999 * kSeriesThreshold / k;
  const double beta_quad = 1.001 * kSeriesThreshold / k;
  const double a = truncated_log_mgf(2.5, 0.6, 0.4, beta_series, k);
  const double b = truncated_log_mgf(2.5, 0.6, 0.4, beta_quad, k);
  EXPECT_NEAR(a / (beta_series * beta_series), b / (beta_quad * beta_quad), 2e-2 * std::abs(a) / (beta_series * beta_series));
}

TEST(TruncatedLogMgf, MomentsMatchDirectIntegration) {
  // Moments by brute-force midpoint integration over y in log scale.
  const double alpha = 1.7, p = 0.65, q = 0.35, k = 20;
  const double c = (p - q) * alpha / (alpha - 1);
  double m1 = 0, m2 = 0;
  const int n = 2000000;
  const double smax = std::log(k + std::abs(c) + 1);
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) * smax / n, y = std::exp(s);
    const double dens = alpha * std::exp(-alpha * s) * smax / n;
    for (double sign : {1.0, -1.0}) {
      const double w = sign * y - c;
      if (std::abs(w) > k) continue;
      const double wt = (sign > 0 ? p : q) * dens;
      m1 += wt * w;
      m2 += wt * w * w;
    }
  }
  const auto mom = truncated_moments(alpha, p, q, k);
  EXPECT_NEAR(mom.m1, m1, 2e-3);
  EXPECT_NEAR(mom.m2, m2, 2e-3 * m2);
}

TEST(TruncatedLogMgf, MatchesMonteCarlo) {
  const double alpha = 2.5, p = 0.6, beta = 0.01, k = 100;
  DisorderField f(77, alpha, p);
  const std::int64_t n = 10000000;
  double s = 0, s2 = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    int x[2] = {static_cast<int>(i % 4000) - 2000, static_cast<int>(i / 4000)};
    const double w = f.omega(x, 2);
    const double e = std::exp(beta * (std::abs(w) <= k ? w : 0.0));
    s += e;
    s2 += e * e;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  const double lam = truncated_log_mgf(alpha, p, 1 - p, beta, k);
  EXPECT_NEAR(std::log(mean), lam, 3 * se / mean);
}

TEST(TruncatedLogMgf, RejectsDivergentInputs) {
  EXPECT_THROW(truncated_log_mgf(1.5, 0.5, 0.5, 10.0, 1000), std::overflow_error);
  EXPECT_THROW(truncated_log_mgf(1.5, 0.5, 0.5, -1.0, 10), std::invalid_argument);
  EXPECT_THROW(truncated_log_mgf(1.5, 0.5, 0.5, 0.1, 0.5), std::invalid_argument);
}

TEST(Holder, BothBoundsHold) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    DisorderField f(seed, 1.5, 0.7);
    for (double eps : {0.25, 0.5, 1.0}) {
      auto r = holder_sandwich_check(f, model(0.5, 0.5, 0.5, 0.5), 6, eps);
      EXPECT_TRUE(r.holds);
      EXPECT_GE(r.upper_slack, kHolderSlackFloor);
      EXPECT_GE(r.lower_slack, kHolderSlackFloor);
    }
  }
}

TEST(Holder, SandwichCollapsesWithoutDisorder) {
  DisorderField f(3, 1.5, 0.7);
  auto m = model(0.0, 0.5, 0.5, 0.5);
  double prev = INFINITY;
  for (double eps : {0.5, 0.1, 0.01, 0.001}) {
    auto r = holder_sandwich_check(f, m, 6, eps);
    EXPECT_GE(r.upper_slack, kHolderSlackFloor);
    EXPECT_LE(r.upper_slack, prev);
    prev = r.upper_slack;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Holder, Reproducible) {
  DisorderField f(8, 1.5, 0.7);
  auto a = holder_sandwich_check(f, model(0.5, 0.5, 0.5, 0.5), 6, 0.5);
  auto b = holder_sandwich_check(f, model(0.5, 0.5, 0.5, 0.5), 6, 0.5);
  EXPECT_EQ(a.upper_slack, b.upper_slack);
  EXPECT_EQ(a.lower_slack, b.lower_slack);
  EXPECT_THROW(holder_sandwich_check(f, model(0.5, 0.5, 0.5, 0.5), 6, 0.0), std::invalid_argument);
}

TEST(PolymerExpectation, Normalization) {
  DisorderField f(4, 1.5, 0.7);
  auto e = polymer_expectation(f, model(0.9, 0.4, 0.2, 0.1), 8, [](const PathStats&) { return 1.0; }, Method::exact);
  EXPECT_NEAR(e.value, 1.0, 1e-14);
}

TEST(PolymerExpectation, PlainWalkWithoutCoupling) {
  DisorderField f(4, 1.5, 0.7);
  auto e = polymer_expectation(f, model(0, 0, 0, 0), 8,
                               [](const PathStats& s) { return static_cast<double>(s.range_size); }, Method::exact);
  struct Mean {
    double s = 0;
    void operator()(const LeafView& l) { s += std::exp(l.log_prob) * static_cast<double>(l.range_size); }
  } mean;
  enumerate_paths(8, 2, mean);
  EXPECT_NEAR(e.value, mean.s, 1e-12);
}

TEST(PolymerExpectation, StrongPenaltyPinsTwoSites) {
  DisorderField f(11, 1.5, 0.7);
  auto m = model(1.0, 1.0, 5.0, -3.0);
  auto e = polymer_expectation(f, m, 12, [](const PathStats& s) { return s.range_size == 2 ? 1.0 : 0.0; }, Method::exact);
  EXPECT_GE(e.value, 0.99);
}

TEST(PolymerExpectation, McmcAgreesWithExact) {
  // Light tails keep the polymer measure free of isolated dominant sites,
  // which local moves cannot find in a short run.
  DisorderField f(6, 1.9, 0.5);
  auto m = model(0.4, 0.3, 0.0, 0.0, 2, 1.9, 0.5);
  Observable obs = [](const PathStats& s) { return static_cast<double>(s.range_size); };
  auto ex = polymer_expectation(f, m, 9, obs, Method::exact);
  McmcOptions opt;
  opt.sweeps = 4000;
  opt.seed = 5;
  auto mc = polymer_expectation(f, m, 9, obs, Method::mcmc, opt);
  EXPECT_TRUE(mc.converged);
  EXPECT_EQ(mc.chain_means.size(), 4u);
  EXPECT_NEAR(mc.value, ex.value, 4 * mc.std_err + 0.02) << "se=" << mc.std_err;
}
