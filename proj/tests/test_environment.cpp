#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "polyrange/environment.hpp"

using namespace polyrange;

namespace {

// Sequential sites along a line; distinct keys for the hash.
Site site_n(std::int64_t n, int d) {
  Site x(static_cast<std::size_t>(d), 0);
  x[0] = static_cast<int>(n % 2001) - 1000;
  x[1] = static_cast<int>(n / 2001) - 250;
  return x;
}

}  // namespace

TEST(DisorderField, DeterministicPerSite) {
  DisorderField f(42, 1.5, 0.7);
  Site x{3, -7};
  EXPECT_EQ(f.omega_at(x), f.omega_at(x));
  DisorderField g(42, 1.5, 0.7);
  EXPECT_EQ(f.omega_at(x), g.omega_at(x));
  DisorderField h(43, 1.5, 0.7);
  EXPECT_NE(f.omega_at(x), h.omega_at(x));
}

TEST(DisorderField, CenteringValues) {
  EXPECT_DOUBLE_EQ(DisorderField(1, 1.5, 0.5).centering(), 0.0);
  EXPECT_NEAR(DisorderField(1, 1.5, 0.7).centering(), 0.4 * 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(DisorderField(1, 0.8, 0.7).centering(), 0.0);
}

TEST(DisorderField, ExactParetoTails) {
  const double alpha = 1.5, p = 0.7, q = 0.3;
  DisorderField f(7, alpha, p);
  const std::int64_t n = 1000000;
  std::int64_t above[3] = {0, 0, 0}, below[3] = {0, 0, 0};
  const double ts[3] = {2.0, 5.0, 10.0};
  for (std::int64_t i = 0; i < n; ++i) {
    Site x = site_n(i, 2);
    const double w = f.omega_raw(x.data(), 2);
    ASSERT_GE(std::abs(w), 1.0);
    for (int k = 0; k < 3; ++k) {
      if (w > ts[k]) ++above[k];
      if (w < -ts[k]) ++below[k];
    }
  }
  for (int k = 0; k < 3; ++k) {
    const double pu = p * std::pow(ts[k], -alpha), pl = q * std::pow(ts[k], -alpha);
    const double su = std::sqrt(pu * (1 - pu) / n), sl = std::sqrt(pl * (1 - pl) / n);
    EXPECT_NEAR(static_cast<double>(above[k]) / n, pu, 4 * su) << "t=" << ts[k];
    EXPECT_NEAR(static_cast<double>(below[k]) / n, pl, 4 * sl) << "t=" << ts[k];
  }
  // Calibration at t = 10: t^alpha P(omega > t) within [0.63, 0.77].
  const double cal = std::pow(10.0, alpha) * static_cast<double>(above[2]) / n;
  EXPECT_GE(cal, 0.63);
  EXPECT_LE(cal, 0.77);
}

TEST(DisorderField, MeanZeroWhenAlphaAboveOne) {
  // alpha = 2.5 has finite variance, so the 4-standard-error test is meaningful.
  DisorderField f(11, 2.5, 0.7);
  const std::int64_t n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    Site x = site_n(i, 2);
    const double w = f.omega_at(x);
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 0.0, 4 * se);
}

TEST(DisorderField, SymmetricWhenPEqualsQ) {
  DisorderField f(5, 1.5, 0.5);
  const std::int64_t n = 200000;
  std::int64_t pos = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    Site x = site_n(i, 2);
    if (f.omega_at(x) > 0) ++pos;
  }
  EXPECT_NEAR(static_cast<double>(pos) / n, 0.5, 4 * std::sqrt(0.25 / n));
}

TEST(OrderStats, BallCardinality) {
  EXPECT_EQ(ball_sites(2, 1).size(), 5u);
  EXPECT_EQ(ball_sites(3, 1).size(), 7u);
  EXPECT_EQ(ball_sites(2, 2).size(), 13u);
}

TEST(OrderStats, FullRelabelingIsSorted) {
  DisorderField f(3, 1.2, 0.6);
  const auto sites = ball_sites(2, 4);
  auto os = order_stats(f, 2, 4, sites.size());
  ASSERT_EQ(os.size(), sites.size());
  std::set<Site> positions;
  double total = 0.0;
  for (std::size_t i = 0; i < os.size(); ++i) {
    EXPECT_EQ(os[i].rank, static_cast<int>(i + 1));
    if (i) {
      EXPECT_GE(os[i - 1].value, os[i].value);
    }
    EXPECT_EQ(os[i].value, f.omega_at(os[i].position));
    positions.insert(os[i].position);
    total += os[i].value;
  }
  EXPECT_EQ(positions.size(), sites.size());
  EXPECT_NEAR(energy_on(f, 4, sites), total, 1e-9 * std::abs(total) + 1e-12);
}

TEST(OrderStats, MaximumMatchesExhaustiveScan) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DisorderField f(seed, 1.5, 0.7);
    double best = -INFINITY;
    for (const auto& x : ball_sites(3, 3.5)) best = std::max(best, f.omega_at(x));
    EXPECT_EQ(order_stats(f, 3, 3.5, 1)[0].value, best);
  }
}

TEST(OrderStats, RestrictionToSmallerBallAgrees) {
  DisorderField f(9, 1.5, 0.7);
  auto big = order_stats(f, 2, 6, ball_sites(2, 6).size());
  auto small = order_stats(f, 2, 3, ball_sites(2, 3).size());
  std::vector<OrderStat> restricted;
  for (auto& o : big) {
    if (in_ball(o.position, 3)) restricted.push_back(o);
  }
  ASSERT_EQ(restricted.size(), small.size());
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_EQ(restricted[i].position, small[i].position);
    EXPECT_EQ(restricted[i].value, small[i].value);
  }
}

TEST(OrderStats, RejectsBadK) {
  DisorderField f(1, 1.5, 0.7);
  EXPECT_THROW(order_stats(f, 2, 1, 6), std::invalid_argument);
  EXPECT_THROW(order_stats(f, 2, 1, 0), std::invalid_argument);
}

TEST(EnergyOn, EmptyAndDirectSums) {
  DisorderField f(21, 1.5, 0.7);
  EXPECT_EQ(energy_on(f, 5, {}), 0.0);
  Stream rng(3);
  auto sites = ball_sites(2, 5);
  std::vector<Site> delta;
  for (int i = 0; i < 20; ++i) delta.push_back(sites[rng.below(sites.size())]);
  std::sort(delta.begin(), delta.end());
  delta.erase(std::unique(delta.begin(), delta.end()), delta.end());
  double direct = 0.0;
  for (auto& x : delta) direct += omega_at(f, x);
  EXPECT_DOUBLE_EQ(energy_on(f, 5, delta), direct);
}

TEST(EnergyOn, RelabelingIdentity) {
  DisorderField f(4, 1.5, 0.7);
  auto os = order_stats(f, 2, 3, ball_sites(2, 3).size());
  std::vector<Site> delta;
  double via_order = 0.0;
  for (std::size_t i = 0; i < os.size(); i += 3) {
    delta.push_back(os[i].position);
    via_order += os[i].value;
  }
  EXPECT_NEAR(energy_on(f, 3, delta), via_order, 1e-12 * (1 + std::abs(via_order)));
}

TEST(EnergyOn, RejectsPointsOutsideBall) {
  DisorderField f(4, 1.5, 0.7);
  EXPECT_THROW(energy_on(f, 2, {Site{3, 0}}), std::out_of_range);
}
