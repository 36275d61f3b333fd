#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "polyrange/params.hpp"
#include "oracles/brute_force.hpp"

using namespace polyrange;
using namespace oracle;

namespace {

ModelParams at(int d, double alpha, double zeta, double gamma) {
  ModelParams m;
  m.d = d;
  m.alpha = alpha;
  m.zeta = zeta;
  m.gamma = gamma;
  return m;
}

}  // namespace

TEST(Params, DerivedCouplings) {
  ModelParams m = at(2, 1.5, 0.5, 0.5);
  m.beta_hat = 2.0;
  m.h_hat = 3.0;
  EXPECT_DOUBLE_EQ(m.beta_N(16), 0.5);
  EXPECT_DOUBLE_EQ(m.h_N(16), 0.75);
}

TEST(Params, ValidationNamesEveryBadField) {
  ModelParams m;
  m.d = 1;
  m.alpha = -1;
  m.p = 0.9;
  m.q = 0.9;
  auto errs = m.problems();
  std::string all;
  for (auto& e : errs) all += e + ";";
  EXPECT_NE(all.find("d:"), std::string::npos);
  EXPECT_NE(all.find("alpha:"), std::string::npos);
  EXPECT_NE(all.find("p, q:"), std::string::npos);
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(ClassifyRegion, WorkedExamples) {
  auto r = classify_region(at(3, 2, 2, 1));
  EXPECT_EQ(r.region, Region::R1);
  EXPECT_DOUBLE_EQ(*r.xi, 0.5);

  r = classify_region(at(3, 2, 0.5, 0.6));
  EXPECT_EQ(r.region, Region::R2);
  EXPECT_NEAR(*r.xi, 0.8, 1e-15);
  EXPECT_EQ(*r.applicable_theorem, TheoremTag::B);

  r = classify_region(at(3, 2, -0.5, -0.2));
  EXPECT_EQ(r.region, Region::R3);
  EXPECT_DOUBLE_EQ(*r.xi, 1.0);
  EXPECT_EQ(*r.applicable_theorem, TheoremTag::A);

  r = classify_region(at(3, 2, 0.8, 1.5));
  EXPECT_EQ(r.region, Region::R4);
  EXPECT_DOUBLE_EQ(*r.xi, 0.4);

  r = classify_region(at(3, 2, 0, 1));
  EXPECT_EQ(r.region, Region::R5);
  EXPECT_EQ(*r.applicable_theorem, TheoremTag::R5a_3);
  EXPECT_DOUBLE_EQ(*r.xi, 0.2);

  r = classify_region(at(3, 2, -2, -1));
  EXPECT_EQ(r.region, Region::R6);
  EXPECT_DOUBLE_EQ(*r.xi, 0.0);

  r = classify_region(at(3, 2, 0.3, 0.65));
  EXPECT_EQ(r.region, Region::R5Unsolved);
  EXPECT_FALSE(r.xi.has_value());
}

TEST(ClassifyRegion, RejectsInvalidAlphaAndDimension) {
  EXPECT_THROW(classify_region(at(3, 3.0, 0, 0)), std::invalid_argument);
  EXPECT_THROW(classify_region(at(3, 0.0, 0, 0)), std::invalid_argument);
  EXPECT_THROW(classify_region(at(1, 0.5, 0, 0)), std::invalid_argument);
  EXPECT_THROW(classify_region(at(4, 2.0, 0, 0)), std::invalid_argument);  // alpha = d/2
}

TEST(ClassifyRegion, BoundaryPointsAreFlagged) {
  // On gamma = zeta + base, zeta < 0 (d=3, alpha=2: base = 1/2).
  EXPECT_EQ(classify_region(at(3, 2, -0.5, 0.0)).region, Region::Boundary);
  // Within 1e-12 of zeta = 2/d.
  EXPECT_EQ(classify_region(at(3, 2, 2.0 / 3 + 5e-13, 2.0)).region, Region::Boundary);
  // Non-strict mode assigns a region instead.
  EXPECT_NE(classify_region(at(3, 2, -0.5, 0.0), false).region, Region::Boundary);
}

TEST(ClassifyRegion, R1TheoremTags) {
  EXPECT_EQ(*classify_region(at(5, 3, 2, 1)).applicable_theorem, TheoremTag::R1a);
  // d=3, alpha=1.8 in (d/2, 2); the split is zeta = gamma + d(alpha-1)/(2 alpha) = gamma + 2/3.
  EXPECT_EQ(*classify_region(at(3, 1.8, 1.2, 1.0)).applicable_theorem, TheoremTag::R1b_i);
  EXPECT_EQ(*classify_region(at(3, 1.8, 3.0, 1.0)).applicable_theorem, TheoremTag::R1b_ii);
  // d=6, alpha=2.5: d/(d-2) = 1.5 < alpha < 3.
  EXPECT_EQ(*classify_region(at(6, 2.5, 2, 2)).applicable_theorem, TheoremTag::R1c_i);
  // d=3, alpha=1.2 < d/2 and < d/(d-2) = 3.
  EXPECT_EQ(*classify_region(at(3, 1.2, 1.5, 2.0)).applicable_theorem, TheoremTag::R1c_iia);
  EXPECT_EQ(*classify_region(at(3, 1.2, 5.0, 2.0)).applicable_theorem, TheoremTag::R1c_iib);
  // alpha = 2 sits between R1a and R1b: region known, no theorem.
  auto r = classify_region(at(3, 2, 2, 1));
  EXPECT_FALSE(r.applicable_theorem.has_value());
  EXPECT_FALSE(r.logZ_scale_exponent.has_value());
}

TEST(ClassifyRegion, R5Cases) {
  // alpha < d/2: gamma above base gives case 2.
  EXPECT_EQ(*classify_region(at(3, 1.25, 0.2, 2.0)).applicable_theorem, TheoremTag::R5a_2);
  EXPECT_EQ(*classify_region(at(3, 1.25, -0.5, 1.0)).applicable_theorem, TheoremTag::R5a_1);
  // alpha > d/2, below d/(2 alpha) but above zeta + base.
  EXPECT_EQ(*classify_region(at(3, 2, -0.5, 0.3)).applicable_theorem, TheoremTag::R5a_1);
}

TEST(ClassifyRegion, LogZExponentSignConvention) {
  auto r = classify_region(at(3, 2, -2, -1));
  EXPECT_DOUBLE_EQ(*r.logZ_scale_exponent, 2.0);
  EXPECT_EQ(r.logZ_sign, -1);
  r = classify_region(at(3, 2, 0.5, 0.6));
  EXPECT_NEAR(*r.logZ_scale_exponent, 0.6, 1e-15);
  EXPECT_EQ(r.logZ_sign, 1);
  r = classify_region(at(2, 1.5, 0, 1));
  EXPECT_DOUBLE_EQ(*r.logZ_scale_exponent, 0.5);
}

class PartitionGrid : public ::testing::TestWithParam<std::pair<int, double>> {};

TEST_P(PartitionGrid, ExactlyOneRegionAndOracleAgrees) {
  const auto [d, alpha] = GetParam();
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      const double z = -2.5 + 5.0 * (i + 0.5) / 200.0;
      const double g = -2.5 + 5.0 * (j + 0.5) / 200.0;
      if (distance_to_boundary(d, alpha, {z, g}) <= 1e-9) continue;
      auto hits = oracle_regions(d, alpha, z, g);
      ASSERT_EQ(hits.size(), 1u) << z << "," << g;
      auto r = classify_region(at(d, alpha, z, g));
      Region got = r.region == Region::R5Unsolved ? Region::R5 : r.region;
      ASSERT_EQ(got, hits[0]) << z << "," << g;
      if (r.region == Region::R2) {
        ASSERT_GT(2 * alpha, d);
      }
      if (r.region == Region::R4) {
        ASSERT_GE(d, 3);
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 39000);
}

INSTANTIATE_TEST_SUITE_P(Diagrams, PartitionGrid,
                         ::testing::Values(std::make_pair(3, 2.0), std::make_pair(3, 1.25), std::make_pair(2, 1.5)));

TEST(ClassifyRegion, PredictionsMatchAcrossBoundaries) {
  for (int d : {2, 3, 4}) {
    ModelParams m = at(d, 0.9 * d, 2.0 / d, 5.0);
    EXPECT_DOUBLE_EQ(region_xi(Region::R4, m), region_xi(Region::R5, m));
  }
  for (auto [d, a] : {std::pair{3, 2.0}, std::pair{2, 1.5}, std::pair{4, 3.0}}) {
    ModelParams m = at(d, a, 0.5, d / (2 * a));
    EXPECT_DOUBLE_EQ(region_xi(Region::R2, m), region_xi(Region::R1, m));
  }
}

TEST(ClassifyRegion, RegionFourNeedsThreeDimensions) {
  for (double z = 0.05; z < 1.5; z += 0.1) {
    for (double g = -1; g < 3; g += 0.1) {
      EXPECT_NE(classify_region(at(2, 1.5, z, g)).region, Region::R4);
    }
  }
}

TEST(HeuristicOrders, Examples) {
  auto h = heuristic_orders(at(3, 2, 0, 1), 0.2);
  EXPECT_NEAR(h.energy_exp, -0.7, 1e-15);
  EXPECT_NEAR(h.range_exp, 0.6, 1e-15);
  EXPECT_NEAR(h.entropy_exp, 0.6, 1e-15);
  h = heuristic_orders(at(3, 2, 0.5, 0.6), 0.8);
  EXPECT_NEAR(h.energy_exp, 0.6, 1e-15);
  EXPECT_NEAR(h.entropy_exp, 0.6, 1e-15);
  EXPECT_EQ(heuristic_orders(at(2, 1.5, 0.3, 0.1), 0.5).entropy_exp, 0.0);
  EXPECT_THROW(heuristic_orders(at(2, 1.5, 0, 0), 1.5), std::invalid_argument);
}

TEST(HeuristicOrders, RegionBalancesHold) {
  for (auto [d, a] : {std::pair{3, 2.0}, std::pair{3, 1.25}, std::pair{2, 1.5}, std::pair{4, 3.0}}) {
    for (double z = -2.4; z < 2.4; z += 0.037) {
      for (double g = -2.4; g < 2.4; g += 0.041) {
        auto m = at(d, a, z, g);
        auto r = classify_region(m);
        if (r.region == Region::R5) {
          auto h = heuristic_orders(m, *r.xi);
          EXPECT_NEAR(h.range_exp, h.entropy_exp, 1e-12);
          EXPECT_LT(h.energy_exp, h.range_exp);
        } else if (r.region == Region::R2) {
          auto h = heuristic_orders(m, *r.xi);
          EXPECT_NEAR(h.energy_exp, h.entropy_exp, 1e-12);
          EXPECT_LT(h.range_exp, h.energy_exp);
        }
      }
    }
  }
}

TEST(BoundaryCurves, UpperDiagramContainsSlopedSegment) {
  auto curves = boundary_curves(3, 2.0);
  bool found = false;
  for (auto& c : curves) {
    if (c.vertices.size() == 2 && !c.ray_end && std::abs(c.vertices[0].zeta) < 1e-15 &&
        std::abs(c.vertices[0].gamma - 0.5) < 1e-15 && std::abs(c.vertices[1].zeta - 1) < 1e-15 &&
        std::abs(c.vertices[1].gamma - 0.75) < 1e-15) {
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(BoundaryCurves, LowerDiagramHasNoSlopedSegment) {
  auto upper = boundary_curves(3, 2.0);
  auto lower = boundary_curves(3, 1.25);
  EXPECT_LT(lower.size(), upper.size());
  for (auto& c : lower) {
    for (std::size_t i = 0; i + 1 < c.vertices.size(); ++i) {
      const double dz = c.vertices[i + 1].zeta - c.vertices[i].zeta;
      const double dg = c.vertices[i + 1].gamma - c.vertices[i].gamma;
      // Only horizontal, vertical or unit-slope lines remain.
      EXPECT_TRUE(std::abs(dz) < 1e-15 || std::abs(dg) < 1e-15 || std::abs(dg - dz) < 1e-15);
    }
  }
}

TEST(BoundaryCurves, TwoDimensionalRaysCoincide) {
  auto curves = boundary_curves(2, 1.0);
  std::optional<double> two_over_d, one;
  for (auto& c : curves) {
    if (c.name == "zeta=2/d") two_over_d = c.vertices[0].zeta;
    if (c.name == "zeta=1") one = c.vertices[0].zeta;
  }
  ASSERT_TRUE(two_over_d && one);
  EXPECT_DOUBLE_EQ(*two_over_d, *one);
}
