#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "polyrange/exper.hpp"

using namespace polyrange;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("polyrange_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ModelParams r6_params() {
  ModelParams m;
  m.d = 2;
  m.alpha = 1.5;
  m.zeta = -3.0;
  m.gamma = 5.0;
  m.h_hat = 1.0;
  return m;
}

}  // namespace

TEST(FitExponent, ExactPowerLaw) {
  std::vector<double> N{16, 32, 64, 128, 256}, y, e;
  for (double n : N) {
    y.push_back(3.0 * std::pow(n, 0.7));
    e.push_back(0.01 * y.back());
  }
  for (const auto& errs : {std::vector<double>{}, e}) {
    auto f = fit_exponent(N, y, errs, "planted");
    EXPECT_NEAR(f.exponent, 0.7, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-11);
    EXPECT_LT(f.stderr_, 1e-10);
    EXPECT_EQ(f.residuals.size(), N.size());
  }
}

TEST(FitExponent, RejectsShortGridsAndNonpositiveValues) {
  EXPECT_THROW(fit_exponent({1, 2, 3}, {1, 2, 3}, {}, "x"), std::invalid_argument);
  EXPECT_THROW(fit_exponent({1, 2, 3, 4}, {1, 2, 0, 4}, {}, "x"), std::invalid_argument);
  EXPECT_THROW(fit_exponent({1, 2, 3, 4}, {1, -2, 3, 4}, {}, "x"), std::invalid_argument);
  EXPECT_THROW(fit_exponent({1, 2, 3, 4}, {1, 2, 3, 4}, {1, 0, 1, 1}, "x"), std::invalid_argument);
}

TEST(FitExponent, RecoversNoisyPlantedLaws) {
  // Slope within 3 stderr; with 6 residual degrees of freedom the t-tail
  // beyond 3 is about 2.4%.
  Stream rng(11);
  int covered = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const double a = -1.0 + 2.0 * rng.uniform01();
    std::vector<double> N, y, e;
    for (int k = 0; k < 8; ++k) {
      const double n = std::pow(2.0, 4 + k);
      const double sig = 0.02 * (1 + k % 3);
      N.push_back(n);
      y.push_back(2.0 * std::pow(n, a) * std::exp(sig * rng.normal()));
      e.push_back(sig * y.back());
    }
    auto f = fit_exponent(N, y, e, "planted");
    covered += std::abs(f.exponent - a) <= 3.0 * f.stderr_;
  }
  EXPECT_GE(covered, static_cast<int>(0.95 * trials));
}

TEST(WalkExponent, DiffusiveMedianDisplacement) {
  std::vector<double> N, v, e;
  for (int k = 8; k <= 13; ++k) {
    const int n = 1 << k;
    auto q = median_max_displacement(n, 2, 10000, 100 + k);
    N.push_back(n);
    v.push_back(q.value);
    e.push_back(q.std_err);
    EXPECT_GT(q.std_err, 0.0);
  }
  auto f = fit_exponent(N, v, e, "median M_N under P_N");
  EXPECT_GE(f.exponent, 0.45);
  EXPECT_LE(f.exponent, 0.55);
}

TEST(WalkExponent, MedianMatchesEnumeration) {
  // Exact median of M_6 in d = 2 from the full path enumeration.
  std::map<std::int64_t, double> law;
  struct Acc {
    std::map<std::int64_t, double>* law;
    void operator()(const LeafView& v) { (*law)[v.max_norm2] += std::exp(v.log_prob); }
  } acc{&law};
  enumerate_paths(6, 2, acc);
  double cum = 0.0, med = 0.0;
  for (auto& [m2, p] : law) {
    cum += p;
    if (cum >= 0.5) {
      med = std::sqrt(static_cast<double>(m2));
      break;
    }
  }
  auto q = median_max_displacement(6, 2, 20000, 3);
  EXPECT_NEAR(q.value, med, 1e-12);
}

TEST(HomogeneousExponent, StratifiedFitNearOneHalf) {
  std::vector<double> N, v, e;
  for (int n : {256, 512, 1024, 2048}) {
    auto est = homogeneous_log_Z(n, 2, 1.0, 2000, 40 + n);
    N.push_back(n);
    v.push_back(-est.log_value);
    e.push_back(est.std_err);
  }
  auto f = fit_exponent(N, v, e, "-log Z_N (homogeneous)");
  EXPECT_GE(f.exponent, 0.40);
  EXPECT_LE(f.exponent, 0.60);
}

TEST(HomogeneousExponent, StrataCoverOptimalScale) {
  auto r = homogeneous_strata(256, 2, 1.0);
  EXPECT_EQ(r.front(), 2.0);
  EXPECT_EQ(r.back(), 12.0);
  EXPECT_THROW(homogeneous_strata(256, 2, 0.0), std::invalid_argument);
}

TEST(ScenarioR6, TwoSiteDominance) {
  const auto m = r6_params();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 5; ++s) seeds.push_back(s);
  auto r = scenario_R6(m, 12, seeds);
  EXPECT_EQ(r.target, -2.0);
  for (const auto& s : r.seeds) {
    EXPECT_GE(s.prob_two_site, 0.99);
    EXPECT_LE(std::abs(s.scaled - r.target), 0.05);
    // The gap to the limit is the entropy cost of the bounce, N^zeta N log(2d).
    EXPECT_LE(std::abs(s.scaled - r.target), r.finite_size_model);
    EXPECT_NEAR(s.scaled_two_site, s.scaled_two_site_closed, 1e-12);
    EXPECT_LE(s.log_ratio_three_plus, -0.25 * m.h_hat * std::pow(12.0, -m.zeta));
  }
}

TEST(ScenarioR6, RefusesOtherRegions) {
  auto m = r6_params();
  m.zeta = 0.0;
  try {
    scenario_R6(m, 6, {1});
    FAIL() << "expected RegionMismatch";
  } catch (const RegionMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("classify_region"), std::string::npos);
  }
}

TEST(ScenarioR5, DisorderedMatchesHomogeneousAtN10) {
  ModelParams m;
  m.d = 2;
  m.alpha = 1.5;
  m.zeta = 0.0;
  m.gamma = 3.0;
  m.h_hat = 1.0;
  const auto rep = classify_region(m);
  ASSERT_EQ(rep.region, Region::R5);
  ASSERT_EQ(*rep.applicable_theorem, TheoremTag::R5a_3);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  auto r = scenario_R5(m, {}, 2, 1, 10, seeds);
  EXPECT_NEAR(r.c_d, 4.2624, 5e-4);
  EXPECT_DOUBLE_EQ(r.xi, 0.25);
  ASSERT_EQ(r.disordered.size(), 20u);
  for (const auto& p : r.disordered) EXPECT_LE(p.rel_gap, 0.05);
}

TEST(ScenarioR5, HomogeneousScalingApproachesConstant) {
  ModelParams m;
  m.d = 2;
  m.alpha = 1.5;
  m.zeta = 0.0;
  m.gamma = 3.0;
  auto r = scenario_R5(m, {64, 128, 256, 512}, 1000, 5, 0, {});
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_GT(r.fit->exponent, 0.3);
  EXPECT_LT(r.fit->exponent, 0.7);
  for (const auto& p : r.homogeneous) {
    EXPECT_GT(p.scaled / r.c_d, 0.5);
    EXPECT_LT(p.scaled / r.c_d, 1.05);
  }
}

TEST(ScenarioR5, RefusesUnsolvedPart) {
  ModelParams m;
  m.d = 2;
  m.alpha = 1.5;
  m.zeta = 0.5;
  m.gamma = 0.6;
  ASSERT_EQ(classify_region(m).region, Region::R5Unsolved);
  try {
    scenario_R5(m, {}, 2, 1, 6, {1});
    FAIL() << "expected RegionMismatch";
  } catch (const RegionMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("R5Unsolved"), std::string::npos);
  }
}

namespace {

ModelParams r4_params() {
  ModelParams m;
  m.d = 3;
  m.alpha = 2.0;
  m.zeta = 0.8;
  m.gamma = 1.5;
  return m;
}

}  // namespace

TEST(ScenarioR4, ExactValueAgreesWithMonteCarlo) {
  const auto m = r4_params();
  ASSERT_EQ(classify_region(m).region, Region::R4);
  R4Options o;
  o.N_grid = {8};
  o.seeds = {7};
  auto r = scenario_R4(m, o);
  ASSERT_EQ(r.trend.size(), 1u);
  EXPECT_EQ(r.trend[0].method, Method::exact);
  EXPECT_NEAR(r.gamma_d, kLambda3, 1e-8);
  DisorderField f(7, m.alpha, m.p);
  auto mc = partition_mc(f, m, 8, 200000, 3);
  const double z = std::exp(r.trend[0].log_Z);
  EXPECT_NEAR(std::exp(mc.log_value), z, 4 * mc.std_err);
  ASSERT_EQ(r.range.size(), 1u);
  EXPECT_GT(r.range[0].mean_abs_dev, 0.0);
  EXPECT_LT(r.range[0].mean_abs_dev, 1.0);
}

TEST(ScenarioR4, ZeroCouplingIsHomogeneous) {
  auto m = r4_params();
  m.beta_hat = 0.0;
  R4Options o;
  o.N_grid = {6, 8};
  o.seeds = {1, 2};
  auto r = scenario_R4(m, o);
  ASSERT_EQ(r.trend.size(), 4u);
  for (const auto& p : r.trend) {
    DisorderField f(99, m.alpha, m.p);
    const double hom = exact_log_partitions(f, 3, p.N, {{{0.0, m.h_N(p.N)}, {}}})[0];
    EXPECT_NEAR(p.log_Z, hom, 1e-12);
    EXPECT_LT(p.scaled, 0.0);
  }
  EXPECT_EQ(r.trend[0].log_Z, r.trend[1].log_Z);
}

TEST(ScenarioR4, RangeDeviationFrequencyDecreases) {
  auto m = r4_params();
  R4Options o;
  o.ldp_N_grid = {1000, 10000, 100000};
  o.ldp_walks = 600;
  o.delta = 0.1;
  auto r = scenario_R4(m, o);
  ASSERT_EQ(r.ldp.size(), 3u);
  EXPECT_GT(r.ldp[0].frequency, 0.0);
  for (std::size_t i = 1; i < r.ldp.size(); ++i) EXPECT_LE(r.ldp[i].frequency, r.ldp[i - 1].frequency);
  // Range density sits just above gamma_3.
  EXPECT_NEAR(r.ldp[2].mean_range / 100000.0, kLambda3, 0.01);
}

TEST(ScenarioR4, RefusesOtherRegions) {
  auto m = r4_params();
  m.zeta = 0.3;
  EXPECT_THROW(scenario_R4(m, {}), RegionMismatch);
}

TEST(Config, MissingAlphaIsNamed) {
  try {
    parse_config_string("[model]\nd = 2\ngamma = 0.5\nzeta = 0.5\n[method]\nname = \"partition\"\nN_grid = [4]\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.errors().size(), 1u);
    EXPECT_EQ(e.errors()[0], "model.alpha: missing");
  }
}

TEST(Config, EveryBadFieldIsListed) {
  try {
    parse_config_string(
        "[model]\nd = 2\np = 2.0\ngamma = \"x\"\nzeta = 0\n[method]\nname = \"nope\"\nN_grid = [0]\n"
        "[budgets]\nn_samples = 1\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string all = e.what();
    for (const char* key : {"model.alpha", "model.gamma", "model.p", "method.name", "method.N_grid", "budgets.n_samples"}) {
      EXPECT_NE(all.find(key), std::string::npos) << key;
    }
  }
  EXPECT_THROW(parse_config_string("[model\n"), ValidationError);
}

TEST(Config, DefaultsAndSnapshot) {
  auto c = parse_config_string(
      "[model]\nd = 2\nalpha = 1.5\ngamma = 0.5\nzeta = 0.5\np = 0.7\n[method]\nname = \"partition\"\nN_grid = [4, 5]\n");
  EXPECT_DOUBLE_EQ(c.model.q, 0.3);
  EXPECT_EQ(c.N_grid, (std::vector<int>{4, 5}));
  auto j = to_json(c);
  EXPECT_EQ(j["model"]["alpha"], 1.5);
  EXPECT_EQ(j["method"]["name"], "partition");
}

namespace {

ExperimentConfig mc_config(const std::filesystem::path& dir) {
  auto c = parse_config_string(
      "[model]\nd = 2\nalpha = 1.5\np = 0.7\nbeta_hat = 0.5\nh_hat = 0.5\ngamma = 0.5\nzeta = 0.5\n"
      "[method]\nname = \"partition\"\nestimator = \"plain_mc\"\nN_grid = [6, 9]\nseeds = [1, 2]\n"
      "[budgets]\nn_samples = 20000\n");
  c.out_dir = dir.string();
  return c;
}

}  // namespace

TEST(RunExperiment, RerunsAreBitIdenticalAcrossWorkerCounts) {
  const auto dir = scratch_dir("rerun");
  const char* old = std::getenv("POLYRANGE_THREADS");
  const std::string saved = old ? old : "";
  std::vector<std::vector<OutputFile>> runs;
  for (const char* w : {"1", "3", "1"}) {
    setenv("POLYRANGE_THREADS", w, 1);
    auto c = mc_config(dir);
    runs.push_back(run_experiment(c).outputs);
  }
  if (old) {
    setenv("POLYRANGE_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("POLYRANGE_THREADS");
  }
  ASSERT_EQ(runs[0].size(), 2u);
  for (std::size_t r = 1; r < runs.size(); ++r) {
    for (std::size_t i = 0; i < runs[0].size(); ++i) EXPECT_EQ(runs[r][i].sha256, runs[0][i].sha256);
  }
  EXPECT_EQ(sha256_hex(slurp(dir / "experiment.csv")), runs[0][0].sha256);
  auto manifest = nlohmann::json::parse(slurp(dir / "experiment_manifest.json"));
  EXPECT_EQ(manifest["code_version"], kCodeVersion);
  EXPECT_EQ(manifest["config"]["budgets"]["n_samples"], 20000);
  EXPECT_TRUE(manifest["wall_time"].is_number());
}

TEST(RunExperiment, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RunExperiment, PhaseScanAdjacency) {
  const auto dir = scratch_dir("scan");
  auto c = parse_config_string(
      "[model]\nd = 2\nalpha = 1.5\n[method]\nname = \"phase_scan\"\nzeta_range = [-3.0, 2.0]\n"
      "gamma_range = [-1.0, 3.0]\ngrid = 50\n");
  c.out_dir = dir.string();
  run_experiment(c);
  std::ifstream in(dir / "experiment.csv");
  std::string line;
  std::getline(in, line);
  ASSERT_EQ(line, "zeta,gamma,region,xi,theorem_tag");
  const double base = (2 - 1.5) / 1.5;
  std::map<std::pair<int, int>, std::string> cell;
  int rows = 0, r6 = 0, r3 = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string z, g, reg;
    std::getline(ss, z, ',');
    std::getline(ss, g, ',');
    std::getline(ss, reg, ',');
    const double zeta = std::stod(z), gamma = std::stod(g);
    cell[{rows / 50, rows % 50}] = reg;
    ++rows;
    if (zeta < -1 && gamma > zeta + base + 1e-9) {
      EXPECT_EQ(reg, "R6") << line;
      ++r6;
    }
    if (gamma < std::min(zeta, 0.0) + base - 1e-9) {
      EXPECT_EQ(reg, "R3") << line;
      ++r3;
    }
  }
  EXPECT_EQ(rows, 2500);
  EXPECT_GT(r6, 100);
  EXPECT_GT(r3, 100);
  // R6 borders only R3, R5 and boundary cells.
  for (auto& [ij, reg] : cell) {
    if (reg != "R6") continue;
    for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      auto it = cell.find({ij.first + di, ij.second + dj});
      if (it == cell.end()) continue;
      EXPECT_TRUE(it->second == "R6" || it->second == "R3" || it->second == "R5" || it->second == "Boundary")
          << it->second;
    }
  }
}

#ifdef POLYRANGE_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(POLYRANGE_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const auto good = dir / "good.toml", bad = dir / "bad.toml", big = dir / "big.toml";
  std::ofstream(good) << "[model]\nd = 2\nalpha = 1.5\ngamma = 0.5\nzeta = 0.5\n[method]\nname = \"partition\"\n"
                         "N_grid = [4]\n[output]\ndir = \""
                      << dir.string() << "\"\n";
  std::ofstream(bad) << "[model]\nd = 2\n[method]\nname = \"partition\"\nN_grid = [4]\n";
  std::ofstream(big) << "[model]\nd = 2\nalpha = 1.5\ngamma = 0.5\nzeta = 0.5\n[method]\nname = \"partition\"\n"
                        "N_grid = [30]\n[output]\ndir = \""
                     << dir.string() << "\"\n";
  EXPECT_EQ(run_cli("run --config " + good.string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "experiment_manifest.json"));
  EXPECT_EQ(run_cli("run --config " + bad.string()), 2);
  EXPECT_EQ(run_cli("run --config " + big.string()), 3);
  EXPECT_EQ(run_cli("simulate --config " + good.string()), 0);
  EXPECT_EQ(run_cli("phase-scan --d 2 --alpha 1.5 --grid 5"), 0);
}
#endif
