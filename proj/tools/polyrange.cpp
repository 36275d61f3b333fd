#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "polyrange/exper.hpp"
#include "polyrange/lpp.hpp"
#include "polyrange/variational.hpp"

using namespace polyrange;

namespace {

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_phase_scan(int d, double alpha, const std::vector<double>& zr, const std::vector<double>& gr, int grid) {
  if (zr.size() != 2 || gr.size() != 2 || !(zr[0] < zr[1]) || !(gr[0] < gr[1]) || grid < 2) {
    throw ValidationError({"phase-scan: ranges must be lo < hi and grid >= 2"});
  }
  const double z[2] = {zr[0], zr[1]}, g[2] = {gr[0], gr[1]};
  std::cout << phase_scan_csv(d, alpha, z, g, grid);
  return kExitOk;
}

int cmd_env_dump(std::uint64_t seed, int d, double alpha, double p, double r) {
  DisorderField f(seed, alpha, p);
  for (int i = 0; i < d; ++i) std::cout << "x" << i + 1 << ',';
  std::cout << "omega\n";
  for (const auto& x : ball_sites(d, r)) {
    for (int c : x) std::cout << c << ',';
    std::cout << format_double(f.omega_at(x)) << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const std::string& path) {
  const auto c = parse_config_file(path);
  Json out = Json::array();
  for (int N : c.N_grid) {
    for (auto seed : c.seeds) {
      DisorderField f(seed, c.model.alpha, c.model.p);
      const auto e = c.estimator == "exact" ? partition_exact(f, c.model, N, {}, c.max_leaves)
                                            : partition_mc(f, c.model, N, c.n_samples, c.mc_seed);
      out.push_back({{"N", N},
                     {"log_value", e.log_value},
                     {"std_err", e.std_err},
                     {"err_scale", to_string(e.err_scale)},
                     {"method", to_string(e.method)},
                     {"seed", seed},
                     {"mc_seed", c.mc_seed},
                     {"n_samples", e.n_samples},
                     {"truncation_bound", e.truncation_bound}});
    }
  }
  print_json(out.size() == 1 ? out[0] : out);
  return kExitOk;
}

struct LimitArgs {
  std::string object;
  int d = 3;
  double alpha = 1.5, p = 0.5, L = 4.0, w_min = 1.0, w_cut = 0.0, h = 1.0, cutoff = 8.0;
  std::uint64_t seed = 1;
  std::size_t horizon = 10000, n = 10000;
};

int cmd_limits(const LimitArgs& a) {
  if (a.object == "W") {
    Stream rng(a.seed);
    const auto pp = sample_ppp(a.d, a.L, a.w_min, a.alpha, a.p, rng);
    const auto w = estimate_W(pp, a.w_cut);
    print_json({{"object", "W"},
                {"value", w.value},
                {"std_err", w.truncation_sd},
                {"method", "compensated atom sum"},
                {"atoms", pp.atoms.size()},
                {"atom_sum", w.atom_sum},
                {"compensator", w.compensator},
                {"w_cut", w.w_cut},
                {"sensitivity", {{"value_at_double_cut", w.value_at_double_cut}, {"delta", w.sensitivity}}}});
  } else if (a.object == "X") {
    DisorderField f(a.seed, a.alpha, a.p);
    const auto x = estimate_X(f, a.d, a.cutoff);
    print_json({{"object", "X"},
                {"value", x.value},
                {"method", "Green-function weighted lattice sum"},
                {"n_sites", x.n_sites},
                {"sensitivity", {{"half_cutoff_value", x.half_cutoff_value}, {"tail_diagnostic", x.tail_diagnostic}}}});
  } else if (a.object == "cd") {
    print_json({{"object", "cd"},
                {"value", c_d_constant(a.d, a.h)},
                {"std_err", 0.0},
                {"method", "Bessel zero"},
                {"lambda1", dirichlet_lambda1(a.d)}});
  } else if (a.object == "gamma_d") {
    const auto g = gamma_d_estimate(a.d, a.horizon, a.n, a.seed);
    Json j{{"object", "gamma_d"},
           {"value", g.non_return},
           {"std_err", g.non_return_se},
           {"method", "non-return frequency"},
           {"sensitivity", {{"horizon_bias_bound", g.bias_bound}}}};
    if (g.has_range_density) {
      j["range_density"] = g.range_density;
      j["range_density_se"] = g.range_density_se;
    }
    j["reference"] = 1.0 / green_function(a.d, Site(static_cast<std::size_t>(a.d), 0));
    print_json(j);
  } else {
    throw ValidationError({"limits.object: must be one of W, X, cd, gamma_d"});
  }
  return kExitOk;
}

WeightedPointProcess read_atoms(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"atoms: cannot open '" + path + "'"});
  WeightedPointProcess pp;
  pp.d = d;
  std::string line;
  int lineno = 0;
  double extent = 1.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (lineno == 1) continue;  // header
      throw ValidationError({"atoms: line " + std::to_string(lineno) + " is not numeric"});
    }
    if (static_cast<int>(v.size()) != d + 1) {
      throw ValidationError({"atoms: line " + std::to_string(lineno) + " needs d coordinates and a weight"});
    }
    Atom at{std::vector<double>(v.begin(), v.end() - 1), v.back()};
    for (double c : at.x) extent = std::max(extent, 2.0 * std::abs(c));
    pp.atoms.push_back(at);
  }
  pp.L = extent;
  return pp;
}

int cmd_variational(const std::string& object, const std::string& atoms, double beta, int d) {
  const auto pp = read_atoms(atoms, d);
  VariationalResult r;
  if (object == "Tbeta") {
    r = solve_T_beta(pp, beta, d);
  } else if (object == "That") {
    r = solve_T_hat_inf(pp, d);
  } else {
    throw ValidationError({"variational.object: must be Tbeta or That"});
  }
  print_json({{"object", object},
              {"value", r.value},
              {"vertices", r.path.vertices},
              {"atoms", r.atoms},
              {"exact", r.exact}});
  return kExitOk;
}

template <class T>
T get_or(const toml::table& t, const char* key, T fallback) {
  const toml::node* n = t.at_path(std::string("bounds.") + key).node();
  if (!n) return fallback;
  auto v = n->value<T>();
  if (!v) throw ValidationError({std::string("bounds.") + key + ": wrong type"});
  return *v;
}

template <class T>
std::vector<T> get_list(const toml::table& t, const char* key, std::vector<T> fallback) {
  const toml::node* n = t.at_path(std::string("bounds.") + key).node();
  if (!n) return fallback;
  const toml::array* a = n->as_array();
  if (!a) throw ValidationError({std::string("bounds.") + key + ": must be an array"});
  std::vector<T> out;
  for (const auto& el : *a) {
    auto v = el.value<T>();
    if (!v) throw ValidationError({std::string("bounds.") + key + ": wrong entry type"});
    out.push_back(*v);
  }
  return out;
}

int cmd_verify_bounds(const std::string& which, const std::string& path) {
  toml::table t;
  try {
    t = toml::parse(read_text_file(path));
  } catch (const toml::parse_error& e) {
    throw ValidationError({std::string("toml: ") + std::string(e.description())});
  }
  const int d = get_or<int>(t, "d", 2);
  const double p = get_or<double>(t, "p", 1.5);
  const auto seed = static_cast<std::uint64_t>(get_or<std::int64_t>(t, "seed", 1));
  std::cout << "which,point,empirical,theory\n";
  if (which == "Ltail") {
    const auto rep = check_L_tail(d, p, get_or<double>(t, "r", 6), get_or<double>(t, "s", 2), get_or<int>(t, "m", 8),
                                  get_or<int>(t, "trials", 1000), seed, get_or<double>(t, "C_d", 2.0));
    for (std::size_t k = 0; k < rep.tail.size(); ++k) {
      std::cout << "Ltail,k=" << k << ',' << format_double(rep.tail[k]) << ',' << format_double(rep.bound[k]) << '\n';
    }
  } else if (which == "energy") {
    const auto t_grid = get_list<double>(t, "t_grid", {0.01, 0.125, 0.25, 0.5, 1, 2, 4, 8, 16, 32});
    const double alpha = get_or<double>(t, "alpha", 1.5);
    const auto rep = check_energy_bound(d, alpha, get_or<double>(t, "field_p", 0.5), get_or<double>(t, "r", 4),
                                        get_or<double>(t, "s", 1.5), p, get_or<int>(t, "N", 12), t_grid,
                                        get_or<int>(t, "seeds", 400),
                                        static_cast<std::size_t>(get_or<std::int64_t>(t, "n_walks", 2000)), seed);
    for (std::size_t i = 0; i < rep.t_grid.size(); ++i) {
      std::cout << "energy,t=" << format_double(rep.t_grid[i]) << ',' << format_double(rep.prob[i]) << ','
                << format_double(std::pow(rep.t_grid[i], rep.theory_slope)) << '\n';
    }
    std::cout << "energy,slope," << format_double(rep.slope) << ',' << format_double(rep.slope_limit) << '\n';
  } else if (which == "lemmaG") {
    const ExperimentConfig c = parse_config_table(t);
    const auto rep = check_lemma_g(c.model, c.N_grid, p, get_or<double>(t, "eps", 0.5), get_or<int>(t, "seeds", 200),
                                   static_cast<std::size_t>(get_or<std::int64_t>(t, "n_walks", 1000)), seed);
    for (const auto& pt : rep.points) {
      std::cout << "lemmaG,N=" << pt.N << ',' << format_double(pt.sum_prob) << ',' << format_double(pt.rate_shape)
                << '\n';
    }
  } else {
    throw ValidationError({"verify-bounds.which: must be Ltail, energy or lemmaG"});
  }
  return kExitOk;
}

int cmd_run(const std::string& path) {
  const auto mf = run_experiment(path);
  print_json(to_json(mf));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyrange: range-penalized polymer simulations"};
  app.require_subcommand(1);

  int d = 2, grid = 50;
  double alpha = 1.5, p = 0.5, r = 4.0, beta = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> zr{-3.0, 2.0}, gr{-1.0, 3.0};
  std::string config, which, object, atoms;
  LimitArgs la;

  auto* scan = app.add_subcommand("phase-scan", "classify a (zeta, gamma) grid; CSV on stdout");
  scan->add_option("--d", d);
  scan->add_option("--alpha", alpha);
  scan->add_option("--zeta-range", zr)->expected(2);
  scan->add_option("--gamma-range", gr)->expected(2);
  scan->add_option("--grid", grid);

  auto* env = app.add_subcommand("env-dump", "write (x, omega_x) for the ball of radius r");
  env->add_option("--seed", seed);
  env->add_option("--d", d);
  env->add_option("--alpha", alpha);
  env->add_option("--p", p);
  env->add_option("--r", r);

  auto* sim = app.add_subcommand("simulate", "estimate log Z_N from a TOML config; JSON on stdout");
  sim->add_option("--config", config)->required();

  auto* lim = app.add_subcommand("limits", "evaluate a limit object; JSON on stdout");
  lim->add_option("--object", la.object)->required()->check(CLI::IsMember({"W", "X", "cd", "gamma_d"}));
  lim->add_option("--d", la.d);
  lim->add_option("--alpha", la.alpha);
  lim->add_option("--p", la.p);
  lim->add_option("--L", la.L, "box half-width for W");
  lim->add_option("--w-min", la.w_min);
  lim->add_option("--w-cut", la.w_cut);
  lim->add_option("--h-hat", la.h);
  lim->add_option("--cutoff", la.cutoff, "lattice radius for X");
  lim->add_option("--horizon", la.horizon);
  lim->add_option("--n", la.n);
  lim->add_option("--seed", la.seed);

  auto* var = app.add_subcommand("variational", "solve T_beta or T_hat_inf on a CSV of atoms");
  var->add_option("--object", object)->required()->check(CLI::IsMember({"Tbeta", "That"}));
  var->add_option("--atoms", atoms)->required();
  var->add_option("--beta", beta);
  var->add_option("--d", d);

  auto* vb = app.add_subcommand("verify-bounds", "empirical bound checks; CSV on stdout");
  vb->add_option("--which", which)->required()->check(CLI::IsMember({"Ltail", "energy", "lemmaG"}));
  vb->add_option("--config", config)->required();

  auto* run = app.add_subcommand("run", "run an experiment config and write outputs plus manifest");
  run->add_option("--config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*scan) return cmd_phase_scan(d, alpha, zr, gr, grid);
    if (*env) return cmd_env_dump(seed, d, alpha, p, r);
    if (*sim) return cmd_simulate(config);
    if (*lim) return cmd_limits(la);
    if (*var) return cmd_variational(object, atoms, beta, d);
    if (*vb) return cmd_verify_bounds(which, config);
    if (*run) return cmd_run(config);
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget refusal: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
