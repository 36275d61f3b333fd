#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyrange {

struct ModelParams {
  int d = 2;
  double alpha = 1.5;
  double p = 0.5;
  double q = 0.5;
  double beta_hat = 1.0;
  double gamma = 0.0;
  double h_hat = 1.0;
  double zeta = 0.0;

  // Zero amplitudes are accepted: they express the reference models with no
  // disorder coupling or no range penalty.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (d < 2) out.push_back("d: must be >= 2");
    if (!(alpha > 0.0) || !(alpha < d)) out.push_back("alpha: must lie in (0, d)");
    if (!(p > 0.0) || !(p < 1.0)) out.push_back("p: must lie in (0, 1)");
    if (!(q > 0.0) || !(q < 1.0)) out.push_back("q: must lie in (0, 1)");
    if (std::abs(p + q - 1.0) > 1e-12) out.push_back("p, q: must sum to 1");
    if (!(beta_hat >= 0.0) || !std::isfinite(beta_hat)) out.push_back("beta_hat: must be finite and >= 0");
    if (!(h_hat >= 0.0) || !std::isfinite(h_hat)) out.push_back("h_hat: must be finite and >= 0");
    if (!std::isfinite(gamma)) out.push_back("gamma: must be finite");
    if (!std::isfinite(zeta)) out.push_back("zeta: must be finite");
    return out;
  }

  void validate() const {
    auto errs = problems();
    if (errs.empty()) return;
    std::string msg = "invalid model parameters:";
    for (const auto& e : errs) msg += " [" + e + "]";
    throw std::invalid_argument(msg);
  }

  double beta_N(double N) const { return beta_hat * std::pow(N, -gamma); }
  double h_N(double N) const { return h_hat * std::pow(N, -zeta); }
};

enum class Region { R1, R2, R3, R4, R5, R6, Boundary, R5Unsolved };

enum class TheoremTag { R1a, R1b_i, R1b_ii, R1c_i, R1c_iia, R1c_iib, B, A, R4, R5a_1, R5a_2, R5a_3, R6 };

inline std::string to_string(Region r) {
  switch (r) {
    case Region::R1: return "R1";
    case Region::R2: return "R2";
    case Region::R3: return "R3";
    case Region::R4: return "R4";
    case Region::R5: return "R5";
    case Region::R6: return "R6";
    case Region::Boundary: return "Boundary";
    case Region::R5Unsolved: return "R5Unsolved";
  }
  return "?";
}

inline std::string to_string(TheoremTag t) {
  switch (t) {
    case TheoremTag::R1a: return "R1a";
    case TheoremTag::R1b_i: return "R1b-i";
    case TheoremTag::R1b_ii: return "R1b-ii";
    case TheoremTag::R1c_i: return "R1c-i";
    case TheoremTag::R1c_iia: return "R1c-iia";
    case TheoremTag::R1c_iib: return "R1c-iib";
    case TheoremTag::B: return "B";
    case TheoremTag::A: return "A";
    case TheoremTag::R4: return "R4";
    case TheoremTag::R5a_1: return "R5a-1";
    case TheoremTag::R5a_2: return "R5a-2";
    case TheoremTag::R5a_3: return "R5a-3";
    case TheoremTag::R6: return "R6";
  }
  return "?";
}

struct RegionReport {
  Region region = Region::Boundary;
  std::optional<double> xi;
  // log Z_N scales as logZ_sign * N^rho. Sign -1: deterministic negative
  // leading order; +1: positive leading order; 0: centred random fluctuations.
  std::optional<double> logZ_scale_exponent;
  int logZ_sign = 0;
  std::optional<TheoremTag> applicable_theorem;
};

// Characteristic lines of the (zeta, gamma) diagram for fixed (d, alpha).
struct DiagramLines {
  int d;
  double alpha;
  double base;   // (d - alpha) / alpha
  double slope;  // (2 alpha - d) / (2 alpha)
  double g1;     // d / (2 alpha)
  bool upper;    // alpha > d/2

  DiagramLines(int d_, double alpha_)
      : d(d_),
        alpha(alpha_),
        base((d_ - alpha_) / alpha_),
        slope((2.0 * alpha_ - d_) / (2.0 * alpha_)),
        g1(d_ / (2.0 * alpha_)),
        upper(2.0 * alpha_ > d_) {}

  // Lower edge of R4/R5 and upper edge of R3 for zeta < 0.
  double lower_line(double zeta) const {
    if (zeta < 0) return zeta + base;
    return upper ? slope * zeta + base : base;
  }
};

inline void check_diagram_args(int d, double alpha) {
  if (d < 2) throw std::invalid_argument("d must be >= 2");
  if (!(alpha > 0.0) || !(alpha < d)) throw std::invalid_argument("alpha must lie in (0, d)");
}

struct Point2 {
  double zeta;
  double gamma;
};

// A polyline in the (zeta, gamma) plane; when ray_end is set the last
// segment continues to infinity.
struct BoundaryCurve {
  std::string name;
  std::vector<Point2> vertices;
  bool ray_end = false;
};

inline std::vector<BoundaryCurve> boundary_curves(int d, double alpha) {
  check_diagram_args(d, alpha);
  const DiagramLines L(d, alpha);
  const bool upper = 2.0 * alpha >= d;  // at alpha = d/2 both diagrams coincide
  const double b = L.base;
  std::vector<BoundaryCurve> out;
  out.push_back({"gamma=zeta+base (zeta<=0)", {{0.0, b}, {-1.0, b - 1.0}}, true});
  out.push_back({"gamma=base (zeta>=0)", {{0.0, b}, {1.0, b}}, true});
  if (upper) {
    out.push_back({"gamma=slope*zeta+base (0<=zeta<=1)", {{0.0, b}, {1.0, L.g1}}, false});
    out.push_back({"gamma=d/(2alpha) (zeta>=1)", {{1.0, L.g1}, {2.0, L.g1}}, true});
    out.push_back({"zeta=1", {{1.0, L.g1}, {1.0, L.g1 + 1.0}}, true});
    const double z = 2.0 / d;
    out.push_back({"zeta=2/d", {{z, L.lower_line(z)}, {z, L.lower_line(z) + 1.0}}, true});
  } else {
    out.push_back({"zeta=1", {{1.0, b}, {1.0, b + 1.0}}, true});
    const double z = 2.0 / d;
    out.push_back({"zeta=2/d", {{z, b}, {z, b + 1.0}}, true});
  }
  out.push_back({"zeta=-1", {{-1.0, b - 1.0}, {-1.0, b}}, true});
  return out;
}

namespace detail {

inline double segment_distance(Point2 pt, Point2 a, Point2 b, bool ray) {
  const double vx = b.zeta - a.zeta, vy = b.gamma - a.gamma;
  const double wx = pt.zeta - a.zeta, wy = pt.gamma - a.gamma;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::max(t, 0.0);
  if (!ray) t = std::min(t, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

inline double distance_to_boundary(int d, double alpha, Point2 pt) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : boundary_curves(d, alpha)) {
    for (std::size_t i = 0; i + 1 < c.vertices.size(); ++i) {
      const bool ray = c.ray_end && i + 2 == c.vertices.size();
      best = std::min(best, detail::segment_distance(pt, c.vertices[i], c.vertices[i + 1], ray));
    }
  }
  return best;
}

inline constexpr double kBoundaryTolerance = 1e-12;

namespace detail {

// Region membership from the defining inequalities. With closed = true the
// inequalities are relaxed to their closures, which resolves boundary points
// to the first matching region in R1..R6 order.
inline std::optional<Region> raw_region(const DiagramLines& L, double z, double g, bool closed) {
  auto lt = [closed](double a, double b) { return closed ? a <= b : a < b; };
  const double lower = L.lower_line(z);
  if (L.upper) {
    if (lt(1.0, z) && lt(L.g1, g)) return Region::R1;
    if (lt(0.0, z) && lt(L.base, g) && lt(g, std::min(L.slope * z + L.base, L.g1))) return Region::R2;
    if (lt(g, std::min(z, 0.0) + L.base)) return Region::R3;
    if (lt(2.0 / L.d, z) && lt(z, 1.0) && lt(lower, g)) return Region::R4;
    if (lt(-1.0, z) && lt(z, 2.0 / L.d) && lt(lower, g)) return Region::R5;
    if (lt(z, -1.0) && lt(z + L.base, g)) return Region::R6;
  } else {
    if (lt(1.0, z) && lt(L.base, g)) return Region::R1;
    if (lt(g, std::min(z, 0.0) + L.base)) return Region::R3;
    if (lt(2.0 / L.d, z) && lt(z, 1.0) && lt(L.base, g)) return Region::R4;
    if (lt(-1.0, z) && lt(z, 2.0 / L.d) && lt(std::min(z, 0.0) + L.base, g)) return Region::R5;
    if (lt(z, -1.0) && lt(z + L.base, g)) return Region::R6;
  }
  return std::nullopt;
}

inline std::optional<TheoremTag> r1_tag(const ModelParams& m) {
  const double a = m.alpha;
  const int d = m.d;
  // Sub-case split of the intermediate-alpha theorems.
  const bool new_phase = m.zeta < m.gamma + d * (a - 1.0) / (2.0 * a);
  if (2.0 * a > d) {
    if (a > 2.0) return TheoremTag::R1a;
    if (a < 2.0) return new_phase ? TheoremTag::R1b_i : TheoremTag::R1b_ii;
    return std::nullopt;
  }
  const double transience = d > 2 ? static_cast<double>(d) / (d - 2) : std::numeric_limits<double>::infinity();
  if (a > transience) return TheoremTag::R1c_i;
  if (a < transience && a != 1.0) return new_phase ? TheoremTag::R1c_iia : TheoremTag::R1c_iib;
  return std::nullopt;
}

}  // namespace detail

// Predicted end-to-end exponent of each region.
inline double region_xi(Region r, const ModelParams& m) {
  switch (r) {
    case Region::R1: return 0.5;
    case Region::R2: return m.alpha * (1.0 - m.gamma) / (2.0 * m.alpha - m.d);
    case Region::R3: return 1.0;
    case Region::R4: return m.zeta / 2.0;
    case Region::R5: return (1.0 + m.zeta) / (m.d + 2.0);
    case Region::R6: return 0.0;
    default: throw std::invalid_argument("region_xi: no prediction for " + to_string(r));
  }
}

inline RegionReport classify_region(const ModelParams& m, bool strict_interior = true) {
  check_diagram_args(m.d, m.alpha);
  if (2.0 * m.alpha == m.d) throw std::invalid_argument("classify_region: alpha = d/2 is a critical value and is unsupported");
  const DiagramLines L(m.d, m.alpha);
  const double z = m.zeta, g = m.gamma;

  RegionReport rep;
  std::optional<Region> r = detail::raw_region(L, z, g, false);
  if (strict_interior && (!r || distance_to_boundary(m.d, m.alpha, {z, g}) <= kBoundaryTolerance)) {
    rep.region = Region::Boundary;
    return rep;
  }
  if (!r) r = detail::raw_region(L, z, g, true);
  if (!r) {
    rep.region = Region::Boundary;
    return rep;
  }
  rep.region = *r;
  const int d = m.d;
  const double a = m.alpha;

  switch (*r) {
    case Region::R1: {
      rep.xi = 0.5;
      rep.applicable_theorem = detail::r1_tag(m);
      if (!rep.applicable_theorem) break;
      switch (*rep.applicable_theorem) {
        case TheoremTag::R1a:
          rep.logZ_scale_exponent = (d == 3 ? 0.25 : 0.0) - g;
          break;
        case TheoremTag::R1c_i:
          rep.logZ_scale_exponent = -g;
          break;
        case TheoremTag::R1b_i:
        case TheoremTag::R1c_iia:
          rep.logZ_scale_exponent = 1.0 - z;
          rep.logZ_sign = -1;
          break;
        case TheoremTag::R1b_ii:
          rep.logZ_scale_exponent = d / (2.0 * a) - g - (d == 2 ? 0.0 : 0.5);
          break;
        case TheoremTag::R1c_iib:
          rep.logZ_scale_exponent = d / (2.0 * a) - g - (d == 2 ? 0.0 : d / 2.0 - 1.0);
          break;
        default:
          break;
      }
      break;
    }
    case Region::R2:
      rep.xi = region_xi(Region::R2, m);
      rep.logZ_scale_exponent = 2.0 * *rep.xi - 1.0;
      rep.logZ_sign = 1;
      rep.applicable_theorem = TheoremTag::B;
      break;
    case Region::R3:
      rep.xi = 1.0;
      rep.logZ_scale_exponent = d / a - g;
      rep.logZ_sign = 1;
      rep.applicable_theorem = TheoremTag::A;
      break;
    case Region::R4:
      rep.xi = z / 2.0;
      rep.logZ_scale_exponent = 1.0 - z;
      rep.logZ_sign = -1;
      rep.applicable_theorem = TheoremTag::R4;
      break;
    case Region::R5: {
      if (L.upper) {
        if (g >= L.g1) {
          rep.applicable_theorem = TheoremTag::R5a_3;
        } else if (g > z + L.base) {
          rep.applicable_theorem = TheoremTag::R5a_1;
        } else {
          rep.region = Region::R5Unsolved;
          return rep;
        }
      } else {
        rep.applicable_theorem = g > L.base ? TheoremTag::R5a_2 : TheoremTag::R5a_1;
      }
      rep.xi = (1.0 + z) / (d + 2.0);
      rep.logZ_scale_exponent = 1.0 - 2.0 * *rep.xi;
      rep.logZ_sign = -1;
      break;
    }
    case Region::R6:
      rep.xi = 0.0;
      rep.logZ_scale_exponent = -z;
      rep.logZ_sign = -1;
      rep.applicable_theorem = TheoremTag::R6;
      break;
    default:
      break;
  }
  return rep;
}

struct HeuristicOrders {
  double energy_exp;
  double range_exp;
  double entropy_exp;
};

inline HeuristicOrders heuristic_orders(const ModelParams& m, double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("heuristic_orders: xi must lie in [0, 1]");
  HeuristicOrders h;
  h.energy_exp = m.d * xi / m.alpha - m.gamma;
  h.range_exp = std::min(m.d * xi, 1.0) - m.zeta;
  h.entropy_exp = xi <= 0.5 ? 1.0 - 2.0 * xi : 2.0 * xi - 1.0;
  return h;
}

}  // namespace polyrange
