#pragma once

// Nested level-set solver for multi-to-one dimensional matching. For each
// husband type y the split value k(y) solves
//
//   h(y, k) = mu[{x : s_y(x, y) <= k}] - nu((-inf, y)) = 0,
//
// then v' = k, F(x) is the y whose potential indifference set contains x,
// and u(x) = s(x, F(x)) - v(F(x)).

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "matchkit/geometry.hpp"
#include "matchkit/surplus.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

/// A declared sub-problem: x in x_box is matched with y in [y_lo, y_hi].
struct DecompositionBlock {
  Box x_box;
  double y_lo = 0, y_hi = 1;
};

struct SolverConfig {
  std::size_t y_grid = 257;
  double split_tol = 1e-6;
  double plateau_tol = 1e-6;
  int max_iter = 80;
  double v0 = 0.0;
  double mass_tol = 1e-4;
  double root_tol = 1e-5;       // |s_y - k| treated as zero when counting roots
  double inclusion_tol = 1e-4;  // margin for monotone-inclusion witnesses
  double angle_tol = 1e-2;      // radians, transversality
  double stab_tol = 1e-4;
  std::size_t diag_grid = 65;   // sample vertices per axis for diagnostics (m = 2)
  bool diagnostics = true;
  std::vector<DecompositionBlock> decomposition;

  void validate() const {
    if (y_grid < 3) throw ConfigError("solver.y_grid must be >= 3");
    if (diag_grid < 3) throw ConfigError("solver.diag_grid must be >= 3");
    if (max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
    for (double t : {split_tol, plateau_tol, mass_tol, root_tol, inclusion_tol, angle_tol, stab_tol})
      if (!(t > 0)) throw ConfigError("solver tolerances must be positive");
    for (const auto& b : decomposition)
      if (!(b.y_lo < b.y_hi)) throw ConfigError("decomposition block needs y_lo < y_hi");
  }
};

/// k on a uniform y-grid with piecewise-linear interpolation and the
/// exact antiderivative v.
struct SplitFunction {
  std::vector<double> y, k_minus, k_plus, k, h_residual;
  std::vector<double> v;  // v at grid nodes, v[0] = v0
  std::vector<std::size_t> plateaus;

  std::size_t size() const { return y.size(); }
  double y_lo() const { return y.front(); }
  double y_hi() const { return y.back(); }
  double dy() const { return (y.back() - y.front()) / static_cast<double>(y.size() - 1); }

  /// Segment index i with y in [y_i, y_{i+1}].
  std::size_t segment(double t) const {
    const double r = (t - y.front()) / dy();
    if (!(r > 0)) return 0;
    const std::size_t i = static_cast<std::size_t>(r);
    return std::min(i, y.size() - 2);
  }

  double k_at(double t) const {
    t = std::clamp(t, y_lo(), y_hi());
    const std::size_t i = segment(t);
    const double w = (t - y[i]) / (y[i + 1] - y[i]);
    return k[i] + w * (k[i + 1] - k[i]);
  }

  /// Slope of the interpolant on the segment containing t.
  double k_slope(double t) const {
    const std::size_t i = segment(std::clamp(t, y_lo(), y_hi()));
    return (k[i + 1] - k[i]) / (y[i + 1] - y[i]);
  }

  /// Centered difference at interior nodes, one-sided at the ends.
  double k_prime_node(std::size_t i) const {
    if (i == 0) return (k[1] - k[0]) / (y[1] - y[0]);
    if (i + 1 == y.size()) return (k[i] - k[i - 1]) / (y[i] - y[i - 1]);
    return (k[i + 1] - k[i - 1]) / (y[i + 1] - y[i - 1]);
  }

  double v_at(double t) const {
    t = std::clamp(t, y_lo(), y_hi());
    const std::size_t i = segment(t);
    const double d = t - y[i], h = y[i + 1] - y[i];
    return v[i] + k[i] * d + 0.5 * (k[i + 1] - k[i]) * d * d / h;
  }

  void integrate(double v0) {
    v.assign(y.size(), v0);
    for (std::size_t i = 1; i < y.size(); ++i) v[i] = v[i - 1] + 0.5 * (k[i - 1] + k[i]) * (y[i] - y[i - 1]);
  }
};

namespace detail {

/// Split bracket at one y on a prepared sublevel field. Returns
/// {k_minus, k_plus, h(k_plus)}.
struct SplitResult {
  double k_minus, k_plus, h;
};

inline SplitResult split_on_field(SublevelMass& field, double target, const SolverConfig& cfg) {
  const double eps = cfg.split_tol / 8;
  const double span = std::max(1.0, field.max_value() - field.min_value());
  const double lo0 = field.min_value() - 1e-9 * span;
  const double hi0 = field.max_value() + 1e-9 * span;
  auto h = [&](double k) { return field.mass(k) - target; };

  field.reset();
  if (h(hi0) < -eps || h(lo0) > eps)
    throw InfeasibleError("no sign change of h in the s_y range (mass mismatch)");

  // k_minus: boundary of {k : h(k) < -eps}.
  double a = lo0, b = hi0;
  double h_lo = 0, h_hi = 0;
  if (h(lo0) < -eps) {
    for (int it = 0; it < cfg.max_iter; ++it) {
      const double mid = 0.5 * (a + b);
      if (b - a <= 1e-13 * std::max(1.0, std::abs(mid))) break;
      if (h(mid) < -eps) a = mid; else b = mid;
      field.restrict(a, b);
    }
  } else {
    b = field.min_value();
  }
  const double k_minus = b;

  // k_plus: boundary of {k : h(k) <= eps}.
  field.reset();
  a = lo0;
  b = hi0;
  if (h(hi0) > eps) {
    for (int it = 0; it < cfg.max_iter; ++it) {
      const double mid = 0.5 * (a + b);
      if (b - a <= 1e-13 * std::max(1.0, std::abs(mid))) break;
      if (h(mid) <= eps) a = mid; else b = mid;
      field.restrict(a, b);
    }
    h_lo = h(a);
    h_hi = h(b);
  } else {
    a = field.max_value();
    h_lo = h_hi = h(a);
  }
  const double k_plus = a;
  field.reset();
  // The quadrature h is a step function of k; report the smaller |h| at
  // the two ends of the final (width ~1e-13) bracket.
  const double hk = std::abs(h_lo) <= std::abs(h_hi) ? h_lo : h_hi;
  return {std::min(k_minus, k_plus), k_plus, hk};
}

inline std::function<double(std::span<const double>)> sy_field(const Surplus& s, double y) {
  return [&s, y](std::span<const double> x) { return s.d_y(x, y); };
}

}  // namespace detail

/// mu[X_<=(y, k)] - nu((-inf, y)).
inline double h_value(const Surplus& s, const DensityMeasure& mu, const Measure1D& nu, double y, double k) {
  SublevelMass field(mu.grid(), detail::sy_field(s, y));
  return field.mass(k) - nu_cdf(nu, y);
}

/// Maximal interval [k_minus, k_plus] of zeros of k -> h(y, k).
inline std::pair<double, double> solve_split(const Surplus& s, const DensityMeasure& mu, const Measure1D& nu,
                                             double y, const SolverConfig& cfg = {}) {
  SublevelMass field(mu.grid(), detail::sy_field(s, y));
  const auto r = detail::split_on_field(field, nu_cdf(nu, y), cfg);
  return {r.k_minus, r.k_plus};
}

/// Split function on a uniform grid over the support of nu.
inline SplitFunction compute_split(const Surplus& s, const DensityMeasure& mu, const Measure1D& nu,
                                   const SolverConfig& cfg) {
  cfg.validate();
  if (s.y_dim() != 1) throw ConfigError("level-set solver needs a scalar husband type (n = 1)");
  if (s.x_dim() != mu.dim()) throw ConfigError("surplus x dimension does not match the domain");
  SplitFunction sp;
  sp.y = linspace(nu.lo(), nu.hi(), cfg.y_grid);
  const std::size_t n = sp.y.size();
  sp.k_minus.resize(n);
  sp.k_plus.resize(n);
  sp.h_residual.resize(n);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      SublevelMass field(mu.grid(), detail::sy_field(s, sp.y[i]));
      const auto r = detail::split_on_field(field, nu_cdf(nu, sp.y[i]), cfg);
      sp.k_minus[i] = r.k_minus;
      sp.k_plus[i] = r.k_plus;
      sp.h_residual[i] = r.h;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw InfeasibleError("split at y=" + std::to_string(sp.y[i]) + ": " + errors[i]);
  sp.k = sp.k_plus;
  for (std::size_t i = 0; i < n; ++i)
    if (sp.k_plus[i] - sp.k_minus[i] > cfg.plateau_tol) sp.plateaus.push_back(i);
  sp.integrate(cfg.v0);
  return sp;
}

// ---------------------------------------------------------------------------
// Matching a single x

enum class BoundaryAssignment : std::uint8_t { kNone, kLow, kHigh };

struct MatchResult {
  double y = 0;
  std::vector<double> roots;  // every sign change of s_y(x, .) - k(.)
  bool unique = true;
  bool multi_valued = false;  // x lies in several declared blocks
  BoundaryAssignment boundary = BoundaryAssignment::kNone;
};

namespace detail {

/// Proportionate-splitting roots for x against one split function, via the
/// sign of d(y) = s_y(x, y) - k(y). Since h(y, .) is monotone with zero at
/// k(y), sign d(y) = sign h(y, s_y(x, y)).
inline MatchResult match_on_split(const Surplus& s, const SplitFunction& sp, std::span<const double> x,
                                  double root_tol) {
  const std::size_t n = sp.size();
  auto d = [&](double t) { return s.d_y(x, t) - sp.k_at(t); };
  MatchResult r;
  int prev_sign = 0;
  std::size_t prev_idx = 0;
  std::ptrdiff_t last_pos = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const double di = s.d_y(x, sp.y[i]) - sp.k[i];
    const int sg = di > root_tol ? 1 : (di < -root_tol ? -1 : 0);
    if (sg > 0) last_pos = static_cast<std::ptrdiff_t>(i);
    if (sg == 0) continue;
    if (prev_sign != 0 && sg != prev_sign) {
      const double lo = sp.y[prev_idx], hi = sp.y[i];
      r.roots.push_back(bisect_root(d, lo, hi, 1e-13));
    }
    prev_sign = sg;
    prev_idx = i;
  }
  r.unique = r.roots.size() <= 1;
  if (last_pos >= 0 && static_cast<std::size_t>(last_pos) + 1 == n) {
    r.y = sp.y_hi();
    r.boundary = BoundaryAssignment::kHigh;
  } else {
    // d may stay in (0, root_tol] past the last clearly positive node, or
    // never leave the band at all (x nearly indifferent across y).
    std::size_t b = static_cast<std::size_t>(last_pos + 1);
    while (b < n && s.d_y(x, sp.y[b]) - sp.k[b] > 0) ++b;
    if (b == 0) {
      r.y = sp.y_lo();
      r.boundary = BoundaryAssignment::kLow;
    } else if (b == n) {
      r.y = sp.y_hi();
      r.boundary = BoundaryAssignment::kHigh;
    } else {
      const auto [lo, hi] = bisect_predicate(sp.y[b - 1], sp.y[b], [&](double t) { return d(t) > 0; }, 200, 1e-15);
      r.y = 0.5 * (lo + hi);
    }
  }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sample grids and iso-sets

/// Tensor vertex grid over a domain's bounding box, with membership flags.
struct SampleGrid {
  std::size_t m = 0, n = 0;
  Point lo, width;
  std::vector<Point> points;
  std::vector<char> inside;

  static SampleGrid over(const Domain& domain, std::size_t n, const std::optional<Box>& clip = std::nullopt) {
    SampleGrid g;
    g.m = domain.dim();
    g.n = n;
    Box bb = clip ? *clip : domain.bounding_box();
    g.lo = bb.lo;
    g.width.resize(g.m);
    for (std::size_t i = 0; i < g.m; ++i) g.width[i] = (bb.hi[i] - bb.lo[i]) / static_cast<double>(n - 1);
    std::size_t total = 1;
    for (std::size_t i = 0; i < g.m; ++i) total *= n;
    g.points.resize(total, Point(g.m));
    g.inside.resize(total);
    for (std::size_t v = 0; v < total; ++v) {
      std::size_t r = v;
      for (std::size_t i = 0; i < g.m; ++i) {
        const std::size_t idx = r % n;
        r /= n;
        g.points[v][i] = idx + 1 == n ? bb.hi[i] : bb.lo[i] + g.width[i] * static_cast<double>(idx);
      }
      g.inside[v] = domain.contains(g.points[v]) ? 1 : 0;
    }
    return g;
  }

  double cell_diagonal() const {
    double s = 0;
    for (double w : width) s += w * w;
    return std::sqrt(s);
  }
};

struct IsoSet {
  std::vector<std::vector<Point>> polylines;  // m = 2 only
  std::vector<Point> points;                  // every extracted point
  bool empty() const { return points.empty(); }
};

/// Zero set of f on a sample grid. Marching squares with chained
/// polylines for m = 2; edge crossings for other m. Without a domain only
/// cells with every corner inside are used; with one, f must be finite on
/// the whole grid and extracted pieces are clipped to the domain.
inline IsoSet extract_iso_set(const SampleGrid& g, std::span<const double> f, const Domain* domain = nullptr) {
  IsoSet out;
  const std::size_t n = g.n;
  auto crossing = [&](std::size_t a, std::size_t b) {
    const double t = f[a] / (f[a] - f[b]);
    Point p(g.m);
    for (std::size_t i = 0; i < g.m; ++i) p[i] = g.points[a][i] + t * (g.points[b][i] - g.points[a][i]);
    return p;
  };
  auto ok = [&](std::size_t v) { return (domain || g.inside[v]) && std::isfinite(f[v]); };
  auto keep = [&](const Point& p) { return !domain || domain->contains(p); };
  auto in = [&](std::size_t v) { return f[v] <= 0; };

  if (g.m != 2) {
    std::size_t stride = 1;
    for (std::size_t axis = 0; axis < g.m; ++axis) {
      for (std::size_t v = 0; v < g.points.size(); ++v) {
        if ((v / stride) % n + 1 >= n) continue;
        const std::size_t w = v + stride;
        if (ok(v) && ok(w) && in(v) != in(w)) {
          Point p = crossing(v, w);
          if (keep(p)) out.points.push_back(std::move(p));
        }
      }
      stride *= n;
    }
    return out;
  }

  // Edge ids: 2*(i + n*j) horizontal from (i,j), +1 vertical from (i,j).
  std::map<std::size_t, Point> edge_point;
  std::vector<std::pair<std::size_t, std::size_t>> segs;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t c0 = i + n * j, c1 = c0 + 1, c2 = c0 + n + 1, c3 = c0 + n;
      if (!(ok(c0) && ok(c1) && ok(c2) && ok(c3))) continue;
      const bool b0 = in(c0), b1 = in(c1), b2 = in(c2), b3 = in(c3);
      const std::size_t e0 = 2 * c0, e1 = 2 * c1 + 1, e2 = 2 * c3, e3 = 2 * c0 + 1;
      auto edge = [&](std::size_t id, std::size_t a, std::size_t b) {
        if (!edge_point.count(id)) edge_point.emplace(id, crossing(a, b));
      };
      std::vector<std::size_t> cut;
      if (b0 != b1) { edge(e0, c0, c1); cut.push_back(e0); }
      if (b1 != b2) { edge(e1, c1, c2); cut.push_back(e1); }
      if (b3 != b2) { edge(e2, c3, c2); cut.push_back(e2); }
      if (b0 != b3) { edge(e3, c0, c3); cut.push_back(e3); }
      if (cut.size() == 2) {
        segs.emplace_back(cut[0], cut[1]);
      } else if (cut.size() == 4) {
        const bool center_in = 0.25 * (f[c0] + f[c1] + f[c2] + f[c3]) <= 0;
        if (b0 == center_in) {  // c0 and c2 connect through the center
          segs.emplace_back(e0, e1);
          segs.emplace_back(e2, e3);
        } else {
          segs.emplace_back(e3, e0);
          segs.emplace_back(e1, e2);
        }
      }
    }
  }
  if (domain) {
    std::erase_if(segs, [&](const auto& sg) { return !keep(edge_point.at(sg.first)) || !keep(edge_point.at(sg.second)); });
  }
  std::map<std::size_t, std::vector<std::size_t>> adj;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    adj[segs[s].first].push_back(s);
    adj[segs[s].second].push_back(s);
  }
  std::vector<char> used(segs.size(), 0);
  auto walk = [&](std::size_t start_edge) {
    std::vector<Point> line{edge_point.at(start_edge)};
    std::size_t cur = start_edge;
    for (;;) {
      std::size_t next_seg = segs.size();
      for (std::size_t s : adj[cur])
        if (!used[s]) { next_seg = s; break; }
      if (next_seg == segs.size()) break;
      used[next_seg] = 1;
      cur = segs[next_seg].first == cur ? segs[next_seg].second : segs[next_seg].first;
      line.push_back(edge_point.at(cur));
    }
    return line;
  };
  for (const auto& [e, list] : adj)
    if (list.size() == 1 && !used[list[0]]) out.polylines.push_back(walk(e));
  for (std::size_t s = 0; s < segs.size(); ++s)
    if (!used[s]) out.polylines.push_back(walk(segs[s].first));
  for (const auto& [e, list] : adj) out.points.push_back(edge_point.at(e));
  return out;
}

// ---------------------------------------------------------------------------
// Nestedness diagnostics

enum class Verdict : std::uint8_t { kNested, kNotNested, kInconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kNested: return "nested";
    case Verdict::kNotNested: return "not_nested";
    default: return "inconclusive";
  }
}

struct InclusionViolation {
  double y, y2;
  Point x;
};

struct SplittingFailure {
  Point x;
  std::vector<double> roots;
};

struct NestednessReport {
  Verdict verdict = Verdict::kInconclusive;
  std::vector<InclusionViolation> monotone_inclusion_violations;
  std::size_t inclusion_violation_count = 0;
  double dynamic_criterion_min = std::numeric_limits<double>::infinity();
  double dynamic_endpoint_min = std::numeric_limits<double>::infinity();
  std::vector<SplittingFailure> unique_splitting_failures;
  std::size_t splitting_failure_count = 0;
  std::vector<double> transversality_flags;
  std::size_t x_samples = 0;
  std::size_t iso_points = 0;
};

namespace detail {

inline double angle_between(std::span<const double> a, std::span<const double> b) {
  const double c = dot(a, b) / (norm(a) * norm(b));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Angle from direction n to the 2-D cone spanned by unit normals a, b.
inline double angle_to_cone2(std::span<const double> n, std::span<const double> a, std::span<const double> b) {
  auto cross = [](std::span<const double> p, std::span<const double> q) { return p[0] * q[1] - p[1] * q[0]; };
  const double ab = cross(a, b);
  if (std::abs(ab) > 1e-12) {
    if (cross(a, n) * ab >= 0 && cross(n, b) * ab >= 0 && dot(n, a) + dot(n, b) > -1e-12) return 0.0;
  }
  return std::min(angle_between(n, a), angle_between(n, b));
}

/// True if the iso-set normal at a boundary point lies (up to sign) in the
/// cone of outward boundary normals there.
inline bool non_transversal(std::span<const double> n_iso, const std::vector<Point>& normals, double angle_tol) {
  if (normals.empty() || norm(n_iso) == 0) return false;
  Point neg(n_iso.begin(), n_iso.end());
  for (double& c : neg) c = -c;
  for (const Point& nb : normals)
    if (angle_between(n_iso, nb) <= angle_tol || angle_between(neg, nb) <= angle_tol) return true;
  if (n_iso.size() == 2)
    for (std::size_t a = 0; a < normals.size(); ++a)
      for (std::size_t b = a + 1; b < normals.size(); ++b)
        if (angle_to_cone2(n_iso, normals[a], normals[b]) <= angle_tol ||
            angle_to_cone2(neg, normals[a], normals[b]) <= angle_tol)
          return true;
  return false;
}

/// s_y, or NaN where the surplus is undefined.
inline double safe_d_y(const Surplus& s, std::span<const double> x, double y) {
  try {
    return s.d_y(x, y);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline std::size_t default_diag_grid(std::size_t m, std::size_t configured) {
  switch (m) {
    case 1: return std::max<std::size_t>(configured * configured / 8, 257);
    case 2: return configured;
    default: return std::max<std::size_t>(configured / 4, 9);
  }
}

}  // namespace detail

/// Sample-based nestedness checks on a computed split. `clip` restricts the
/// x samples to a declared block.
inline NestednessReport nestedness_diagnostics(const Surplus& s, const DensityMeasure& mu, const Measure1D& nu,
                                               const SplitFunction& split, const SolverConfig& cfg,
                                               const std::optional<Box>& clip = std::nullopt) {
  NestednessReport rep;
  const Domain& domain = mu.domain();
  const std::size_t m = domain.dim();
  const SampleGrid g = SampleGrid::over(domain, detail::default_diag_grid(m, cfg.diag_grid), clip);
  const std::size_t ny = split.size();
  const std::size_t npts = g.points.size();

  // D[p * ny + i] = s_y(x_p, y_i) - k_i
  std::vector<double> D(npts * ny, std::numeric_limits<double>::quiet_NaN());
  // Filled outside the domain too so iso-sets can be clipped exactly.
  parallel_for(npts, [&](std::size_t p) {
    for (std::size_t i = 0; i < ny; ++i) D[p * ny + i] = detail::safe_d_y(s, g.points[p], split.y[i]) - split.k[i];
  });

  constexpr std::size_t kMaxWitnesses = 200;
  for (std::size_t p = 0; p < npts; ++p) {
    if (!g.inside[p]) continue;
    ++rep.x_samples;
    const double* d = &D[p * ny];
    // (a) monotone inclusion: x in X_<=(y_i) but not in X_<(y_j), j > i.
    std::ptrdiff_t first_in = -1;
    for (std::size_t j = 0; j < ny; ++j) {
      if (first_in < 0) {
        if (d[j] <= -cfg.inclusion_tol) first_in = static_cast<std::ptrdiff_t>(j);
        continue;
      }
      const double yi = split.y[static_cast<std::size_t>(first_in)];
      if (d[j] >= cfg.inclusion_tol && nu_cdf(nu, split.y[j]) > nu_cdf(nu, yi)) {
        ++rep.inclusion_violation_count;
        if (rep.monotone_inclusion_violations.size() < kMaxWitnesses)
          rep.monotone_inclusion_violations.push_back({yi, split.y[j], g.points[p]});
        break;
      }
    }
    // (c) unique splitting
    int prev = 0;
    std::size_t changes = 0;
    for (std::size_t j = 0; j < ny; ++j) {
      const int sg = d[j] > cfg.root_tol ? 1 : (d[j] < -cfg.root_tol ? -1 : 0);
      if (sg == 0) continue;
      if (prev != 0 && sg != prev) ++changes;
      prev = sg;
    }
    if (changes > 1) {
      ++rep.splitting_failure_count;
      if (rep.unique_splitting_failures.size() < kMaxWitnesses) {
        const MatchResult r = detail::match_on_split(s, split, g.points[p], cfg.root_tol);
        rep.unique_splitting_failures.push_back({g.points[p], r.roots});
      }
    }
  }

  // (b) dynamic criterion and (d) transversality on iso-sets.
  std::vector<double> field(npts);
  std::set<double> flagged;
  // Faces on grid lines are hit exactly; curved or off-grid faces are
  // only resolved to a cell.
  const double tol_boundary = std::holds_alternative<Box>(domain.kind()) ? 1e-9 : 1.01 * g.cell_diagonal();
  for (std::size_t i = 0; i < ny; ++i) {
    for (std::size_t p = 0; p < npts; ++p) field[p] = D[p * ny + i];
    const IsoSet iso = extract_iso_set(g, field, &domain);
    const double kp = split.k_prime_node(i);
    const bool endpoint = i == 0 || i + 1 == ny;
    for (const Point& x : iso.points) {
      const double val = kp - s.d_yy(x, split.y[i]);
      if (endpoint) {
        rep.dynamic_endpoint_min = std::min(rep.dynamic_endpoint_min, val);
      } else {
        rep.dynamic_criterion_min = std::min(rep.dynamic_criterion_min, val);
        ++rep.iso_points;
      }
    }
    if (endpoint || m != 2) continue;
    for (const auto& line : iso.polylines) {
      for (const Point* e : {&line.front(), &line.back()}) {
        auto normals = domain.boundary_normals(*e, 1e-9);
        if (normals.empty()) normals = domain.boundary_normals(*e, tol_boundary);
        if (normals.empty()) continue;
        const Point n_iso = s.grad_x_dy(*e, split.y[i]);
        if (detail::non_transversal(n_iso, normals, cfg.angle_tol)) flagged.insert(split.y[i]);
      }
    }
  }
  rep.transversality_flags.assign(flagged.begin(), flagged.end());

  if (rep.inclusion_violation_count > 0 || rep.splitting_failure_count > 0)
    rep.verdict = Verdict::kNotNested;
  else if (rep.dynamic_criterion_min >= 0)
    rep.verdict = Verdict::kNested;
  else
    rep.verdict = Verdict::kInconclusive;
  return rep;
}

// ---------------------------------------------------------------------------
// Matching solution

struct MatchingPiece {
  std::optional<Box> x_box;  // nullopt: whole domain
  std::shared_ptr<const DensityMeasure> mu;
  Measure1D nu;
  SplitFunction split;
  NestednessReport report;
};

class MatchingSolution {
 public:
  MatchingSolution(SurplusPtr s, std::shared_ptr<const DensityMeasure> mu, Measure1D nu, SolverConfig cfg)
      : s_(std::move(s)), mu_(std::move(mu)), nu_(std::move(nu)), cfg_(std::move(cfg)) {}

  const Surplus& surplus() const { return *s_; }
  SurplusPtr surplus_ptr() const { return s_; }
  const DensityMeasure& mu() const { return *mu_; }
  const Measure1D& nu() const { return nu_; }
  const SolverConfig& config() const { return cfg_; }

  /// Report for the undecomposed problem.
  const NestednessReport& nested() const { return report_; }
  bool decomposed() const { return pieces_.size() > 1 || pieces_.front().x_box.has_value(); }
  const std::vector<MatchingPiece>& pieces() const { return pieces_; }
  /// Split of the undecomposed problem.
  const SplitFunction& split() const { return whole_split_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  MatchResult match(std::span<const double> x) const {
    if (pieces_.size() == 1 && !pieces_.front().x_box)
      return detail::match_on_split(*s_, pieces_.front().split, x, cfg_.root_tol);
    MatchResult best;
    bool found = false;
    std::vector<double> values;
    for (const MatchingPiece& pc : pieces_) {
      if (pc.x_box && !pc.x_box->contains(x)) continue;
      MatchResult r = detail::match_on_split(*s_, pc.split, x, cfg_.root_tol);
      values.push_back(r.y);
      if (!found || r.y > best.y) best = r;
      found = true;
    }
    if (!found) {
      // Outside every block (e.g. quadrature point just off a box face):
      // fall back to the nearest block.
      double best_dist = std::numeric_limits<double>::infinity();
      const MatchingPiece* nearest = &pieces_.front();
      for (const MatchingPiece& pc : pieces_) {
        double d2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double c = std::clamp(x[i], pc.x_box->lo[i], pc.x_box->hi[i]);
          d2 += (c - x[i]) * (c - x[i]);
        }
        if (d2 < best_dist) {
          best_dist = d2;
          nearest = &pc;
        }
      }
      return detail::match_on_split(*s_, nearest->split, x, cfg_.root_tol);
    }
    if (values.size() > 1) {
      best.multi_valued = true;
      std::sort(values.begin(), values.end());
      best.roots = values;
      best.unique = false;
    }
    return best;
  }

  double F(std::span<const double> x) const { return match(x).y; }

  double k(double y) const { return piece_for_y(y).split.k_at(y); }

  double v(double y) const {
    const MatchingPiece& pc = piece_for_y(y);
    return pc.split.v_at(y);
  }

  double u(std::span<const double> x) const {
    const double y = F(x);
    return s_->value(x, y) - v(y);
  }

  struct Row {
    double y, k, v;
  };
  /// (y, k, v) at every grid node of every piece, ordered by y.
  std::vector<Row> grid_rows() const {
    std::vector<Row> rows;
    for (const MatchingPiece& pc : pieces_)
      for (std::size_t i = 0; i < pc.split.size(); ++i) rows.push_back({pc.split.y[i], pc.split.k[i], pc.split.v[i]});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.y < b.y; });
    return rows;
  }

 private:
  friend MatchingSolution build_matching(SurplusPtr, std::shared_ptr<const DensityMeasure>, Measure1D,
                                         const SolverConfig&);

  const MatchingPiece& piece_for_y(double y) const {
    for (const MatchingPiece& pc : pieces_)
      if (y >= pc.split.y_lo() && y <= pc.split.y_hi()) return pc;
    const MatchingPiece* best = &pieces_.front();
    double dist = std::numeric_limits<double>::infinity();
    for (const MatchingPiece& pc : pieces_) {
      const double d = std::min(std::abs(y - pc.split.y_lo()), std::abs(y - pc.split.y_hi()));
      if (d < dist) {
        dist = d;
        best = &pc;
      }
    }
    return *best;
  }

  SurplusPtr s_;
  std::shared_ptr<const DensityMeasure> mu_;
  Measure1D nu_;
  SolverConfig cfg_;
  SplitFunction whole_split_;
  NestednessReport report_;
  std::vector<MatchingPiece> pieces_;
  std::vector<std::string> warnings_;
};

/// Solves the whole problem; if the verdict is not_nested and a
/// decomposition is declared, re-solves per block and glues v
/// continuously across blocks.
inline MatchingSolution build_matching(SurplusPtr s, std::shared_ptr<const DensityMeasure> mu, Measure1D nu,
                                       const SolverConfig& cfg) {
  cfg.validate();
  MatchingSolution sol(s, mu, nu, cfg);
  sol.whole_split_ = compute_split(*s, *mu, nu, cfg);
  if (cfg.diagnostics || !cfg.decomposition.empty())
    sol.report_ = nestedness_diagnostics(*s, *mu, nu, sol.whole_split_, cfg);

  if (cfg.decomposition.empty() || sol.report_.verdict != Verdict::kNotNested) {
    MatchingPiece pc{std::nullopt, mu, nu, sol.whole_split_, sol.report_};
    sol.pieces_.push_back(std::move(pc));
    return sol;
  }

  std::vector<DecompositionBlock> blocks = cfg.decomposition;
  std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.y_lo < b.y_lo; });
  double offset = cfg.v0;
  for (const DecompositionBlock& b : blocks) {
    const double x_mass = mass_of_region(*mu, [&](std::span<const double> x) { return b.x_box.contains(x); });
    const double y_mass = nu.cdf(b.y_hi) - nu.cdf(b.y_lo);
    if (std::abs(x_mass - y_mass) > 10 * cfg.mass_tol)
      throw ConfigError("decomposition block masses differ: mu=" + std::to_string(x_mass) +
                        " nu=" + std::to_string(y_mass));
    auto mu_b = std::make_shared<const DensityMeasure>(restrict_to_box(*mu, b.x_box));
    Measure1D nu_b = nu.restricted(b.y_lo, b.y_hi);
    SolverConfig cb = cfg;
    cb.v0 = offset;
    MatchingPiece pc{b.x_box, mu_b, nu_b, compute_split(*s, *mu_b, nu_b, cb), {}};
    if (cfg.diagnostics) pc.report = nestedness_diagnostics(*s, *mu_b, nu_b, pc.split, cb);
    offset = pc.split.v.back();
    sol.pieces_.push_back(std::move(pc));
  }
  return sol;
}

inline MatchingSolution build_matching(SurplusPtr s, const DensityMeasure& mu, const Measure1D& nu,
                                       const SolverConfig& cfg) {
  return build_matching(std::move(s), std::make_shared<const DensityMeasure>(mu), nu, cfg);
}

/// Iso-husband set {x : s_y(x, y) = k(y)} on an n-per-axis sample grid.
inline IsoSet iso_husband_set(const MatchingSolution& sol, double y, std::size_t n = 129) {
  const Domain& domain = sol.mu().domain();
  std::optional<Box> clip;
  const MatchingPiece* piece = &sol.pieces().front();
  for (const MatchingPiece& pc : sol.pieces())
    if (y >= pc.split.y_lo() && y <= pc.split.y_hi()) {
      piece = &pc;
      break;
    }
  clip = piece->x_box;
  const SampleGrid g = SampleGrid::over(domain, detail::default_diag_grid(domain.dim(), n), clip);
  const double k = piece->split.k_at(y);
  std::vector<double> f(g.points.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t p = 0; p < g.points.size(); ++p) f[p] = detail::safe_d_y(sol.surplus(), g.points[p], y) - k;
  return extract_iso_set(g, f, &domain);
}

// ---------------------------------------------------------------------------
// Solution checks

struct PushForwardReport {
  double max_abs_error = 0;
  std::vector<double> y, mass, target;
};

/// sup over checked y of |mu{F <= y} - nu((-inf, y])|. F is evaluated once
/// at all quadrature vertices. n_checks = 0 checks every y-grid node;
/// otherwise n_checks evenly spaced interior values.
inline PushForwardReport push_forward_check(const MatchingSolution& sol, std::size_t n_checks = 0) {
  const QuadratureGrid& g = sol.mu().grid();
  std::vector<double> vertex_F(g.vertex_count());
  parallel_for(g.vertex_count(), [&](std::size_t v) {
    Point x(g.dim());
    g.vertex_point(v, x);
    vertex_F[v] = sol.F(x);
  });
  SublevelMass field(g, std::move(vertex_F), [&sol](std::span<const double> x) { return sol.F(x); });
  PushForwardReport r;
  const double lo = sol.nu().lo(), hi = sol.nu().hi();
  std::vector<double> ys;
  if (n_checks == 0) {
    for (const auto& row : sol.grid_rows()) ys.push_back(row.y);
  } else {
    for (std::size_t i = 0; i < n_checks; ++i)
      ys.push_back(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n_checks));
  }
  for (double y : ys) {
    const double m = field.mass(y);
    const double t = sol.nu().cdf(y);
    r.y.push_back(y);
    r.mass.push_back(m);
    r.target.push_back(t);
    r.max_abs_error = std::max(r.max_abs_error, std::abs(m - t));
  }
  return r;
}

namespace detail {

/// Position of cell (i, j) along a Hilbert curve on a 2^k x 2^k grid.
inline std::uint64_t hilbert_index(std::uint64_t side, std::uint64_t i, std::uint64_t j) {
  std::uint64_t d = 0;
  for (std::uint64_t s = side / 2; s > 0; s /= 2) {
    const std::uint64_t ri = (i & s) ? 1 : 0, rj = (j & s) ? 1 : 0;
    d += s * s * ((3 * ri) ^ rj);
    if (rj == 0) {
      if (ri == 1) {
        i = s - 1 - i;
        j = s - 1 - j;
      }
      std::swap(i, j);
    }
  }
  return d;
}

/// Space-filling order key of a quadrature cell: Hilbert for m = 2,
/// bit-interleaved for m = 3.
inline std::uint64_t cell_order_key(const QuadratureGrid& g, std::size_t c) {
  const std::size_t n = g.cells_per_axis();
  if (g.dim() == 1) return c;
  std::uint64_t side = 1;
  while (side < n) side *= 2;
  std::uint64_t idx[3] = {0, 0, 0};
  for (std::size_t i = 0; i < g.dim(); ++i, c /= n) idx[i] = c % n;
  if (g.dim() == 2) return hilbert_index(side, idx[0], idx[1]);
  std::uint64_t key = 0;
  for (std::uint64_t bit = 0; (std::uint64_t{1} << bit) < side; ++bit)
    for (std::size_t i = 0; i < 3; ++i) key |= ((idx[i] >> bit) & 1) << (3 * bit + i);
  return key;
}

}  // namespace detail

/// Points drawn from mu by cell-mass-weighted stratified sampling. Cells are
/// visited along a space-filling curve so each stratum is spatially compact.
inline std::vector<Point> sample_from_measure(const DensityMeasure& mu, std::size_t n, std::uint64_t seed) {
  const QuadratureGrid& g = mu.grid();
  constexpr std::size_t kWhole = std::numeric_limits<std::size_t>::max();
  struct Entry {
    std::uint64_t key;
    std::size_t cell, sub;  // sub == kWhole for an interior cell
    double weight;
  };
  std::vector<Entry> entries;
  for (std::uint32_t c : g.interior_cells()) entries.push_back({detail::cell_order_key(g, c), c, kWhole, g.cell_weight(c)});
  for (std::size_t i = 0; i < g.partial_cells().size(); ++i) {
    const auto [b, e] = g.partial_range(i);
    const std::size_t c = g.partial_cells()[i];
    for (std::size_t j = b; j < e; ++j) entries.push_back({detail::cell_order_key(g, c), c, j, g.sub_weight()[j]});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
  std::vector<double> cum;
  cum.reserve(entries.size());
  double acc = 0;
  for (const Entry& e : entries) cum.push_back(acc += e.weight);
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(n);
  const std::size_t m = g.dim();
  const double sub_w = 1.0 / QuadratureGrid::kSub;
  for (std::size_t a = 0; a < n; ++a) {
    const double t = (static_cast<double>(a) + rng.uniform()) / static_cast<double>(n) * acc;
    std::size_t idx = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), t) - cum.begin());
    idx = std::min(idx, cum.size() - 1);
    Point x(m);
    const auto [key, cell, sub, w] = entries[idx];
    if (sub == kWhole) {
      g.cell_center(static_cast<std::size_t>(cell), x);
      for (std::size_t i = 0; i < m; ++i) x[i] += (rng.uniform() - 0.5) * g.width()[i];
    } else {
      g.subsample_point(static_cast<std::size_t>(cell), g.sub_index()[sub], x);
      for (std::size_t i = 0; i < m; ++i) x[i] += (rng.uniform() - 0.5) * g.width()[i] * sub_w;
      if (!mu.domain().contains(x)) g.subsample_point(static_cast<std::size_t>(cell), g.sub_index()[sub], x);
    }
    out.push_back(std::move(x));
  }
  return out;
}

struct StabilityReport {
  double min_residual = std::numeric_limits<double>::infinity();
  Point worst_x;
  double worst_y = 0;
  std::size_t pairs = 0;
  bool passes = false;
};

/// min over random pairs of u(x) + v(y) - s(x, y).
inline StabilityReport stability_check(const MatchingSolution& sol, std::size_t nx = 100, std::size_t ny = 100,
                                       std::uint64_t seed = 1) {
  const auto xs = sample_from_measure(sol.mu(), nx, seed);
  std::vector<double> us(nx);
  parallel_for(nx, [&](std::size_t i) { us[i] = sol.u(xs[i]); });
  Rng rng(seed ^ 0x5DEECE66Dull);
  StabilityReport r;
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = sol.nu().quantile((static_cast<double>(j) + rng.uniform()) / static_cast<double>(ny));
    const double vy = sol.v(y);
    for (std::size_t i = 0; i < nx; ++i) {
      const double res = us[i] + vy - sol.surplus().value(xs[i], y);
      ++r.pairs;
      if (res < r.min_residual) {
        r.min_residual = res;
        r.worst_x = xs[i];
        r.worst_y = y;
      }
    }
  }
  r.passes = r.min_residual >= -sol.config().stab_tol;
  return r;
}

/// min over sampled pairs of cross_difference(x, F(x), x', F(x')).
inline double support_monotonicity_check(const MatchingSolution& sol, std::size_t n = 200, std::uint64_t seed = 2) {
  const auto xs = sample_from_measure(sol.mu(), n, seed);
  std::vector<double> F(n);
  parallel_for(n, [&](std::size_t i) { F[i] = sol.F(xs[i]); });
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      mn = std::min(mn, cross_difference(sol.surplus(), xs[i], F[i], xs[j], F[j]));
  return mn;
}

struct EnvelopeReport {
  double max_rel_error = 0;
  std::size_t used = 0, skipped = 0;
};

/// Finite-difference grad u against D_x s(x, F(x)). Samples where F jumps
/// within the stencil or is boundary-assigned are skipped.
inline EnvelopeReport envelope_check(const MatchingSolution& sol, const std::vector<Point>& x_samples,
                                     double h = 1e-5) {
  EnvelopeReport r;
  const Surplus& s = sol.surplus();
  for (const Point& x : x_samples) {
    const MatchResult mr = sol.match(x);
    if (mr.boundary != BoundaryAssignment::kNone || !mr.unique) {
      ++r.skipped;
      continue;
    }
    const Point gs = s.grad_x(x, mr.y);
    Point gu(x.size());
    bool jump = false;
    Point xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      if (!sol.mu().domain().contains(xp) || !sol.mu().domain().contains(xm)) jump = true;
      const double Fp = sol.F(xp), Fm = sol.F(xm);
      if (std::abs(Fp - Fm) > 1e3 * h) jump = true;
      gu[i] = (s.value(xp, Fp) - sol.v(Fp) - s.value(xm, Fm) + sol.v(Fm)) / (2 * h);
      xp[i] = xm[i] = x[i];
    }
    if (jump) {
      ++r.skipped;
      continue;
    }
    Point diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = gu[i] - gs[i];
    r.max_rel_error = std::max(r.max_rel_error, norm(diff) / std::max(norm(gs), 1e-8));
    ++r.used;
  }
  return r;
}

struct CompatibilityReport {
  double max_ccond_residual = 0;     // |s_{x1 y} dF/dx2 - s_{x2 y} dF/dx1|
  double max_gradient_residual = 0;  // |(k'(F) - s_yy) DF - D_x s_y|
  std::size_t used = 0, skipped = 0;
};

inline CompatibilityReport compatibility_check(const MatchingSolution& sol, const std::vector<Point>& x_samples,
                                               double h = 1e-6) {
  CompatibilityReport r;
  const Surplus& s = sol.surplus();
  for (const Point& x : x_samples) {
    const MatchResult mr = sol.match(x);
    if (mr.boundary != BoundaryAssignment::kNone || !mr.unique) {
      ++r.skipped;
      continue;
    }
    const double F0 = mr.y;
    // Piece whose split defines k near F0.
    const MatchingPiece* piece = &sol.pieces().front();
    for (const MatchingPiece& pc : sol.pieces())
      if (!pc.x_box || pc.x_box->contains(x)) {
        piece = &pc;
        break;
      }
    const SplitFunction& sp = piece->split;
    const std::size_t seg0 = sp.segment(F0);
    Point DF(x.size());
    bool bad = false;
    Point xp = x, xm = x;
    for (std::size_t i = 0; i < x.size() && !bad; ++i) {
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      const bool in_p = sol.mu().domain().contains(xp), in_m = sol.mu().domain().contains(xm);
      const double Fp = in_p ? sol.F(xp) : F0, Fm = in_m ? sol.F(xm) : F0;
      const bool same_p = in_p && sp.segment(Fp) == seg0, same_m = in_m && sp.segment(Fm) == seg0;
      if (same_p && same_m) DF[i] = (Fp - Fm) / (2 * h);
      else if (same_p) DF[i] = (Fp - F0) / h;
      else if (same_m) DF[i] = (F0 - Fm) / h;
      else bad = true;
      xp[i] = xm[i] = x[i];
    }
    if (bad) {
      ++r.skipped;
      continue;
    }
    const Point gxy = s.grad_x_dy(x, F0);
    const double c = sp.k_slope(F0) - s.d_yy(x, F0);
    Point res(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) res[i] = c * DF[i] - gxy[i];
    r.max_gradient_residual = std::max(r.max_gradient_residual, norm(res));
    if (x.size() == 2)
      r.max_ccond_residual = std::max(r.max_ccond_residual, std::abs(gxy[0] * DF[1] - gxy[1] * DF[0]));
    ++r.used;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Local matching around a single couple

struct LocalMatch {
  Point x0;
  double y0 = 0, radius = 0;
  double slope = 0;       // v'' (constant)
  double v_prime0 = 0;    // v'(y0) = s_y(x0, y0)
  double y_halfwidth = 0;
  SurplusPtr s;

  double v(double y) const { return v_prime0 * (y - y0) + 0.5 * slope * (y - y0) * (y - y0); }
  double v_prime(double y) const { return v_prime0 + slope * (y - y0); }

  /// Solves s_y(x, y) = v'(y); the left side minus the right is strictly
  /// decreasing in y on the neighborhood.
  double F(std::span<const double> x) const {
    auto g = [&](double y) { return s->d_y(x, y) - v_prime(y); };
    return bisect_root(g, y0 - y_halfwidth, y0 + y_halfwidth, 1e-13);
  }

  Point DF(std::span<const double> x) const {
    const double y = F(x);
    Point g = s->grad_x_dy(x, y);
    const double den = slope - s->d_yy(x, y);
    for (double& c : g) c /= den;
    return g;
  }

  Measure1D nu_local;
};

/// Builds a smooth local matching pinning x0 to y0: quadratic v with
/// v'' above max s_yy on the neighborhood, F from s_y(x, F) = v'(F), and
/// nu = F# (uniform on the ball).
inline LocalMatch local_match_construction(SurplusPtr s, const Point& x0, double y0, double radius) {
  if (s->y_dim() != 1) throw ConfigError("local match needs scalar y");
  if (norm(s->grad_x_dy(x0, y0)) <= kDegeneracyTol) throw DomainError("surplus is degenerate at the couple");
  const std::size_t m = x0.size();
  for (int attempt = 0; attempt < 12; ++attempt, radius *= 0.5) {
    LocalMatch lm;
    lm.s = s;
    lm.x0 = x0;
    lm.y0 = y0;
    lm.radius = radius;
    lm.y_halfwidth = radius;
    lm.v_prime0 = s->d_y(x0, y0);
    const Domain ball = Domain::disk_sector(x0, radius);
    const SampleGrid g = SampleGrid::over(ball, m == 1 ? 65 : (m == 2 ? 21 : 9));
    double max_syy = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < g.points.size(); ++p) {
      if (!g.inside[p]) continue;
      for (double t : linspace(y0 - radius, y0 + radius, 9)) max_syy = std::max(max_syy, s->d_yy(g.points[p], t));
    }
    lm.slope = max_syy + 1.0;
    bool ok = true;
    std::vector<double> ys;
    for (std::size_t p = 0; p < g.points.size() && ok; ++p) {
      if (!g.inside[p]) continue;
      try {
        ys.push_back(lm.F(g.points[p]));
      } catch (const ConvergenceError&) {
        ok = false;
      }
    }
    if (!ok) continue;
    std::sort(ys.begin(), ys.end());
    const double lo = ys.front(), hi = ys.back();
    if (!(hi > lo)) continue;
    std::vector<double> grid = linspace(lo, hi, 129), cdf(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      cdf[i] = static_cast<double>(std::upper_bound(ys.begin(), ys.end(), grid[i]) - ys.begin());
    lm.nu_local = Measure1D::from_cdf_table(grid, cdf, "local push-forward");
    return lm;
  }
  throw ConvergenceError("local match: no root on the neighborhood after shrinking the radius");
}

}  // namespace matchkit
