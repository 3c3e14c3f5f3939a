#pragma once

// Exact balanced discrete transport between N equal-mass x-atoms and N
// equal-mass y-atoms, solved as a linear assignment problem (shortest
// augmenting paths with potentials, O(N^3)). Used as an independent check
// on the continuum solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "matchkit/geometry.hpp"
#include "matchkit/levelset.hpp"
#include "matchkit/surplus.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

inline constexpr double kLpTol = 1e-9;

struct DiscreteProblem {
  std::vector<Point> x_atoms, y_atoms;
  std::vector<double> surplus;  // row-major N x N, surplus[i * N + j] = s(x_i, y_j)

  std::size_t size() const { return x_atoms.size(); }
  double at(std::size_t i, std::size_t j) const { return surplus[i * size() + j]; }
};

inline DiscreteProblem make_problem(const Surplus& s, std::vector<Point> xs, std::vector<Point> ys) {
  if (xs.size() != ys.size()) throw ConfigError("discrete problem must be balanced");
  if (xs.empty()) throw ConfigError("discrete problem needs at least one atom");
  DiscreteProblem p{std::move(xs), std::move(ys), {}};
  const std::size_t n = p.size();
  p.surplus.resize(n * n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) p.surplus[i * n + j] = s.value(p.x_atoms[i], p.y_atoms[j]);
  });
  for (double v : p.surplus)
    if (!std::isfinite(v)) throw DomainError("surplus matrix has a non-finite entry");
  return p;
}

/// y-atoms at nu quantiles (j - 1/2) / N.
inline std::vector<Point> quantile_atoms(const Measure1D& nu, std::size_t n) {
  std::vector<Point> ys;
  ys.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    ys.push_back({nu.quantile((static_cast<double>(j) + 0.5) / static_cast<double>(n))});
  return ys;
}

/// Stratified x-atoms from mu and quantile y-atoms from nu.
inline DiscreteProblem sample_atoms(const Surplus& s, const DensityMeasure& mu, const Measure1D& nu, std::size_t n,
                                    std::uint64_t seed) {
  if (n < 2) throw ConfigError("oracle needs N >= 2 atoms");
  return make_problem(s, sample_from_measure(mu, n, seed), quantile_atoms(nu, n));
}

struct DiscreteCoupling {
  std::vector<std::size_t> partner;  // partner[i] = j, each pair carries mass 1/N
  double total_surplus = 0;          // sum of s over pairs, divided by N
  std::vector<double> dual_u, dual_v;
  double duality_gap = 0;            // (sum u + sum v) / N - total_surplus
  double max_dual_violation = 0;     // max over (i, j) of s_ij - u_i - v_j

  std::size_t size() const { return partner.size(); }
  double mass() const { return 1.0 / static_cast<double>(partner.size()); }
  double dual_objective() const {
    const double n = static_cast<double>(partner.size());
    return (std::accumulate(dual_u.begin(), dual_u.end(), 0.0) + std::accumulate(dual_v.begin(), dual_v.end(), 0.0)) /
           n;
  }
};

/// Maximum-surplus assignment with dual certificate. Ties go to the lowest
/// column index found first by the augmenting-path search.
inline DiscreteCoupling solve_exact(const DiscreteProblem& p) {
  const std::size_t n = p.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Minimise cost = -s. 1-based arrays; column 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      const double* srow = &p.surplus[(i0 - 1) * n];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -srow[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  DiscreteCoupling c;
  c.partner.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) c.partner[row_of[j] - 1] = j - 1;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total += p.at(i, c.partner[i]);
  c.total_surplus = total / static_cast<double>(n);

  // Surplus-side duals: u_i = -u_cost, then tighten v_j = max_i (s_ij - u_i)
  // so feasibility holds exactly in floating point.
  c.dual_u.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.dual_u[i] = -u[i + 1];
  c.dual_v.assign(n, -kInf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c.dual_v[j] = std::max(c.dual_v[j], p.at(i, j) - c.dual_u[i]);
  c.max_dual_violation = -kInf;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c.max_dual_violation = std::max(c.max_dual_violation, p.at(i, j) - c.dual_u[i] - c.dual_v[j]);
  c.duality_gap = c.dual_objective() - c.total_surplus;
  return c;
}

/// Total surplus of an arbitrary assignment (mass 1/N per pair).
inline double assignment_surplus(const DiscreteProblem& p, std::span<const std::size_t> partner) {
  double t = 0;
  for (std::size_t i = 0; i < partner.size(); ++i) t += p.at(i, partner[i]);
  return t / static_cast<double>(partner.size());
}

struct MonotonicityReport {
  double min_delta = std::numeric_limits<double>::infinity();
  std::size_t i = 0, k = 0;  // worst pair of x-atoms
};

/// min over support pairs of the cross-difference, read from the matrix.
inline MonotonicityReport check_s_monotonicity(const DiscreteProblem& p, std::span<const std::size_t> partner) {
  MonotonicityReport r;
  const std::size_t n = partner.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const std::size_t a = partner[i], b = partner[k];
      const double d = p.at(i, a) + p.at(k, b) - p.at(i, b) - p.at(k, a);
      if (d < r.min_delta) r = {d, i, k};
    }
  if (n < 2) r.min_delta = 0;
  return r;
}

inline MonotonicityReport check_s_monotonicity(const DiscreteProblem& p, const DiscreteCoupling& c) {
  return check_s_monotonicity(p, c.partner);
}

/// Same check for pairs (x_i, y_i) given directly, e.g. a continuum map
/// restricted to atoms.
inline MonotonicityReport check_s_monotonicity(const Surplus& s, const std::vector<Point>& xs,
                                               const std::vector<Point>& ys) {
  MonotonicityReport r;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t k = i + 1; k < xs.size(); ++k) {
      const double d = cross_difference(s, xs[i], ys[i], xs[k], ys[k]);
      if (d < r.min_delta) r = {d, i, k};
    }
  if (xs.size() < 2) r.min_delta = 0;
  return r;
}

struct PurityReport {
  std::size_t max_partners_per_x = 0;
  std::size_t split_x_atoms = 0;  // x-atoms with more than one partner
  std::size_t distinct_partner_values = 0;
  bool tied_optimum = false;      // another assignment attains the optimum within tol
};

inline PurityReport purity_report(const DiscreteProblem& p, const DiscreteCoupling& c, double tol = kLpTol) {
  PurityReport r;
  const std::size_t n = c.size();
  // An assignment gives exactly one partner per row.
  r.max_partners_per_x = n > 0 ? 1 : 0;
  std::set<Point> values;
  for (std::size_t i = 0; i < n; ++i) values.insert(p.y_atoms[c.partner[i]]);
  r.distinct_partner_values = values.size();

  // A second optimum exists iff the zero-reduced-cost edges contain an
  // alternating cycle: row i -> row k when (i, partner[k]) is tight.
  std::vector<std::size_t> row_of(n);
  for (std::size_t i = 0; i < n; ++i) row_of[c.partner[i]] = i;
  const double scale = tol * std::max(1.0, std::abs(c.total_surplus));
  std::vector<std::vector<std::size_t>> next(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != c.partner[i] && c.dual_u[i] + c.dual_v[j] - p.at(i, j) <= scale) next[i].push_back(row_of[j]);
  std::vector<std::uint8_t> color(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t s = 0; s < n && !r.tied_optimum; ++s) {
    if (color[s]) continue;
    stack.push_back({s, 0});
    color[s] = 1;
    while (!stack.empty() && !r.tied_optimum) {
      auto& [v, e] = stack.back();
      if (e < next[v].size()) {
        const std::size_t w = next[v][e++];
        if (color[w] == 1) r.tied_optimum = true;
        else if (color[w] == 0) {
          color[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        color[v] = 2;
        stack.pop_back();
      }
    }
  }
  return r;
}

struct ContinuumComparison {
  double surplus_ratio = 1;  // continuum surplus on atoms / oracle surplus
  double matched_y_rmse = 0;
  double continuum_surplus = 0, oracle_surplus = 0;
  MonotonicityReport continuum_monotonicity;
};

inline ContinuumComparison compare_to_continuum(const DiscreteProblem& p, const DiscreteCoupling& c,
                                                const MatchingSolution& sol) {
  const std::size_t n = p.size();
  std::vector<Point> Fy(n);
  parallel_for(n, [&](std::size_t i) { Fy[i] = {sol.F(p.x_atoms[i])}; });
  ContinuumComparison r;
  double se = 0, cs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cs += sol.surplus().value(p.x_atoms[i], Fy[i]);
    const double e = p.y_atoms[c.partner[i]][0] - Fy[i][0];
    se += e * e;
  }
  r.continuum_surplus = cs / static_cast<double>(n);
  r.oracle_surplus = c.total_surplus;
  r.surplus_ratio = n == 1 ? 1.0 : r.continuum_surplus / r.oracle_surplus;
  r.matched_y_rmse = std::sqrt(se / static_cast<double>(n));
  r.continuum_monotonicity = check_s_monotonicity(sol.surplus(), p.x_atoms, Fy);
  return r;
}

}  // namespace matchkit
