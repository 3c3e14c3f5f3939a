#pragma once

// Hedonic models: buyers x with utility U(x, z), producers y with cost
// c(y, z). The matching surplus is s(x, y) = max_z U(x, z) - c(y, z); a
// stable matching of the reduced problem gives the traded goods and,
// through the payoffs, the price schedule
//
//   sup_x U(x, z) - u(x)  <=  P(z)  <=  inf_y v(y) + c(y, z).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "matchkit/geometry.hpp"
#include "matchkit/levelset.hpp"
#include "matchkit/ot_oracle.hpp"
#include "matchkit/surplus.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

inline constexpr double kZTol = 1e-6;
inline constexpr double kPriceTol = 1e-6;

class PriceInconsistencyError : public Error {
 public:
  using Error::Error;
};

enum class ZSolver : std::uint8_t { kClosedFormQuadratic, kNumericAscent };

struct HedonicProblem {
  std::string name;
  std::size_t m = 2, n = 1, product_dim = 2;
  std::function<double(Span x, Span z)> U;
  std::function<double(Span y, Span z)> c;
  ZSolver z_solver = ZSolver::kNumericAscent;
  Box z_box;  // numeric ascent only
};

/// U = x.z, c = |z|^2 / (2y).
inline HedonicProblem rc_problem(std::size_t m = 2) {
  HedonicProblem p;
  p.name = "rc";
  p.m = p.product_dim = m;
  p.n = 1;
  p.U = [](Span x, Span z) { return dot(x, z); };
  p.c = [](Span y, Span z) { return dot(z, z) / (2 * y[0]); };
  p.z_solver = ZSolver::kClosedFormQuadratic;
  return p;
}

/// U = x.z, c = sum z_i^2 / (2 y_i).
inline HedonicProblem hedonic_quadratic_problem(std::size_t m = 2) {
  HedonicProblem p;
  p.name = "hedonic_quadratic";
  p.m = p.n = p.product_dim = m;
  p.U = [](Span x, Span z) { return dot(x, z); };
  p.c = [](Span y, Span z) {
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += z[i] * z[i] / (2 * y[i]);
    return s;
  };
  p.z_solver = ZSolver::kClosedFormQuadratic;
  return p;
}

/// Product box {y x : x in X, y in Y} padded by 10% about its centre.
/// Coordinate i pairs x_i with y_0 (n = 1) or y_i (n = m).
inline Box default_z_box(const HedonicProblem& p, const Box& xb, const Box& yb) {
  Box z{Point(p.product_dim), Point(p.product_dim)};
  for (std::size_t i = 0; i < p.product_dim; ++i) {
    const std::size_t xi = std::min(i, p.m - 1), yi = p.n == 1 ? 0 : std::min(i, p.n - 1);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double a : {xb.lo[xi], xb.hi[xi]})
      for (double b : {yb.lo[yi], yb.hi[yi]}) {
        lo = std::min(lo, a * b);
        hi = std::max(hi, a * b);
      }
    const double mid = 0.5 * (lo + hi), half = 0.55 * std::max(hi - lo, 1e-12);
    z.lo[i] = mid - half;
    z.hi[i] = mid + half;
  }
  return z;
}

namespace detail {

/// Solves A x = b for small dense A (row-major) by Gaussian elimination
/// with partial pivoting. Returns false when A is singular.
inline bool solve_small(std::vector<double> A, Point& b) {
  const std::size_t d = b.size();
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(A[r * d + c]) > std::abs(A[piv * d + c])) piv = r;
    if (std::abs(A[piv * d + c]) < 1e-300) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < d; ++k) std::swap(A[c * d + k], A[piv * d + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = A[r * d + c] / A[c * d + c];
      for (std::size_t k = c; k < d; ++k) A[r * d + k] -= f * A[c * d + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = d; c-- > 0;) {
    for (std::size_t k = c + 1; k < d; ++k) b[c] -= A[c * d + k] * b[k];
    b[c] /= A[c * d + c];
  }
  return true;
}

/// argmax over the box of phi by projected Newton steps with a gradient
/// fallback and backtracking.
inline Point maximize_in_box(const std::function<double(Span)>& phi, const Box& box, Span x, Span y) {
  const std::size_t d = box.lo.size();
  Point z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = 0.5 * (box.lo[i] + box.hi[i]);
  auto project = [&](Point& p) {
    for (std::size_t i = 0; i < d; ++i) p[i] = std::clamp(p[i], box.lo[i], box.hi[i]);
  };
  double f = phi(z);
  Point g(d), zz(d), step(d);
  std::vector<double> H(d * d);
  for (int it = 0; it < 200; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      const double h = fd_step(z[i], 1e-6);
      zz = z;
      zz[i] = z[i] + h;
      const double fp = phi(zz);
      zz[i] = z[i] - h;
      const double fm = phi(zz);
      g[i] = (fp - fm) / (2 * h);
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        const double hi = fd_step(z[i], 1e-4), hj = fd_step(z[j], 1e-4);
        auto at = [&](double si, double sj) {
          zz = z;
          zz[i] += si;
          zz[j] += sj;
          return phi(zz);
        };
        H[i * d + j] = H[j * d + i] = (at(hi, hj) - at(hi, -hj) - at(-hi, hj) + at(-hi, -hj)) / (4 * hi * hj);
      }
    // Newton direction -H^{-1} g if it ascends, else the gradient.
    std::vector<double> negH(d * d);
    for (std::size_t k = 0; k < d * d; ++k) negH[k] = -H[k];
    step = g;
    if (!solve_small(negH, step) || dot(step, g) <= 0) step = g;
    double alpha = 1, fn = f;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      for (std::size_t i = 0; i < d; ++i) zz[i] = z[i] + alpha * step[i];
      project(zz);
      fn = phi(zz);
      if (fn >= f) {
        moved = true;
        break;
      }
    }
    double moved_by = 0;
    if (moved)
      for (std::size_t i = 0; i < d; ++i) moved_by = std::max(moved_by, std::abs(zz[i] - z[i]));
    if (moved) {
      z = zz;
      f = fn;
    }
    // Projected gradient as the stationarity measure.
    double pg = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const bool at_lo = z[i] <= box.lo[i] && g[i] < 0, at_hi = z[i] >= box.hi[i] && g[i] > 0;
      if (!at_lo && !at_hi) pg = std::max(pg, std::abs(g[i]));
    }
    if (pg < 1e-7 * std::max(1.0, std::abs(f)) || (moved && moved_by < 1e-13)) return z;
    if (!moved && pg < 1e-5 * std::max(1.0, std::abs(f))) return z;
  }
  std::string where = "x=(";
  for (double v : x) where += std::to_string(v) + " ";
  where += ") y=(";
  for (double v : y) where += std::to_string(v) + " ";
  throw ConvergenceError("hedonic inner maximisation did not converge at " + where + ")");
}

}  // namespace detail

/// s(x, y) = max_z U(x, z) - c(y, z) together with the maximiser z*(x, y).
class HedonicSurplus final : public Surplus {
 public:
  explicit HedonicSurplus(HedonicProblem p)
      : Surplus(p.m, p.n, "hedonic:" + p.name,
                p.z_solver == ZSolver::kClosedFormQuadratic ? Provenance::kAnalyticCatalog
                                                            : Provenance::kExpressionFd),
        p_(std::move(p)) {
    if (p_.z_solver == ZSolver::kClosedFormQuadratic) {
      if (p_.name == "rc") inner_ = std::make_shared<RcIndexSurplus>(p_.m);
      else if (p_.name == "hedonic_quadratic") inner_ = std::make_shared<HedonicQuadraticSurplus>(p_.m);
      else throw ConfigError("closed-form z solver is only available for rc and hedonic_quadratic");
    } else if (p_.z_box.lo.size() != p_.product_dim) {
      throw ConfigError("numeric hedonic reduction needs a z box of the product dimension");
    }
  }

  const HedonicProblem& problem() const { return p_; }

  Point z_star(Span x, Span y) const {
    if (p_.z_solver == ZSolver::kClosedFormQuadratic) {
      Point z(x.begin(), x.end());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] *= p_.n == 1 ? y[0] : y[i];
      return z;
    }
    return detail::maximize_in_box([&](Span z) { return p_.U(x, z) - p_.c(y, z); }, p_.z_box, x, y);
  }
  Point z_star(Span x, double y) const { return z_star(x, Span(&y, 1)); }

 protected:
  double do_value(Span x, Span y) const override {
    if (inner_) return inner_->value(x, y);
    const Point z = z_star(x, y);
    return p_.U(x, z) - p_.c(y, z);
  }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    if (inner_) inner_->grad_x(x, y, out);
    else fd_grad_x(x, y, out);
  }
  void do_grad_y(Span x, Span y, MutSpan out) const override {
    if (inner_) inner_->grad_y(x, y, out);
    else fd_grad_y(x, y, out);
  }
  double do_d_y(Span x, double y) const override { return inner_ ? inner_->d_y(x, y) : fd_d_y(x, y); }
  double do_d_yy(Span x, double y) const override { return inner_ ? inner_->d_yy(x, y) : fd_d_yy(x, y); }
  void do_grad_x_dy(Span x, double y, MutSpan out) const override {
    if (inner_) inner_->grad_x_dy(x, y, out);
    else fd_grad_x_dy(x, y, out);
  }

 private:
  HedonicProblem p_;
  SurplusPtr inner_;
};

using HedonicSurplusPtr = std::shared_ptr<const HedonicSurplus>;

inline HedonicSurplusPtr reduce_to_matching(HedonicProblem p) {
  return std::make_shared<const HedonicSurplus>(std::move(p));
}

/// Matching map and payoffs of a solved problem, independent of how it was
/// solved.
struct Payoffs {
  std::function<Point(Span x)> F;
  std::function<double(Span x)> u;
  std::function<double(Span y)> v;
};

inline Payoffs payoffs_of(const MatchingSolution& sol) {
  return {[&sol](Span x) { return Point{sol.F(x)}; }, [&sol](Span x) { return sol.u(x); },
          [&sol](Span y) { return sol.v(y[0]); }};
}

/// z(x) = z*(x, F(x)).
inline std::function<Point(Span)> equilibrium_goods(const Payoffs& pay, const HedonicSurplus& hs) {
  return [pay, &hs](Span x) { return hs.z_star(x, pay.F(x)); };
}

inline std::function<Point(Span)> equilibrium_goods(const MatchingSolution& sol, const HedonicSurplus& hs) {
  return equilibrium_goods(payoffs_of(sol), hs);
}

struct TradedPoint {
  Point x, y, z;
  double P = 0;        // producer side: v(y) + c(y, z)
  double P_buyer = 0;  // buyer side: U(x, z) - u(x)
  double lower = 0, upper = 0;
};

struct PriceSchedule {
  std::vector<TradedPoint> traded;
  std::function<double(Span z)> lower_env, upper_env;
  double max_side_gap = 0;        // max |P - P_buyer|
  double max_band_violation = 0;  // max of lower - P and P - upper, floored at 0
};

/// Prices at the goods traded by `x_samples`; envelopes use the same x
/// samples and the given producer atoms.
inline PriceSchedule price_schedule(const Payoffs& pay, const HedonicSurplus& hs, const std::vector<Point>& x_samples,
                                    const std::vector<Point>& y_atoms, double price_tol = kPriceTol) {
  const HedonicProblem& p = hs.problem();
  const std::size_t nx = x_samples.size();
  std::vector<double> ux(nx), vy(y_atoms.size());
  parallel_for(nx, [&](std::size_t i) { ux[i] = pay.u(x_samples[i]); });
  for (std::size_t j = 0; j < y_atoms.size(); ++j) vy[j] = pay.v(y_atoms[j]);

  PriceSchedule ps;
  ps.lower_env = [xs = x_samples, ux, U = p.U](Span z) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) best = std::max(best, U(xs[i], z) - ux[i]);
    return best;
  };
  ps.upper_env = [ys = y_atoms, vy, c = p.c](Span z) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ys.size(); ++j) best = std::min(best, vy[j] + c(ys[j], z));
    return best;
  };
  ps.traded.resize(nx);
  parallel_for(nx, [&](std::size_t i) {
    TradedPoint& t = ps.traded[i];
    t.x = x_samples[i];
    t.y = pay.F(t.x);
    t.z = hs.z_star(t.x, t.y);
    t.P = pay.v(t.y) + p.c(t.y, t.z);
    t.P_buyer = p.U(t.x, t.z) - ux[i];
    t.lower = ps.lower_env(t.z);
    t.upper = ps.upper_env(t.z);
  });
  for (const TradedPoint& t : ps.traded) {
    ps.max_side_gap = std::max(ps.max_side_gap, std::abs(t.P - t.P_buyer));
    ps.max_band_violation = std::max({ps.max_band_violation, t.lower - t.P, t.P - t.upper});
  }
  for (const TradedPoint& t : ps.traded)
    if (t.lower - t.upper > price_tol)
      throw PriceInconsistencyError("price envelopes cross by " + std::to_string(t.lower - t.upper) +
                                    "; payoffs are not stable");
  return ps;
}

inline PriceSchedule price_schedule(const MatchingSolution& sol, const HedonicSurplus& hs,
                                    const std::vector<Point>& x_samples, std::size_t n_y_atoms = 257,
                                    double price_tol = kPriceTol) {
  return price_schedule(payoffs_of(sol), hs, x_samples, quantile_atoms(sol.nu(), n_y_atoms), price_tol);
}

struct BunchingReport {
  struct Collision {
    std::size_t i, k;
    double distance;
    bool identical_x;  // no separating no-bunching guarantee
  };
  std::vector<Collision> collisions;
  double min_separation = std::numeric_limits<double>::infinity();
};

/// Distinct x-atoms buying goods within z_tol (max norm) of each other.
inline BunchingReport no_bunching_check(const DiscreteProblem& p, const DiscreteCoupling& c, const HedonicSurplus& hs,
                                        double z_tol = kZTol) {
  const std::size_t n = c.size();
  std::vector<Point> z(n);
  parallel_for(n, [&](std::size_t i) { z[i] = hs.z_star(p.x_atoms[i], p.y_atoms[c.partner[i]]); });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a][0] < z[b][0]; });
  BunchingReport r;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t k = order[b];
      double d = 0;
      for (std::size_t q = 0; q < z[i].size(); ++q) d = std::max(d, std::abs(z[i][q] - z[k][q]));
      r.min_separation = std::min(r.min_separation, d);
      if (z[k][0] - z[i][0] > z_tol) break;
      if (d <= z_tol) r.collisions.push_back({std::min(i, k), std::max(i, k), d, p.x_atoms[i] == p.x_atoms[k]});
    }
  }
  return r;
}

/// Dirac-like producer distribution: uniform on [y0 - eps, y0 + eps].
inline Measure1D near_dirac(double y0, double eps = 1e-3) { return Measure1D::uniform(y0 - eps, y0 + eps); }

// ---------------------------------------------------------------------------
// Lattice solver for vector y with equal-shape domains.

/// Centres of the cells of a lattice of the given spacing, anchored at
/// `anchor`, that fall inside the domain.
inline std::vector<Point> lattice_atoms(const Domain& d, double spacing, const Point& anchor) {
  const Box bb = d.bounding_box();
  const std::size_t m = d.dim();
  std::vector<long> lo(m), hi(m);
  for (std::size_t i = 0; i < m; ++i) {
    lo[i] = static_cast<long>(std::floor((bb.lo[i] - anchor[i]) / spacing)) - 1;
    hi[i] = static_cast<long>(std::ceil((bb.hi[i] - anchor[i]) / spacing)) + 1;
  }
  std::vector<Point> out;
  std::vector<long> idx(lo);
  Point x(m);
  for (;;) {
    for (std::size_t i = 0; i < m; ++i) x[i] = anchor[i] + (static_cast<double>(idx[i]) + 0.5) * spacing;
    if (d.contains(x)) out.push_back(x);
    std::size_t i = 0;
    while (i < m && ++idx[i] > hi[i]) idx[i] = lo[i], ++i;
    if (i == m) break;
  }
  return out;
}

struct LatticeSolution {
  DiscreteProblem problem;
  DiscreteCoupling coupling;
  double spacing = 0;
  std::vector<double> v_atoms;  // on y-atoms, min over atoms = 0
  std::vector<double> u_atoms;  // on x-atoms, u = s(x, F(x)) - v(F(x))
  std::vector<std::size_t> x_of_y;
  std::size_t cg_iterations = 0;

  std::size_t nearest_x(Span x) const { return nearest(problem.x_atoms, x); }
  std::size_t nearest_y(Span y) const { return nearest(problem.y_atoms, y); }

  /// Payoffs read from the nearest atom; v is extended to first order.
  Payoffs payoffs(const Surplus& s) const {
    return {[this](Span x) { return problem.y_atoms[coupling.partner[nearest_x(x)]]; },
            [this, &s](Span x) {
              const std::size_t i = nearest_x(x);
              const Point& y = problem.y_atoms[coupling.partner[i]];
              const double vy = v_atoms[coupling.partner[i]];
              return s.value(x, y) - vy;
            },
            [this, &s](Span y) { return v_first_order(s, y); }};
  }

  double v_first_order(const Surplus& s, Span y) const {
    const std::size_t j = nearest_y(y);
    const Point& yj = problem.y_atoms[j];
    Point g(yj.size());
    s.grad_y(problem.x_atoms[x_of_y[j]], yj, g);
    double val = v_atoms[j];
    for (std::size_t q = 0; q < yj.size(); ++q) val += g[q] * (y[q] - yj[q]);
    return val;
  }

 private:
  static std::size_t nearest(const std::vector<Point>& pts, Span x) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d = 0;
      for (std::size_t q = 0; q < x.size(); ++q) d += (pts[i][q] - x[q]) * (pts[i][q] - x[q]);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }
};

/// Exact assignment between lattice atoms of X and Y, then v recovered
/// from v'(y) = D_y s(x, y) on matched pairs by least-squares integration
/// over lattice edges (conjugate gradients on the graph Laplacian).
inline LatticeSolution solve_on_lattice(const Surplus& s, const Domain& x_dom, const Domain& y_dom, double spacing) {
  if (!(spacing > 0)) throw ConfigError("lattice spacing must be positive");
  const Box xb = x_dom.bounding_box(), yb = y_dom.bounding_box();
  auto xs = lattice_atoms(x_dom, spacing, xb.lo);
  auto ys = lattice_atoms(y_dom, spacing, yb.lo);
  if (xs.size() != ys.size())
    throw ConfigError("lattice atom counts differ (" + std::to_string(xs.size()) + " vs " +
                      std::to_string(ys.size()) + "); domains must have the same shape");
  LatticeSolution L;
  L.spacing = spacing;
  L.problem = make_problem(s, std::move(xs), std::move(ys));
  L.coupling = solve_exact(L.problem);
  const std::size_t n = L.problem.size();
  const std::size_t dim = L.problem.y_atoms[0].size();
  L.x_of_y.resize(n);
  for (std::size_t i = 0; i < n; ++i) L.x_of_y[L.coupling.partner[i]] = i;

  std::vector<Point> grad(n, Point(dim));
  for (std::size_t j = 0; j < n; ++j) s.grad_y(L.problem.x_atoms[L.x_of_y[j]], L.problem.y_atoms[j], grad[j]);

  // Lattice edges between atoms one spacing apart.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  const double near = 1.01 * spacing * spacing;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double d = 0;
      for (std::size_t q = 0; q < dim; ++q) {
        const double t = L.problem.y_atoms[a][q] - L.problem.y_atoms[b][q];
        d += t * t;
      }
      if (d < near) edges.push_back({a, b});
    }
  std::vector<double> rhs(n, 0.0);
  std::vector<std::size_t> degree(n, 0);
  for (auto [a, b] : edges) {
    double inc = 0;
    for (std::size_t q = 0; q < dim; ++q)
      inc += 0.5 * (grad[a][q] + grad[b][q]) * (L.problem.y_atoms[b][q] - L.problem.y_atoms[a][q]);
    rhs[b] += inc;
    rhs[a] -= inc;
    ++degree[a];
    ++degree[b];
  }
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(degree[i]) * x[i];
    for (auto [a, b] : edges) {
      out[a] -= x[b];
      out[b] -= x[a];
    }
  };
  std::vector<double> v(n, 0.0), r = rhs, p = rhs, Ap(n);
  double rr = 0;
  for (double t : r) rr += t * t;
  const double stop = 1e-26 * std::max(rr, 1e-300);
  for (std::size_t it = 0; it < 20 * n && rr > stop; ++it) {
    apply(p, Ap);
    double pAp = 0;
    for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    if (!(pAp > 0)) break;
    const double alpha = rr / pAp;
    double rr_new = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
      rr_new += r[i] * r[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
    L.cg_iterations = it + 1;
  }
  const double vmin = *std::min_element(v.begin(), v.end());
  for (double& t : v) t -= vmin;
  L.v_atoms = std::move(v);
  L.u_atoms.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    L.u_atoms[i] = L.problem.at(i, L.coupling.partner[i]) - L.v_atoms[L.coupling.partner[i]];
  return L;
}

}  // namespace matchkit
