#pragma once

// Test-side reference values computed from first principles, without
// calling the library's closed forms or solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  double glo = g(lo);
  for (int i = 0; i < iters && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm <= 0) == (glo <= 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Income-fertility model on [0,1] x [1/2,1] with uniform wives and uniform
// husbands on [1/2,1]. With K = 2(k - 1) the sublevel set of husband y is
// {p (x2 + y - 1) <= K}. Its normalized mass, integrated exactly over p,
// is 2 * int_{1/2}^{1} min(1, K / (x2 + y - 1)) dx2.
inline double ex1_sublevel_mass(double y, double K) {
  const double t0 = y - 0.5, t1 = y;  // range of x2 + y - 1
  double integral;
  if (K <= t0) integral = t0 > 0 ? K * std::log(t1 / t0) : 0.0;
  else if (K >= t1) integral = 0.5;
  else integral = (K - t0) + K * std::log(t1 / K);
  return 2 * integral;
}

/// K(y) from proportionate splitting: sublevel mass = nu((-inf, y]).
inline double ex1_K(double y) {
  if (y <= 0.5) return 0.0;
  const double target = 2 * (y - 0.5);
  return bisect([&](double K) { return ex1_sublevel_mass(y, K) - target; }, 0.0, 1.0);
}

/// Husband of wife (p, x2): the y solving p (x2 + y - 1) = K(y).
inline double ex1_F(double p, double x2) {
  auto g = [&](double y) { return p * (x2 + y - 1) - ex1_K(y); };
  if (g(1.0) >= 0) return 1.0;
  // Near y = 1/2 both sides vanish on x2 = 1/2; start just above.
  const double lo = 0.5 + 1e-12;
  if (g(lo) <= 0) return 0.5;
  return bisect(g, lo, 1.0);
}

/// The two one-sided limits at x2 = 1/2 on the unit square: the upper
/// block's boundary husband and its mirror image.
inline std::pair<double, double> ex2_limits(double p) {
  const double e = std::exp(1 / p);
  const double up = e / (2 * (e - 1));
  return {1 - up, up};
}

/// Symmetric solution on the unit square, away from x2 = 1/2.
inline double ex2_G(double p, double x2) {
  return x2 > 0.5 ? ex1_F(p, x2) : 1 - ex1_F(p, 1 - x2);
}

// Screening with s = y |x|^2 / 2, U = x.z, c(y, z) = |z|^2 / (2y),
// quarter disk and uniform [1,2].
inline double rc_F(double x1, double x2) { return x1 * x1 + x2 * x2 + 1; }
inline double rc_v(double y) { return (y - 1) * (y - 1) / 4; }
inline double rc_cost(double y, double Z) { return Z / (2 * y); }
/// (|z|^2, price) traded by husband y.
inline std::pair<double, double> rc_price(double y) {
  const double Z = y * y * (y - 1);
  return {Z, rc_v(y) + rc_cost(y, Z)};
}

// Quadratic hedonic model: s = sum x_i^2 y_i / 2 on unit disks centered
// at a and b. Matching shifts the disk; z_i = x_i y_i.
inline std::vector<double> disks_F(const std::vector<double>& x, const std::vector<double>& a,
                                   const std::vector<double>& b) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - a[i] + b[i];
  return y;
}

/// Price up to a constant. Per coordinate with d = b - a: the husband is
/// y = x + d, z = x y, v(y) = (y - d)^3 / 6 from D_y s = x^2 / 2, and the
/// price at z is v(y) + z^2 / (2y).
inline double disks_P(const std::vector<double>& z, const std::vector<double>& a, const std::vector<double>& b) {
  double P = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = b[i] - a[i];
    const double x = (-d + std::sqrt(d * d + 4 * z[i])) / 2;
    const double y = x + d;
    P += x * x * x / 6 + z[i] * z[i] / (2 * y);
  }
  return P;
}

/// Optimal assignment value by enumerating all permutations (tiny n).
inline double brute_force_assignment(const std::vector<double>& s, std::size_t n, std::vector<std::size_t>* best_perm) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double t = 0;
    for (std::size_t i = 0; i < n; ++i) t += s[i * n + perm[i]];
    if (t > best) {
      best = t;
      if (best_perm) *best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

}  // namespace oracle
