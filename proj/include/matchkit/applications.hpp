#pragma once

// Closed-form reference solutions for the income-fertility model, the
// competitive screening model and the quadratic hedonic model, plus
// factory functions for the corresponding solver inputs.

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "matchkit/geometry.hpp"
#include "matchkit/levelset.hpp"
#include "matchkit/surplus.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

// ---------------------------------------------------------------------------
// Income-fertility model, uniform on [0,1] x [1/2,1] and [1/2,1].

namespace example1 {

inline constexpr double kE = std::numbers::e;

inline double y_break() { return kE / (2 * (kE - 1)); }

/// f(x, y) = x - y + (x + y - 1) ln(y / (x + y - 1))
inline double f(double x, double y) { return x - y + (x + y - 1) * std::log(y / (x + y - 1)); }
inline double f_x(double x, double y) { return std::log(y / (x + y - 1)); }
inline double f_y(double x, double y) { return -1 + std::log(y / (x + y - 1)) + (x + y - 1) / y - 1; }

/// Root of f(., y) in [1/2, 1] (f_x > 0 there).
inline double x_bar(double y) {
  if (y < 0.5 || y > 1) throw DomainError("x_bar: y outside [1/2, 1]");
  const double lo = std::max(0.5, 1 - y + 1e-15);
  return bisect_root([y](double x) { return f(x, y); }, lo, 1.0, 1e-14);
}

/// K(y) = 2 (v'(y) - 1).
inline double K(double y) {
  if (!(y >= 0.5 && y <= 1)) throw DomainError("example1 K: y outside [1/2, 1]");
  if (y == 0.5) return 0.0;
  if (y <= y_break()) return (y - 0.5) / std::log(y / (y - 0.5));
  return x_bar(y) + y - 1;
}

/// Fertility at which the iso-husband curve of y meets x = 1/2.
inline double p_of_y(double y) {
  if (!(y > 0.5 && y <= 1)) throw DomainError("p_of_y: y outside (1/2, 1]");
  return 1 / std::log(y / (y - 0.5));
}

inline double y_of_p(double p) {
  if (!(p > 0)) throw DomainError("y_of_p: p must be > 0");
  const double e = std::exp(1 / p);
  return e / (2 * (e - 1));
}

/// Matching map: the y solving p (x + y - 1) = K(y), clamped to [1/2, 1].
inline double F(double p, double x) {
  // On x = 1/2 the equation also has the trivial root y = 1/2; the
  // matching branch is the boundary intersection y(p).
  if (x == 0.5) return p > 0 ? y_of_p(p) : 0.5;
  auto g = [p, x](double y) { return p * (x + y - 1) - K(y); };
  if (g(0.5) <= 0) return 0.5;
  if (g(1.0) >= 0) return 1.0;
  return bisect_root(g, 0.5, 1.0, 1e-14);
}

inline SurplusPtr surplus() { return std::make_shared<IncomeFertilitySurplus>(0.5); }
inline Domain domain() { return Domain::box({0.0, 0.5}, {1.0, 1.0}); }
inline Measure1D nu() { return Measure1D::uniform(0.5, 1.0); }

}  // namespace example1

// ---------------------------------------------------------------------------
// Same surplus, uniform on [0,1]^2 and [0,1].

namespace example2 {

/// Upper and lower limits of the matching map at x = 1/2.
struct TwoLimits {
  double upper, lower;
};

inline TwoLimits limits(double p) {
  const double up = example1::y_of_p(p);
  return {up, 1 - up};
}

/// Symmetric solution built from the block x >= 1/2 (which is the
/// example-1 problem) and its mirror image.
inline double G(double p, double x) {
  if (x > 0.5) return example1::F(p, x);
  if (x < 0.5) return 1 - example1::F(p, 1 - x);
  throw DomainError("example2 G: x = 1/2 is two-valued; use limits()");
}

inline SurplusPtr surplus() { return example1::surplus(); }
inline Domain domain() { return Domain::box({0.0, 0.0}, {1.0, 1.0}); }
inline Measure1D nu() { return Measure1D::uniform(0.0, 1.0); }

inline std::vector<DecompositionBlock> decomposition() {
  return {{Box{{0.0, 0.5}, {1.0, 1.0}}, 0.5, 1.0}, {Box{{0.0, 0.0}, {1.0, 0.5}}, 0.0, 0.5}};
}

}  // namespace example2

// ---------------------------------------------------------------------------
// Income-fertility on a union of two boxes.

namespace example3 {

inline Domain domain(double eps) {
  if (eps < 0) throw ConfigError("example3: epsilon must be >= 0");
  return Domain::box_union({Box{{0.5, 0.5}, {1.0, 0.75 + eps}}, Box{{0.0, 0.75}, {0.5, 1.0}}});
}

inline Box high_fertility_block(double eps) { return Box{{0.5, 0.5}, {1.0, 0.75 + eps}}; }

struct Run {
  MatchingSolution solution;
  bool outside_hypotheses;  // eps == 0: domain neither connected nor Lipschitz
};

inline Run run(double eps, std::size_t resolution = 512, SolverConfig cfg = {}) {
  auto mu = std::make_shared<const DensityMeasure>(DensityMeasure::uniform(domain(eps), resolution));
  return {build_matching(example1::surplus(), mu, example1::nu(), cfg), eps == 0.0};
}

struct BlockShare {
  std::size_t in_high = 0, in_low = 0;
};

/// Which block the iso-husband set of y visits.
inline BlockShare iso_blocks(const MatchingSolution& sol, double y, double eps, std::size_t n = 129) {
  const IsoSet iso = iso_husband_set(sol, y, n);
  const Box hi = high_fertility_block(eps);
  BlockShare r;
  for (const Point& x : iso.points) {
    if (hi.contains(x)) ++r.in_high;
    else ++r.in_low;
  }
  return r;
}

}  // namespace example3

// ---------------------------------------------------------------------------
// Competitive screening: s = y|x|^2/2, quarter disk and uniform [1,2].

namespace rc {

inline void check_x(std::span<const double> x) {
  if (norm(x) > 1 + 1e-12) throw DomainError("rc reference: |x| > 1");
}
inline void check_y(double y) {
  if (y < 1 - 1e-12 || y > 2 + 1e-12) throw DomainError("rc reference: y outside [1, 2]");
}

inline double F(std::span<const double> x) {
  check_x(x);
  return dot(x, x) + 1;
}
inline double u(std::span<const double> x) {
  check_x(x);
  const double r2 = dot(x, x);
  return 0.5 * r2 + 0.25 * r2 * r2;
}
inline double v(double y) {
  check_y(y);
  return 0.25 * (y - 1) * (y - 1);
}
inline Point z(std::span<const double> x) {
  const double y = F(x);
  Point out(x.begin(), x.end());
  for (double& c : out) c *= y;
  return out;
}

struct PricePoint {
  double Z, P;  // Z = |z|^2
};

inline PricePoint price_point(double y) {
  check_y(y);
  return {y * y * (y - 1), 0.25 * (3 * y - 1) * (y - 1)};
}

inline SurplusPtr surplus() { return std::make_shared<RcIndexSurplus>(2); }
inline Domain domain() { return Domain::disk_sector({0.0, 0.0}, 1.0, {Orthant::kNonNeg, Orthant::kNonNeg}); }
inline Measure1D nu() { return Measure1D::uniform(1.0, 2.0); }

/// Random product density on [0,1]^2 and a random sub-interval of [1, 2];
/// with `near_dirac` the interval has half-width 1e-3.
struct RandomInstance {
  std::shared_ptr<const DensityMeasure> mu;
  Measure1D nu;
};

inline RandomInstance random_instance(std::uint64_t seed, bool near_dirac = false, std::size_t resolution = 128) {
  Rng rng(seed);
  const double c1 = rng.uniform(-0.8, 2.0), c2 = rng.uniform(-0.8, 2.0);
  auto mu = std::make_shared<const DensityMeasure>(
      Domain::box({0.0, 0.0}, {1.0, 1.0}),
      [c1, c2](std::span<const double> x) { return (1 + c1 * x[0]) * (1 + c2 * x[1]); }, resolution,
      "product-linear");
  if (near_dirac) {
    const double y0 = rng.uniform(1.001, 1.999);
    return {mu, Measure1D::uniform(y0 - 1e-3, y0 + 1e-3)};
  }
  const double a = rng.uniform(1.0, 2.0), b = rng.uniform(1.0, 2.0);
  const double c3 = rng.uniform(-0.8, 2.0);
  const double lo = std::min(std::min(a, b), 1.95), hi = std::max(std::max(a, b), lo + 0.05);
  return {mu, Measure1D::from_density(
                  lo, hi, [lo, hi, c3](double y) { return 1 + c3 * (y - lo) / (hi - lo); }, "linear")};
}

}  // namespace rc

// ---------------------------------------------------------------------------
// Quadratic hedonic model on two disks.

namespace disks {

struct Params {
  Point a{2.0, 2.0}, b{3.0, 3.0};
  double K = 0.0;
};

inline void check(const Params& prm, std::span<const double> x) {
  for (std::size_t i = 0; i < prm.a.size(); ++i)
    if (!(prm.a[i] > 1 && prm.b[i] > 1)) throw DomainError("disks reference: a_i, b_i must exceed 1");
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) r += (x[i] - prm.a[i]) * (x[i] - prm.a[i]);
  if (r > 1 + 1e-9) throw DomainError("disks reference: x outside the buyer disk");
}

inline Point F(const Params& prm, std::span<const double> x) {
  check(prm, x);
  Point y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - prm.a[i] + prm.b[i];
  return y;
}

inline Point z(const Params& prm, std::span<const double> x) {
  check(prm, x);
  Point out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (x[i] - prm.a[i] + prm.b[i]);
  return out;
}

inline double u(const Params& prm, std::span<const double> x) {
  check(prm, x);
  double s = prm.K;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * x[i] * x[i] / 3 - 0.5 * (prm.a[i] - prm.b[i]) * x[i] * x[i];
  return s;
}

inline double v(const Params& prm, std::span<const double> y) {
  double s = -prm.K;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = prm.a[i] - prm.b[i] + y[i];
    s += t * t * t / 6;
  }
  return s;
}

inline double P(const Params& prm, std::span<const double> zz) {
  double s = -prm.K;
  for (std::size_t i = 0; i < zz.size(); ++i) {
    const double d = prm.a[i] - prm.b[i];
    s += (std::pow(d * d + 4 * zz[i], 1.5) + d * (d * d + 6 * zz[i])) / 12;
  }
  return s;
}

inline SurplusPtr surplus(std::size_t m = 2) { return std::make_shared<HedonicQuadraticSurplus>(m); }
inline Domain x_domain(const Params& prm) { return Domain::disk_sector(prm.a, 1.0); }
inline Domain y_domain(const Params& prm) { return Domain::disk_sector(prm.b, 1.0); }

}  // namespace disks

// ---------------------------------------------------------------------------
// Random pseudo-index instances.

namespace pseudo_index {

/// Product density on [0,1]^2 with per-axis exponents: prod (1 + c_i x_i).
struct RandomInstance {
  SurplusPtr s;
  std::shared_ptr<const DensityMeasure> mu;
  Measure1D nu;
  std::string description;
};

inline RandomInstance random_instance(std::uint64_t seed, std::size_t resolution = 256) {
  Rng rng(seed);
  static const char* kAlpha[] = {"zero", "linear", "half_square"};
  static const char* kIndex[] = {"linear", "half_square", "log_linear"};
  static const char* kSigma[] = {"product", "exp_product", "half_square_sum"};
  const std::string alpha = kAlpha[rng.next() % 3];
  const std::string index = kIndex[rng.next() % 3];
  const std::string sigma = kSigma[rng.next() % 3];
  Point w{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
  auto s = std::make_shared<PseudoIndexSurplus>(2, alpha, index, sigma, w);
  const double c1 = rng.uniform(-0.8, 2.0), c2 = rng.uniform(-0.8, 2.0);
  auto mu = std::make_shared<const DensityMeasure>(
      Domain::box({0.0, 0.0}, {1.0, 1.0}),
      [c1, c2](std::span<const double> x) { return (1 + c1 * x[0]) * (1 + c2 * x[1]); }, resolution,
      "product-linear");
  const double ylo = rng.uniform(0.0, 1.0);
  const double yhi = ylo + rng.uniform(0.3, 1.5);
  const double c3 = rng.uniform(-0.8, 2.0);
  Measure1D nu = Measure1D::from_density(
      ylo, yhi, [ylo, yhi, c3](double y) { return 1 + c3 * (y - ylo) / (yhi - ylo); }, "linear");
  return {s, mu, nu,
          "alpha=" + alpha + " index=" + index + " sigma=" + sigma + " mu=(1+" + std::to_string(c1) +
              "x1)(1+" + std::to_string(c2) + "x2)"};
}

}  // namespace pseudo_index

}  // namespace matchkit
