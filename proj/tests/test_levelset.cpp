#include <catch_amalgamated.hpp>

#include <cmath>

#include "matchkit/applications.hpp"
#include "oracles.hpp"

using namespace matchkit;
using Catch::Approx;

namespace {

std::shared_ptr<const DensityMeasure> ex1_mu(std::size_t res = 128) {
  return std::make_shared<const DensityMeasure>(DensityMeasure::uniform(example1::domain(), res));
}

const MatchingSolution& ex1_solution() {
  static const MatchingSolution sol = build_matching(example1::surplus(), ex1_mu(256), example1::nu(), SolverConfig{});
  return sol;
}

const MatchingSolution& rc_solution() {
  static const MatchingSolution sol = [] {
    auto mu = std::make_shared<const DensityMeasure>(DensityMeasure::uniform(rc::domain(), 256));
    return build_matching(rc::surplus(), mu, rc::nu(), SolverConfig{});
  }();
  return sol;
}

}  // namespace

TEST_CASE("h limits and the closed-form zero") {
  const auto mu = ex1_mu(256);
  const auto s = example1::surplus();
  const auto nu = example1::nu();
  const double y = 0.7;
  CHECK(h_value(*s, *mu, nu, y, -10.0) == Approx(-nu.cdf(y)));
  CHECK(h_value(*s, *mu, nu, y, 10.0) == Approx(1 - nu.cdf(y)));
  const double yb = std::exp(1.0) / (2 * (std::exp(1.0) - 1));
  const double k = 1 + oracle::ex1_K(yb) / 2;
  CHECK(std::abs(h_value(*s, *mu, nu, yb, k)) <= 1e-4);
}

TEST_CASE("h is nondecreasing in k") {
  const auto mu = ex1_mu();
  const auto s = example1::surplus();
  for (double y : {0.55, 0.7, 0.9}) {
    double prev = -2;
    for (double k = 0.9; k <= 1.6; k += 0.01) {
      const double h = h_value(*s, *mu, example1::nu(), y, k);
      CHECK(h >= prev);
      prev = h;
    }
  }
}

TEST_CASE("split at the bottom of the support") {
  const auto mu = ex1_mu();
  const auto [lo, hi] = solve_split(*example1::surplus(), *mu, example1::nu(), 0.5);
  // nu((-inf, 1/2]) = 0 so k_minus is the infimum of s_y(., 1/2) = 1 + p (x2 - 1/2) / 2.
  CHECK(lo <= 1.0 + 1e-6);
  CHECK(hi >= lo);
}

TEST_CASE("split function tracks the proportionate-splitting oracle") {
  SolverConfig cfg;
  cfg.y_grid = 65;
  const auto sp = compute_split(*example1::surplus(), *ex1_mu(), example1::nu(), cfg);
  REQUIRE(sp.size() == 65);
  for (std::size_t i = 4; i + 4 < sp.size(); ++i) CHECK(2 * (sp.k[i] - 1) == Approx(oracle::ex1_K(sp.y[i])).margin(5e-4));
  for (std::size_t i = 1; i < sp.size(); ++i) {
    CHECK(sp.k[i] >= sp.k[i - 1]);
    CHECK(sp.k_minus[i] <= sp.k_plus[i]);
  }
  // v is the trapezoid antiderivative of k.
  for (std::size_t i = 1; i < sp.size(); ++i)
    CHECK(sp.v[i] - sp.v[i - 1] == Approx(0.5 * (sp.k[i] + sp.k[i - 1]) * (sp.y[i] - sp.y[i - 1])));
}

TEST_CASE("mass mismatch is infeasible") {
  const auto mu = ex1_mu(64);
  SublevelMass field(mu->grid(), [](auto x) { return x[0]; });
  CHECK_THROWS_AS(detail::split_on_field(field, 1.5, SolverConfig{}), InfeasibleError);
  CHECK_NOTHROW(detail::split_on_field(field, 0.5, SolverConfig{}));
}

TEST_CASE("surplus flat in y splits at the jump") {
  auto flat = parse_surplus_expression("x1 + x2", 2, 1);
  SolverConfig cfg;
  cfg.y_grid = 9;
  cfg.diagnostics = false;
  const auto sp = compute_split(*flat, *ex1_mu(64), example1::nu(), cfg);
  for (double k : sp.k) CHECK(k == Approx(0.0).margin(1e-9));
}

TEST_CASE("match on the closed-form curve") {
  const MatchingSolution& sol = ex1_solution();
  const double y = 0.6, K = oracle::ex1_K(y);
  for (double p : {0.4, 0.7, 1.0}) {
    const double x2 = 1 - y + K / p;
    if (x2 < 0.5 || x2 > 1) continue;
    CHECK(sol.F(Point{p, x2}) == Approx(0.6).margin(1e-3));
  }
}

TEST_CASE("rc matching endpoints") {
  const MatchingSolution& sol = rc_solution();
  CHECK(sol.F(Point{1.0, 0.0}) == Approx(2.0).margin(1e-3));
  CHECK(sol.F(Point{0.6, 0.8}) == Approx(2.0).margin(1e-3));
  CHECK(sol.F(Point{0.0, 0.0}) == Approx(1.0).margin(1e-3));
  CHECK(sol.nested().verdict == Verdict::kNested);
}

TEST_CASE("nestedness verdicts") {
  const MatchingSolution& sol = ex1_solution();
  const NestednessReport& r = sol.nested();
  CHECK(r.verdict == Verdict::kNested);
  CHECK(r.monotone_inclusion_violations.empty());
  CHECK(r.unique_splitting_failures.empty());
  CHECK(r.transversality_flags.empty());
  CHECK(r.dynamic_criterion_min >= 0);

  auto mu2 = std::make_shared<const DensityMeasure>(DensityMeasure::uniform(example2::domain(), 128));
  SolverConfig cfg;
  cfg.y_grid = 129;
  const MatchingSolution s2 = build_matching(example2::surplus(), mu2, example2::nu(), cfg);
  CHECK(s2.nested().verdict == Verdict::kNotNested);
  REQUIRE_FALSE(s2.nested().unique_splitting_failures.empty());
  for (const auto& f : s2.nested().unique_splitting_failures) CHECK(f.roots.size() >= 2);
  CHECK_FALSE(s2.decomposed());
}

TEST_CASE("pseudo-index instances are nested") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const auto inst = pseudo_index::random_instance(seed, 128);
    SolverConfig cfg;
    cfg.y_grid = 129;
    const MatchingSolution sol = build_matching(inst.s, inst.mu, inst.nu, cfg);
    INFO(inst.description);
    CHECK(sol.nested().verdict == Verdict::kNested);
  }
}

TEST_CASE("solution invariants") {
  for (const MatchingSolution* sol : {&ex1_solution(), &rc_solution()}) {
    INFO(sol->surplus().name());
    const PushForwardReport pf = push_forward_check(*sol);
    CHECK(pf.max_abs_error <= 2 * sol->config().mass_tol);
    CHECK(pf.y.size() == sol->split().size());
    const StabilityReport st = stability_check(*sol);
    CHECK(st.min_residual >= -sol->config().stab_tol);
    CHECK(support_monotonicity_check(*sol) >= -2 * sol->config().stab_tol);
  }
}

TEST_CASE("u + v = s on the support") {
  const MatchingSolution& sol = ex1_solution();
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    Point x{rng.uniform(), rng.uniform(0.5, 1.0)};
    const double y = sol.F(x);
    CHECK(sol.u(x) + sol.v(y) == Approx(sol.surplus().value(x, y)).margin(1e-12));
  }
}

TEST_CASE("envelope and compatibility") {
  std::vector<Point> xs;
  Rng rng(8);
  while (xs.size() < 60) {
    Point x{rng.uniform(), rng.uniform()};
    if (norm(x) < 0.95 && norm(x) > 0.05) xs.push_back(x);
  }
  const EnvelopeReport env = envelope_check(rc_solution(), xs);
  CHECK(env.max_rel_error <= 1e-3);
  CHECK(env.used >= 30);
  const CompatibilityReport cc = compatibility_check(rc_solution(), xs);
  CHECK(cc.max_gradient_residual <= 1e-3);
  CHECK(cc.max_ccond_residual <= 1e-3);
}

TEST_CASE("iso-husband sets lie on the level curve") {
  const MatchingSolution& sol = ex1_solution();
  const double y = 0.8;
  const IsoSet iso = iso_husband_set(sol, y);
  REQUIRE_FALSE(iso.empty());
  const double K = oracle::ex1_K(y);
  for (const Point& x : iso.points) {
    CHECK(example1::domain().contains(x));
    CHECK(x[0] * (x[1] + y - 1) == Approx(K).margin(2e-3));
  }
}

TEST_CASE("iso extraction on a known field") {
  const SampleGrid g = SampleGrid::over(Domain::box({-1.0, -1.0}, {1.0, 1.0}), 41);
  std::vector<double> f(g.points.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = norm(g.points[i]) - 0.5;
  const IsoSet iso = extract_iso_set(g, f);
  REQUIRE(iso.polylines.size() == 1);
  for (const Point& x : iso.points) CHECK(norm(x) == Approx(0.5).margin(2e-3));
  std::vector<double> far(g.points.size(), 1.0);
  CHECK(extract_iso_set(g, far).empty());
}

TEST_CASE("local match construction") {
  auto s = example1::surplus();
  const LocalMatch lm = local_match_construction(s, {1.0, 0.75}, 0.7, 0.05);
  CHECK(lm.F(Point{1.0, 0.75}) == Approx(0.7).margin(1e-10));
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    Point x{1.0 - lm.radius * rng.uniform(0.0, 0.7), 0.75 + lm.radius * rng.uniform(-0.7, 0.7)};
    CHECK(norm(lm.DF(x)) > 0);
  }
  CHECK_THROWS_AS(local_match_construction(s, {0.0, 0.5}, 0.5, 0.05), DomainError);
}

TEST_CASE("stratified sampling is deterministic and in-domain") {
  const auto mu = ex1_mu(64);
  const auto a = sample_from_measure(*mu, 300, 9), b = sample_from_measure(*mu, 300, 9);
  CHECK(a == b);
  CHECK(sample_from_measure(*mu, 300, 10) != a);
  for (const Point& x : a) CHECK(mu->domain().contains(x));
  std::size_t low = 0;
  for (const Point& x : a) low += x[1] <= 0.75;
  CHECK(low == Approx(150).margin(15));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.y_grid = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mass_tol = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
