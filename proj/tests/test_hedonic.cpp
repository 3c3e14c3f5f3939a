#include <catch_amalgamated.hpp>

#include <cmath>

#include "matchkit/applications.hpp"
#include "matchkit/hedonic.hpp"
#include "oracles.hpp"

using namespace matchkit;
using Catch::Approx;

namespace {

const MatchingSolution& rc_solution() {
  static const HedonicSurplusPtr hs = reduce_to_matching(rc_problem(2));
  static const MatchingSolution sol = [] {
    auto mu = std::make_shared<const DensityMeasure>(DensityMeasure::uniform(rc::domain(), 256));
    SolverConfig cfg;
    cfg.diagnostics = false;
    return build_matching(hs, mu, rc::nu(), cfg);
  }();
  return sol;
}

const HedonicSurplus& rc_hs() { return dynamic_cast<const HedonicSurplus&>(rc_solution().surplus()); }

}  // namespace

TEST_CASE("closed-form reductions") {
  auto rc = reduce_to_matching(rc_problem(2));
  auto hq = reduce_to_matching(hedonic_quadratic_problem(2));
  Rng rng(1);
  for (int i = 0; i < 30; ++i) {
    const Point x{rng.uniform(), rng.uniform()};
    const double y = rng.uniform(1.0, 2.0);
    CHECK(rc->value(x, y) == Approx(0.5 * y * dot(x, x)));
    const Point z = rc->z_star(x, Point{y});
    CHECK(z[0] == Approx(y * x[0]));
    CHECK(z[1] == Approx(y * x[1]));
    const Point yy{rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0)};
    CHECK(hq->value(x, yy) == Approx(0.5 * (x[0] * x[0] * yy[0] + x[1] * x[1] * yy[1])));
    const Point zq = hq->z_star(x, yy);
    CHECK(zq[0] == Approx(x[0] * yy[0]));
    CHECK(zq[1] == Approx(x[1] * yy[1]));
  }
}

TEST_CASE("numeric ascent agrees with the closed form") {
  auto np = rc_problem(2);
  np.z_solver = ZSolver::kNumericAscent;
  np.z_box = default_z_box(np, Box{{0, 0}, {1, 1}}, Box{{1}, {2}});
  auto numeric = reduce_to_matching(np);
  auto closed = reduce_to_matching(rc_problem(2));
  Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    const Point x{rng.uniform(), rng.uniform()};
    const double y = rng.uniform(1.0, 2.0);
    CHECK(numeric->value(x, y) == Approx(closed->value(x, y)).margin(1e-9));
    CHECK(numeric->d_y(x, y) == Approx(closed->d_y(x, y)).margin(1e-5));
  }
}

TEST_CASE("degenerate buyer gives a surplus constant in x") {
  HedonicProblem p;
  p.name = "flat_buyer";
  p.m = 2;
  p.n = 1;
  p.product_dim = 1;
  p.U = [](Span, Span) { return 0.0; };
  p.c = [](Span y, Span z) { return (z[0] - y[0]) * (z[0] - y[0]) + 1; };
  p.z_box = Box{{-3.0}, {3.0}};
  auto s = reduce_to_matching(p);
  for (double y : {0.0, 0.5, 1.0}) {
    CHECK(s->value(Point{0.1, 0.2}, y) == Approx(-1.0).margin(1e-9));
    CHECK(s->value(Point{0.9, 0.4}, y) == Approx(-1.0).margin(1e-9));
  }
}

TEST_CASE("equilibrium goods") {
  auto goods = equilibrium_goods(rc_solution(), rc_hs());
  const Point z0 = goods(Point{0.0, 0.0});
  CHECK(norm(z0) == Approx(0.0).margin(1e-12));
  const Point z1 = goods(Point{0.6, 0.8});
  CHECK(z1[0] == Approx(1.2).margin(2e-3));
  CHECK(z1[1] == Approx(1.6).margin(2e-3));
}

TEST_CASE("rc price schedule") {
  std::vector<Point> xs;
  for (double r : {0.0, std::sqrt(0.5), 1.0}) xs.push_back({r, 0.0});
  const PriceSchedule ps = price_schedule(rc_solution(), rc_hs(), xs);
  REQUIRE(ps.traded.size() == 3);
  for (const TradedPoint& t : ps.traded) {
    const auto [Z, P] = oracle::rc_price(t.y[0]);
    CHECK(dot(t.z, t.z) == Approx(Z).margin(2e-3));
    CHECK(t.P == Approx(P).margin(1e-3));
    CHECK(t.lower <= t.P + kPriceTol);
    CHECK(t.P <= t.upper + kPriceTol);
  }
  CHECK(ps.traded[1].y[0] == Approx(1.5).margin(1e-3));
  CHECK(dot(ps.traded[1].z, ps.traded[1].z) == Approx(1.125).margin(2e-3));
  CHECK(ps.traded[1].P == Approx(0.4375).margin(1e-3));
  CHECK(ps.max_side_gap <= 1e-9);
  CHECK(ps.max_band_violation <= kPriceTol);
}

TEST_CASE("crossing envelopes are a price inconsistency") {
  const HedonicSurplus& hs = rc_hs();
  Payoffs bad{[](Span x) { return Point{dot(x, x) + 1}; }, [](Span) { return -1.0; },
              [](Span y) { return 0.25 * (y[0] - 1) * (y[0] - 1); }};
  std::vector<Point> xs{{0.5, 0.5}, {0.2, 0.1}};
  CHECK_THROWS_AS(price_schedule(bad, hs, xs, quantile_atoms(rc::nu(), 33)), PriceInconsistencyError);
}

TEST_CASE("no bunching on random rc instances") {
  const HedonicSurplus& hs = rc_hs();
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    const auto inst = rc::random_instance(seed, seed == 100);
    const auto p = sample_atoms(hs, *inst.mu, inst.nu, 200, seed);
    const auto c = solve_exact(p);
    CHECK(no_bunching_check(p, c, hs).collisions.empty());
  }
  // Uniform square against a near-Dirac husband population.
  auto sq = DensityMeasure::uniform(Domain::box({0.0, 0.0}, {1.0, 1.0}), 64);
  const auto p = sample_atoms(hs, sq, near_dirac(1.0 + 1e-3), 200, 3);
  CHECK(no_bunching_check(p, solve_exact(p), hs).collisions.empty());
}

TEST_CASE("identical x-atoms collide") {
  const HedonicSurplus& hs = rc_hs();
  const auto p = make_problem(hs, {{0.5, 0.5}, {0.5, 0.5}, {0.1, 0.9}}, {{1.5}, {1.5}, {1.5}});
  const auto c = solve_exact(p);
  const BunchingReport r = no_bunching_check(p, c, hs);
  REQUIRE(r.collisions.size() == 1);
  CHECK(r.collisions[0].identical_x);
}

TEST_CASE("disks on a lattice") {
  disks::Params prm;
  auto hs = reduce_to_matching(hedonic_quadratic_problem(2));
  const LatticeSolution L = solve_on_lattice(*hs, disks::x_domain(prm), disks::y_domain(prm), 0.1);
  CHECK(L.problem.size() > 200);
  CHECK(L.coupling.duality_gap == Approx(0.0).margin(kLpTol));
  const std::vector<double> a{2, 2}, b{3, 3};
  for (std::size_t i = 0; i < L.problem.size(); ++i) {
    const Point& x = L.problem.x_atoms[i];
    const Point& y = L.problem.y_atoms[L.coupling.partner[i]];
    const auto F = oracle::disks_F({x[0], x[1]}, a, b);
    CHECK(y[0] == Approx(F[0]).margin(1e-12));
    CHECK(y[1] == Approx(F[1]).margin(1e-12));
  }
  CHECK(*std::min_element(L.v_atoms.begin(), L.v_atoms.end()) == Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(solve_on_lattice(*hs, disks::x_domain(prm), Domain::disk_sector({3.0, 3.0}, 0.5), 0.1),
                  ConfigError);
}
