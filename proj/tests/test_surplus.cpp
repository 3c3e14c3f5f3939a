#include <catch_amalgamated.hpp>

#include <cmath>

#include "matchkit/surplus.hpp"

using namespace matchkit;
using Catch::Approx;

namespace {

std::vector<std::pair<Point, double>> samples() {
  std::vector<std::pair<Point, double>> s;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) s.push_back({{rng.uniform(0.05, 1.0), rng.uniform(0.5, 1.0)}, rng.uniform(0.5, 1.0)});
  return s;
}

}  // namespace

TEST_CASE("income-fertility expression matches the catalog entry") {
  const IncomeFertilitySurplus cat(0.5);
  auto expr = parse_surplus_expression("0.25*p*(x+y+1)^2 + (1-p)*(x+y)", 2, 1, {{"p", "x1"}, {"x", "x2"}});
  for (const auto& [x, y] : samples()) CHECK(std::abs(expr->value(x, y) - cat.value(x, y)) <= 1e-12);
}

TEST_CASE("analytic derivatives agree with finite differences") {
  const IncomeFertilitySurplus s;
  const DerivativeConsistency d = derivative_consistency(s, samples());
  CHECK(d.max_rel_grad_x <= 1e-6);
  CHECK(d.max_rel_d_y <= 1e-6);
  CHECK(d.max_rel_d_yy <= 1e-4);
  CHECK(d.max_rel_grad_x_dy <= 1e-4);
  CHECK(d.max_mixed_vs_grad_x_dy <= 1e-4);

  const PseudoIndexSurplus p(2, "linear", "log_linear", "exp_product", {1.5, 0.7});
  const DerivativeConsistency e = derivative_consistency(p, samples());
  CHECK(e.max_rel_grad_x <= 1e-5);
  CHECK(e.max_rel_d_y <= 1e-5);
  CHECK(e.max_rel_grad_x_dy <= 1e-3);
}

TEST_CASE("linear expression has exact s_y") {
  auto s = parse_surplus_expression("x1*y", 1, 1);
  for (double x : {-1.0, 0.3, 2.0})
    for (double y : {0.0, 1.0, 5.0}) CHECK(std::abs(s->d_y(Point{x}, y) - x) <= 1e-8);
  CHECK(s->provenance() == Provenance::kExpressionFd);
}

TEST_CASE("unknown identifiers are parse errors") {
  CHECK_THROWS_AS(parse_surplus_expression("x3*y", 2, 1), ParseError);
  CHECK_THROWS_AS(parse_surplus_expression("ln(x1", 2, 1), ParseError);
  CHECK_THROWS_AS(parse_surplus_expression("x1*y", 2, 1, {{"p", "q"}}), ConfigError);
}

TEST_CASE("cross-difference") {
  const IncomeFertilitySurplus s;
  const Point x{0.3, 0.7}, x0{0.9, 0.6};
  CHECK(cross_difference(s, x, 0.8, x, 0.8) == 0.0);
  CHECK(cross_difference(s, x, 0.8, x0, 0.8) == Approx(0.0).margin(1e-15));
  // s = x y with x - x0 = 1, y - y0 = 1.
  auto b = parse_surplus_expression("x1*y", 1, 1);
  CHECK(cross_difference(*b, Point{2.0}, 3.0, Point{1.0}, 2.0) == Approx(1.0));
  CHECK(cross_difference(s, Point{1.0, 1.0}, 1.0, Point{1.0, 1.0}, 0.5) == Approx(0.0).margin(1e-15));
}

TEST_CASE("cross-difference is antisymmetric in the y pair") {
  const PseudoIndexSurplus s(2, "half_square", "half_square", "product");
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Point x{rng.uniform(), rng.uniform()}, x0{rng.uniform(), rng.uniform()};
    const double y = rng.uniform(), y0 = rng.uniform();
    CHECK(cross_difference(s, x, y, x0, y0) == Approx(-cross_difference(s, x, y0, x0, y)).margin(1e-12));
  }
}

TEST_CASE("twist") {
  const RcIndexSurplus rc(2);
  const auto r = check_twist(rc, {{1.0, 0.0}}, {{{1.0}, {2.0}}});
  CHECK(r.holds);
  CHECK(r.min_diff_norm == Approx(1.0));  // |D_x s(x,1) - D_x s(x,2)| = |x|

  const auto origin = check_twist(rc, {{0.0, 0.0}}, {{{1.0}, {1.5}}});
  CHECK_FALSE(origin.holds);
  REQUIRE(origin.witnesses.size() == 1);

  auto additive = parse_surplus_expression("x1^2 + exp(y)", 1, 1);
  std::vector<Point> xs{{0.1}, {0.5}, {0.9}};
  const auto a = check_twist(*additive, xs, {{{0.0}, {1.0}}, {{0.2}, {0.7}}});
  CHECK_FALSE(a.holds);
  CHECK(a.witnesses.size() == a.tested);
}

TEST_CASE("non-degeneracy") {
  const IncomeFertilitySurplus s;
  const auto zero = check_nondegeneracy(s, {{{0.0, 0.5}, 0.5}});
  CHECK(zero.min_norm == Approx(0.0).margin(1e-15));
  CHECK(zero.degenerate_points.size() == 1);
  const auto one = check_nondegeneracy(s, {{{1.0, 1.0}, 1.0}});
  CHECK(one.min_norm == Approx(std::sqrt(2.0) / 2));
  CHECK(one.degenerate_points.empty());
  const RcIndexSurplus rc(2);
  CHECK(check_nondegeneracy(rc, {{{0.3, 0.4}, 1.5}}).min_norm == Approx(0.5));
}

TEST_CASE("diagonal separable and sums") {
  const DiagonalSeparableSurplus d({"identity", "square"}, {"exp", "identity"});
  const Point x{0.5, 2.0}, y{1.0, 3.0};
  CHECK(d.value(x, y) == Approx(0.5 * std::exp(1.0) + 4.0 * 3.0));
  CHECK_THROWS_AS(DiagonalSeparableSurplus({"identity"}, {"nope"}), ConfigError);

  auto a = std::make_shared<RcIndexSurplus>(2);
  auto b = parse_surplus_expression("x1 + y", 2, 1);
  const SumSurplus s(a, b);
  CHECK(s.value(Point{1.0, 1.0}, 2.0) == Approx(2.0 + 3.0));
  CHECK(s.d_y(Point{1.0, 1.0}, 2.0) == Approx(1.0 + 1.0).margin(1e-7));
}

TEST_CASE("pseudo-index rejects unknown catalog names") {
  CHECK_THROWS_AS(PseudoIndexSurplus(2, "cubic", "linear", "product"), ConfigError);
  CHECK_THROWS_AS(PseudoIndexSurplus(2, "zero", "linear", "product", {1.0}), ConfigError);
}

TEST_CASE("hedonic quadratic has no scalar y derivatives") {
  const HedonicQuadraticSurplus h(2);
  CHECK(h.value(Point{1.0, 2.0}, Point{3.0, 4.0}) == Approx(0.5 * 3 + 0.5 * 16));
  CHECK_THROWS_AS(h.d_y(Point{1.0, 2.0}, 1.0), DomainError);
}
