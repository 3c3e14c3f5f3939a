#pragma once

// Surplus functions s(x, y) with x in R^m and y in R^n. Catalog entries
// carry analytic derivatives; expression surpluses fall back to central
// finite differences.

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "matchkit/expression.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

using Span = std::span<const double>;
using MutSpan = std::span<double>;

enum class Provenance : std::uint8_t { kAnalyticCatalog, kExpressionFd };

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdStep2 = 1e-4;

inline double fd_step(double c, double base = kFdStep) { return base * std::max(1.0, std::abs(c)); }

class Surplus {
 public:
  Surplus(std::size_t m, std::size_t n, std::string name, Provenance provenance)
      : m_(m), n_(n), name_(std::move(name)), provenance_(provenance) {}
  virtual ~Surplus() = default;

  std::size_t x_dim() const { return m_; }
  std::size_t y_dim() const { return n_; }
  const std::string& name() const { return name_; }
  Provenance provenance() const { return provenance_; }

  double value(Span x, Span y) const { return do_value(x, y); }
  double value(Span x, double y) const { return do_value(x, Span(&y, 1)); }

  /// D_x s
  void grad_x(Span x, Span y, MutSpan out) const { do_grad_x(x, y, out); }
  void grad_x(Span x, double y, MutSpan out) const { do_grad_x(x, Span(&y, 1), out); }
  Point grad_x(Span x, double y) const {
    Point g(m_);
    do_grad_x(x, Span(&y, 1), g);
    return g;
  }

  /// D_y s (vector y)
  void grad_y(Span x, Span y, MutSpan out) const { do_grad_y(x, y, out); }

  // Scalar-y derivatives (n == 1).
  double d_y(Span x, double y) const { return do_d_y(x, y); }
  double d_yy(Span x, double y) const { return do_d_yy(x, y); }
  void grad_x_dy(Span x, double y, MutSpan out) const { do_grad_x_dy(x, y, out); }
  Point grad_x_dy(Span x, double y) const {
    Point g(m_);
    do_grad_x_dy(x, y, g);
    return g;
  }

  /// D^2_{xy} s as an m x n matrix (row i = d/dx_i of D_y s).
  std::vector<Point> mixed_hessian(Span x, Span y) const {
    std::vector<Point> h(m_, Point(n_));
    if (n_ == 1) {
      Point g(m_);
      do_grad_x_dy(x, y[0], g);
      for (std::size_t i = 0; i < m_; ++i) h[i][0] = g[i];
      return h;
    }
    Point yy(y.begin(), y.end()), gp(m_), gm(m_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double step = fd_step(y[j], kFdStep2);
      yy[j] = y[j] + step;
      do_grad_x(x, yy, gp);
      yy[j] = y[j] - step;
      do_grad_x(x, yy, gm);
      yy[j] = y[j];
      for (std::size_t i = 0; i < m_; ++i) h[i][j] = (gp[i] - gm[i]) / (2 * step);
    }
    return h;
  }

  // Finite-difference reference derivatives, used by expression surpluses
  // and by consistency checks on catalog entries.
  void fd_grad_x(Span x, Span y, MutSpan out) const {
    Point xx(x.begin(), x.end());
    for (std::size_t i = 0; i < m_; ++i) {
      const double h = fd_step(x[i]);
      xx[i] = x[i] + h;
      const double fp = do_value(xx, y);
      xx[i] = x[i] - h;
      const double fm = do_value(xx, y);
      xx[i] = x[i];
      out[i] = (fp - fm) / (2 * h);
    }
  }
  void fd_grad_y(Span x, Span y, MutSpan out) const {
    Point yy(y.begin(), y.end());
    for (std::size_t j = 0; j < n_; ++j) {
      const double h = fd_step(y[j]);
      yy[j] = y[j] + h;
      const double fp = do_value(x, yy);
      yy[j] = y[j] - h;
      const double fm = do_value(x, yy);
      yy[j] = y[j];
      out[j] = (fp - fm) / (2 * h);
    }
  }
  double fd_d_y(Span x, double y) const {
    const double h = fd_step(y);
    const double yp = y + h, ym = y - h;
    return (do_value(x, Span(&yp, 1)) - do_value(x, Span(&ym, 1))) / (2 * h);
  }
  double fd_d_yy(Span x, double y) const {
    const double h = fd_step(y, kFdStep2);
    return (do_d_y(x, y + h) - do_d_y(x, y - h)) / (2 * h);
  }
  void fd_grad_x_dy(Span x, double y, MutSpan out) const {
    Point xx(x.begin(), x.end());
    for (std::size_t i = 0; i < m_; ++i) {
      const double h = fd_step(x[i], kFdStep2);
      xx[i] = x[i] + h;
      const double fp = do_d_y(xx, y);
      xx[i] = x[i] - h;
      const double fm = do_d_y(xx, y);
      xx[i] = x[i];
      out[i] = (fp - fm) / (2 * h);
    }
  }

 protected:
  virtual double do_value(Span x, Span y) const = 0;
  virtual void do_grad_x(Span x, Span y, MutSpan out) const { fd_grad_x(x, y, out); }
  virtual void do_grad_y(Span x, Span y, MutSpan out) const { fd_grad_y(x, y, out); }
  virtual double do_d_y(Span x, double y) const { return fd_d_y(x, y); }
  virtual double do_d_yy(Span x, double y) const { return fd_d_yy(x, y); }
  virtual void do_grad_x_dy(Span x, double y, MutSpan out) const { fd_grad_x_dy(x, y, out); }

 private:
  std::size_t m_, n_;
  std::string name_;
  Provenance provenance_;
};

using SurplusPtr = std::shared_ptr<const Surplus>;

// ---------------------------------------------------------------------------
// Catalog

/// s = p (x + y + B + 1/2)^2 / 4 + (1 - p)(x + y), x = (p, x).
class IncomeFertilitySurplus final : public Surplus {
 public:
  explicit IncomeFertilitySurplus(double b = 0.5)
      : Surplus(2, 1, "income_fertility", Provenance::kAnalyticCatalog), c_(b + 0.5) {}
  double b() const { return c_ - 0.5; }

 protected:
  double do_value(Span x, Span y) const override {
    const double t = x[1] + y[0];
    return x[0] * (t + c_) * (t + c_) / 4 + (1 - x[0]) * t;
  }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    const double t = x[1] + y[0];
    out[0] = (t + c_) * (t + c_) / 4 - t;
    out[1] = x[0] * (t + c_) / 2 + (1 - x[0]);
  }
  void do_grad_y(Span x, Span y, MutSpan out) const override { out[0] = do_d_y(x, y[0]); }
  double do_d_y(Span x, double y) const override {
    return 1 + x[0] * (x[1] + y + c_ - 2) / 2;
  }
  double do_d_yy(Span x, double) const override { return x[0] / 2; }
  void do_grad_x_dy(Span x, double y, MutSpan out) const override {
    out[0] = (x[1] + y + c_ - 2) / 2;
    out[1] = x[0] / 2;
  }

 private:
  double c_;
};

/// s = y |x|^2 / 2
class RcIndexSurplus final : public Surplus {
 public:
  explicit RcIndexSurplus(std::size_t m = 2) : Surplus(m, 1, "rc_index", Provenance::kAnalyticCatalog) {}

 protected:
  double do_value(Span x, Span y) const override { return 0.5 * y[0] * dot(x, x); }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = y[0] * x[i];
  }
  void do_grad_y(Span x, Span, MutSpan out) const override { out[0] = 0.5 * dot(x, x); }
  double do_d_y(Span x, double) const override { return 0.5 * dot(x, x); }
  double do_d_yy(Span, double) const override { return 0.0; }
  void do_grad_x_dy(Span x, double, MutSpan out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  }
};

/// s = sum_i x_i^2 y_i / 2, y in R^m.
class HedonicQuadraticSurplus final : public Surplus {
 public:
  explicit HedonicQuadraticSurplus(std::size_t m = 2)
      : Surplus(m, m, "hedonic_quadratic", Provenance::kAnalyticCatalog) {}

 protected:
  double do_value(Span x, Span y) const override {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * x[i] * x[i] * y[i];
    return s;
  }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  }
  void do_grad_y(Span x, Span, MutSpan out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 0.5 * x[i] * x[i];
  }
  double do_d_y(Span, double) const override {
    throw DomainError("hedonic_quadratic has vector y; scalar derivatives undefined");
  }
  double do_d_yy(Span, double) const override {
    throw DomainError("hedonic_quadratic has vector y; scalar derivatives undefined");
  }
  void do_grad_x_dy(Span, double, MutSpan) const override {
    throw DomainError("hedonic_quadratic has vector y; scalar derivatives undefined");
  }
};

/// Scalar functions with first and second derivatives, used as building
/// blocks of separable and pseudo-index surpluses.
struct Univariate {
  std::string name;
  double (*f)(double);
  double (*df)(double);
  double (*d2f)(double);
};

inline const std::vector<Univariate>& univariate_catalog() {
  static const std::vector<Univariate> cat = {
      {"identity", [](double t) { return t; }, [](double) { return 1.0; }, [](double) { return 0.0; }},
      {"square", [](double t) { return t * t; }, [](double t) { return 2 * t; }, [](double) { return 2.0; }},
      {"half_square", [](double t) { return 0.5 * t * t; }, [](double t) { return t; },
       [](double) { return 1.0; }},
      {"cube", [](double t) { return t * t * t; }, [](double t) { return 3 * t * t; },
       [](double t) { return 6 * t; }},
      {"exp", [](double t) { return std::exp(t); }, [](double t) { return std::exp(t); },
       [](double t) { return std::exp(t); }},
      {"log1p", [](double t) { return std::log1p(t); }, [](double t) { return 1 / (1 + t); },
       [](double t) { return -1 / ((1 + t) * (1 + t)); }},
      {"sqrt1p", [](double t) { return std::sqrt(1 + t); }, [](double t) { return 0.5 / std::sqrt(1 + t); },
       [](double t) { return -0.25 / std::pow(1 + t, 1.5); }},
  };
  return cat;
}

inline const Univariate& univariate(const std::string& name) {
  for (const Univariate& u : univariate_catalog())
    if (u.name == name) return u;
  throw ConfigError("unknown function '" + name + "' in surplus catalog");
}

/// s = sum_k f_k(x_k) g_k(y_k), m = n.
class DiagonalSeparableSurplus final : public Surplus {
 public:
  DiagonalSeparableSurplus(std::vector<std::string> f, std::vector<std::string> g)
      : Surplus(f.size(), g.size(), "diagonal_separable", Provenance::kAnalyticCatalog) {
    if (f.empty() || f.size() != g.size())
      throw ConfigError("diagonal_separable: f and g lists must be non-empty and of equal length");
    for (const auto& n : f) f_.push_back(univariate(n));
    for (const auto& n : g) g_.push_back(univariate(n));
  }

 protected:
  double do_value(Span x, Span y) const override {
    double s = 0;
    for (std::size_t k = 0; k < f_.size(); ++k) s += f_[k].f(x[k]) * g_[k].f(y[k]);
    return s;
  }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    for (std::size_t k = 0; k < f_.size(); ++k) out[k] = f_[k].df(x[k]) * g_[k].f(y[k]);
  }
  void do_grad_y(Span x, Span y, MutSpan out) const override {
    for (std::size_t k = 0; k < f_.size(); ++k) out[k] = f_[k].f(x[k]) * g_[k].df(y[k]);
  }
  double do_d_y(Span x, double y) const override {
    require_scalar();
    return f_[0].f(x[0]) * g_[0].df(y);
  }
  double do_d_yy(Span x, double y) const override {
    require_scalar();
    return f_[0].f(x[0]) * g_[0].d2f(y);
  }
  void do_grad_x_dy(Span x, double y, MutSpan out) const override {
    require_scalar();
    out[0] = f_[0].df(x[0]) * g_[0].df(y);
  }

 private:
  void require_scalar() const {
    if (f_.size() != 1) throw DomainError("diagonal_separable: scalar derivatives need m = n = 1");
  }
  std::vector<Univariate> f_, g_;
};

/// s = alpha(x) + sigma(I(x), y), scalar y. alpha and I are chosen from a
/// small catalog of functions of x; sigma(i, y) is from a catalog with
/// sigma_iy != 0.
class PseudoIndexSurplus final : public Surplus {
 public:
  PseudoIndexSurplus(std::size_t m, std::string alpha, std::string index, std::string sigma,
                     Point weights = {})
      : Surplus(m, 1, "pseudo_index", Provenance::kAnalyticCatalog),
        alpha_(std::move(alpha)),
        index_(std::move(index)),
        sigma_(std::move(sigma)),
        w_(std::move(weights)) {
    if (w_.empty()) w_.assign(m, 1.0);
    if (w_.size() != m) throw ConfigError("pseudo_index: weights must have one entry per x axis");
    if (alpha_ != "zero" && alpha_ != "linear" && alpha_ != "half_square")
      throw ConfigError("pseudo_index: unknown alpha '" + alpha_ + "'");
    if (index_ != "linear" && index_ != "half_square" && index_ != "log_linear")
      throw ConfigError("pseudo_index: unknown index '" + index_ + "'");
    if (sigma_ != "product" && sigma_ != "exp_product" && sigma_ != "half_square_sum")
      throw ConfigError("pseudo_index: unknown sigma '" + sigma_ + "'");
  }

  const std::string& alpha() const { return alpha_; }
  const std::string& index() const { return index_; }
  const std::string& sigma() const { return sigma_; }
  const Point& weights() const { return w_; }

  double index_value(Span x) const {
    if (index_ == "linear") return dot(w_, x);
    if (index_ == "half_square") {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * w_[i] * x[i] * x[i];
      return s;
    }
    return std::log1p(dot(w_, x));
  }

 protected:
  double do_value(Span x, Span y) const override { return alpha_value(x) + sig(index_value(x), y[0]); }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    const double i = index_value(x);
    const double si = sig_i(i, y[0]);
    index_grad(x, out);
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = out[k] * si + alpha_grad(x, k);
  }
  void do_grad_y(Span x, Span y, MutSpan out) const override { out[0] = do_d_y(x, y[0]); }
  double do_d_y(Span x, double y) const override { return sig_y(index_value(x), y); }
  double do_d_yy(Span x, double y) const override { return sig_yy(index_value(x), y); }
  void do_grad_x_dy(Span x, double y, MutSpan out) const override {
    const double siy = sig_iy(index_value(x), y);
    index_grad(x, out);
    for (double& o : out) o *= siy;
  }

 private:
  double alpha_value(Span x) const {
    if (alpha_ == "zero") return 0;
    if (alpha_ == "linear") {
      double s = 0;
      for (double c : x) s += c;
      return s;
    }
    return 0.5 * dot(x, x);
  }
  double alpha_grad(Span x, std::size_t k) const {
    if (alpha_ == "zero") return 0;
    if (alpha_ == "linear") return 1;
    return x[k];
  }
  void index_grad(Span x, MutSpan out) const {
    if (index_ == "linear") {
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = w_[k];
    } else if (index_ == "half_square") {
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = w_[k] * x[k];
    } else {
      const double d = 1 + dot(w_, x);
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = w_[k] / d;
    }
  }
  double sig(double i, double y) const {
    if (sigma_ == "product") return i * y;
    if (sigma_ == "exp_product") return std::exp(i * y);
    return 0.5 * (i + y) * (i + y);
  }
  double sig_i(double i, double y) const {
    if (sigma_ == "product") return y;
    if (sigma_ == "exp_product") return y * std::exp(i * y);
    return i + y;
  }
  double sig_y(double i, double y) const {
    if (sigma_ == "product") return i;
    if (sigma_ == "exp_product") return i * std::exp(i * y);
    return i + y;
  }
  double sig_yy(double i, double y) const {
    if (sigma_ == "product") return 0;
    if (sigma_ == "exp_product") return i * i * std::exp(i * y);
    return 1;
  }
  double sig_iy(double i, double y) const {
    if (sigma_ == "product") return 1;
    if (sigma_ == "exp_product") return (1 + i * y) * std::exp(i * y);
    return 1;
  }

  std::string alpha_, index_, sigma_;
  Point w_;
};

/// Surplus parsed from an arithmetic expression over x1..xm and y (or
/// y1..yn). All derivatives are central finite differences.
class ExpressionSurplus final : public Surplus {
 public:
  ExpressionSurplus(Expression expr, std::size_t m, std::size_t n)
      : Surplus(m, n, "expression", Provenance::kExpressionFd), expr_(std::move(expr)) {}

  const Expression& expression() const { return expr_; }

 protected:
  double do_value(Span x, Span y) const override {
    std::array<double, 16> buf{};
    const std::size_t m = x_dim(), n = y_dim();
    if (m + n > buf.size()) {
      Point v(x.begin(), x.end());
      v.insert(v.end(), y.begin(), y.end());
      return expr_.eval(v);
    }
    std::copy(x.begin(), x.end(), buf.begin());
    std::copy(y.begin(), y.end(), buf.begin() + static_cast<std::ptrdiff_t>(m));
    return expr_.eval(Span(buf.data(), m + n));
  }

 private:
  Expression expr_;
};

/// s = a + b; derivatives add.
class SumSurplus final : public Surplus {
 public:
  SumSurplus(SurplusPtr a, SurplusPtr b)
      : Surplus(a->x_dim(), a->y_dim(), a->name() + "+" + b->name(),
                a->provenance() == Provenance::kAnalyticCatalog && b->provenance() == Provenance::kAnalyticCatalog
                    ? Provenance::kAnalyticCatalog
                    : Provenance::kExpressionFd),
        a_(std::move(a)),
        b_(std::move(b)) {
    if (a_->x_dim() != b_->x_dim() || a_->y_dim() != b_->y_dim())
      throw ConfigError("sum of surpluses with different dimensions");
  }

 protected:
  double do_value(Span x, Span y) const override { return a_->value(x, y) + b_->value(x, y); }
  void do_grad_x(Span x, Span y, MutSpan out) const override {
    Point t(out.size());
    a_->grad_x(x, y, out);
    b_->grad_x(x, y, t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
  }
  void do_grad_y(Span x, Span y, MutSpan out) const override {
    Point t(out.size());
    a_->grad_y(x, y, out);
    b_->grad_y(x, y, t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
  }
  double do_d_y(Span x, double y) const override { return a_->d_y(x, y) + b_->d_y(x, y); }
  double do_d_yy(Span x, double y) const override { return a_->d_yy(x, y) + b_->d_yy(x, y); }
  void do_grad_x_dy(Span x, double y, MutSpan out) const override {
    Point t(out.size());
    a_->grad_x_dy(x, y, out);
    b_->grad_x_dy(x, y, t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
  }

 private:
  SurplusPtr a_, b_;
};

/// Parses a surplus expression over x1..xm and y (n == 1) or y1..yn.
/// `aliases` maps extra names onto variables, e.g. {"p": "x1"}.
inline SurplusPtr parse_surplus_expression(const std::string& text, std::size_t m, std::size_t n = 1,
                                           const std::map<std::string, std::string>& aliases = {}) {
  if (m == 0 || n == 0) throw ConfigError("expression surplus needs m >= 1 and n >= 1");
  std::map<std::string, int> vars;
  for (std::size_t i = 0; i < m; ++i) vars["x" + std::to_string(i + 1)] = static_cast<int>(i);
  if (n == 1) {
    vars["y"] = static_cast<int>(m);
    vars["y1"] = static_cast<int>(m);
  } else {
    for (std::size_t j = 0; j < n; ++j) vars["y" + std::to_string(j + 1)] = static_cast<int>(m + j);
  }
  std::map<std::string, int> all = vars;
  for (const auto& [alias, target] : aliases) {
    auto it = vars.find(target);
    if (it == vars.end()) throw ConfigError("alias '" + alias + "' targets unknown variable '" + target + "'");
    all[alias] = it->second;
  }
  return std::make_shared<ExpressionSurplus>(Expression::parse(text, all), m, n);
}

// ---------------------------------------------------------------------------
// Structural probes

inline double cross_difference(const Surplus& s, Span x, Span y, Span x0, Span y0) {
  return s.value(x, y) + s.value(x0, y0) - s.value(x, y0) - s.value(x0, y);
}

inline double cross_difference(const Surplus& s, Span x, double y, Span x0, double y0) {
  return s.value(x, y) + s.value(x0, y0) - s.value(x, y0) - s.value(x0, y);
}

inline constexpr double kTwistTol = 1e-8;
inline constexpr double kDegeneracyTol = 1e-8;

struct TwistWitness {
  Point x, y, y0;
  double diff_norm;
};

struct TwistReport {
  bool holds = true;
  double min_diff_norm = std::numeric_limits<double>::infinity();
  std::size_t tested = 0;
  std::vector<TwistWitness> witnesses;
};

/// Tests D_x s(x,y) != D_x s(x,y0) for every sampled x and pair y != y0.
inline TwistReport check_twist(const Surplus& s, const std::vector<Point>& x_samples,
                               const std::vector<std::pair<Point, Point>>& y_pairs,
                               double twist_tol = kTwistTol, std::size_t max_witnesses = 100) {
  TwistReport r;
  Point g1(s.x_dim()), g0(s.x_dim());
  for (const Point& x : x_samples) {
    for (const auto& [y, y0] : y_pairs) {
      if (y == y0) continue;
      s.grad_x(x, y, g1);
      s.grad_x(x, y0, g0);
      double d = 0;
      for (std::size_t i = 0; i < g1.size(); ++i) d += (g1[i] - g0[i]) * (g1[i] - g0[i]);
      d = std::sqrt(d);
      ++r.tested;
      r.min_diff_norm = std::min(r.min_diff_norm, d);
      if (d <= twist_tol) {
        r.holds = false;
        if (r.witnesses.size() < max_witnesses) r.witnesses.push_back({x, y, y0, d});
      }
    }
  }
  return r;
}

struct DegeneracyReport {
  double min_norm = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Point, double>> degenerate_points;  // (x, y) flattened as x then y
};

/// min over samples of |D_x s_y(x, y)| (scalar y).
inline DegeneracyReport check_nondegeneracy(const Surplus& s,
                                            const std::vector<std::pair<Point, double>>& samples,
                                            double degeneracy_tol = kDegeneracyTol) {
  DegeneracyReport r;
  Point g(s.x_dim());
  for (const auto& [x, y] : samples) {
    s.grad_x_dy(x, y, g);
    const double n = norm(g);
    r.min_norm = std::min(r.min_norm, n);
    if (n <= degeneracy_tol) r.degenerate_points.push_back({x, y});
  }
  return r;
}

struct DerivativeConsistency {
  double max_rel_grad_x = 0, max_rel_d_y = 0, max_rel_d_yy = 0, max_rel_grad_x_dy = 0;
  double max_mixed_vs_grad_x_dy = 0;
};

/// Compares the (possibly analytic) derivatives of s with central finite
/// differences at the given scalar-y samples. Relative errors use a
/// max(1, |reference|) denominator.
inline DerivativeConsistency derivative_consistency(const Surplus& s,
                                                    const std::vector<std::pair<Point, double>>& samples) {
  DerivativeConsistency r;
  const std::size_t m = s.x_dim();
  Point a(m), b(m);
  auto rel = [](double got, double ref) { return std::abs(got - ref) / std::max(1.0, std::abs(ref)); };
  for (const auto& [x, y] : samples) {
    s.grad_x(x, y, a);
    s.fd_grad_x(x, Span(&y, 1), b);
    for (std::size_t i = 0; i < m; ++i) r.max_rel_grad_x = std::max(r.max_rel_grad_x, rel(a[i], b[i]));
    r.max_rel_d_y = std::max(r.max_rel_d_y, rel(s.d_y(x, y), s.fd_d_y(x, y)));
    r.max_rel_d_yy = std::max(r.max_rel_d_yy, rel(s.d_yy(x, y), s.fd_d_yy(x, y)));
    s.grad_x_dy(x, y, a);
    s.fd_grad_x_dy(x, y, b);
    for (std::size_t i = 0; i < m; ++i) r.max_rel_grad_x_dy = std::max(r.max_rel_grad_x_dy, rel(a[i], b[i]));
    const auto h = s.mixed_hessian(x, Span(&y, 1));
    for (std::size_t i = 0; i < m; ++i)
      r.max_mixed_vs_grad_x_dy = std::max(r.max_mixed_vs_grad_x_dy, std::abs(h[i][0] - a[i]));
  }
  return r;
}

}  // namespace matchkit
