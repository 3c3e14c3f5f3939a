#pragma once

// Type spaces and population measures: bounded domains in R^m, absolutely
// continuous measures on them with tensor-grid quadrature, and atomless
// measures on an interval of the real line.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "matchkit/expression.hpp"
#include "matchkit/util.hpp"

namespace matchkit {

struct Box {
  Point lo;
  Point hi;

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
  double volume() const {
    double v = 1;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }
};

/// Per-axis restriction of a disk sector relative to its center.
enum class Orthant : std::uint8_t { kAny, kNonNeg, kNonPos };

struct DiskSector {
  Point center;
  double radius = 1.0;
  std::vector<Orthant> orthants;  // one entry per axis

  bool contains(std::span<const double> x) const {
    double r2 = 0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double d = x[i] - center[i];
      if (orthants[i] == Orthant::kNonNeg && d < 0) return false;
      if (orthants[i] == Orthant::kNonPos && d > 0) return false;
      r2 += d * d;
    }
    return r2 <= radius * radius;
  }
};

struct BoxUnion {
  std::vector<Box> boxes;
};

/// A bounded region of R^m: box, disk sector or union of boxes.
class Domain {
 public:
  using Kind = std::variant<Box, DiskSector, BoxUnion>;

  static Domain box(Point lo, Point hi) {
    if (lo.size() != hi.size() || lo.empty())
      throw ConfigError("box: lo and hi must have equal positive dimension");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw ConfigError("box: lo must be < hi componentwise");
    return Domain(Box{std::move(lo), std::move(hi)});
  }

  static Domain disk_sector(Point center, double radius, std::vector<Orthant> orthants = {}) {
    if (center.empty()) throw ConfigError("disk_sector: empty center");
    if (!(radius > 0)) throw ConfigError("disk_sector: radius must be > 0");
    if (orthants.empty()) orthants.assign(center.size(), Orthant::kAny);
    if (orthants.size() != center.size())
      throw ConfigError("disk_sector: one orthant flag per axis required");
    return Domain(DiskSector{std::move(center), radius, std::move(orthants)});
  }

  static Domain box_union(std::vector<Box> boxes) {
    if (boxes.empty()) throw ConfigError("box_union: no boxes");
    const std::size_t m = boxes.front().lo.size();
    for (const Box& b : boxes) {
      if (b.lo.size() != m || b.hi.size() != m)
        throw ConfigError("box_union: members must have equal dimension");
      for (std::size_t i = 0; i < m; ++i)
        if (!(b.lo[i] < b.hi[i])) throw ConfigError("box_union: lo must be < hi");
    }
    for (std::size_t a = 0; a < boxes.size(); ++a)
      for (std::size_t b = a + 1; b < boxes.size(); ++b) {
        bool overlap = true;
        for (std::size_t i = 0; i < m; ++i)
          if (std::min(boxes[a].hi[i], boxes[b].hi[i]) <= std::max(boxes[a].lo[i], boxes[b].lo[i]))
            overlap = false;
        if (overlap) throw ConfigError("box_union: member interiors overlap");
      }
    return Domain(BoxUnion{std::move(boxes)});
  }

  std::size_t dim() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Box>) return k.lo.size();
          else if constexpr (std::is_same_v<T, DiskSector>) return k.center.size();
          else return k.boxes.front().lo.size();
        },
        kind_);
  }

  bool contains(std::span<const double> x) const {
    return std::visit(
        [&](const auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, BoxUnion>) {
            for (const Box& b : k.boxes)
              if (b.contains(x)) return true;
            return false;
          } else {
            return k.contains(x);
          }
        },
        kind_);
  }

  Box bounding_box() const {
    return std::visit(
        [](const auto& k) -> Box {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Box>) {
            return k;
          } else if constexpr (std::is_same_v<T, DiskSector>) {
            Box b{k.center, k.center};
            for (std::size_t i = 0; i < k.center.size(); ++i) {
              b.lo[i] = k.orthants[i] == Orthant::kNonNeg ? k.center[i] : k.center[i] - k.radius;
              b.hi[i] = k.orthants[i] == Orthant::kNonPos ? k.center[i] : k.center[i] + k.radius;
            }
            return b;
          } else {
            Box b = k.boxes.front();
            for (const Box& m : k.boxes)
              for (std::size_t i = 0; i < b.lo.size(); ++i) {
                b.lo[i] = std::min(b.lo[i], m.lo[i]);
                b.hi[i] = std::max(b.hi[i], m.hi[i]);
              }
            return b;
          }
        },
        kind_);
  }

  /// Exact Lebesgue measure of the region.
  double volume() const {
    return std::visit(
        [](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Box>) {
            return k.volume();
          } else if constexpr (std::is_same_v<T, DiskSector>) {
            const std::size_t m = k.center.size();
            // Unit ball volume pi^{m/2} / Gamma(m/2 + 1).
            double v = std::pow(std::numbers::pi, 0.5 * static_cast<double>(m)) /
                       std::tgamma(0.5 * static_cast<double>(m) + 1.0) *
                       std::pow(k.radius, static_cast<double>(m));
            for (Orthant o : k.orthants)
              if (o != Orthant::kAny) v *= 0.5;
            return v;
          } else {
            double v = 0;
            for (const Box& b : k.boxes) v += b.volume();
            return v;
          }
        },
        kind_);
  }

  /// Outward unit normals of boundary pieces passing within `tol` of x.
  /// Near corners several normals are returned; together they span the
  /// cone of generalized normals.
  std::vector<Point> boundary_normals(std::span<const double> x, double tol) const {
    std::vector<Point> out;
    const std::size_t m = dim();
    auto box_faces = [&](const Box& b, bool require_outer) {
      for (std::size_t i = 0; i < m; ++i) {
        for (int side = 0; side < 2; ++side) {
          const double face = side == 0 ? b.lo[i] : b.hi[i];
          if (std::abs(x[i] - face) > tol) continue;
          bool on_face = true;
          for (std::size_t j = 0; j < m && on_face; ++j)
            if (j != i && (x[j] < b.lo[j] - tol || x[j] > b.hi[j] + tol)) on_face = false;
          if (!on_face) continue;
          Point n(m, 0.0);
          n[i] = side == 0 ? -1.0 : 1.0;
          if (require_outer) {
            // Skip faces shared with another member of a union.
            Point probe(x.begin(), x.end());
            probe[i] += n[i] * 4 * tol;
            if (contains(probe)) continue;
          }
          out.push_back(std::move(n));
        }
      }
    };
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Box>) {
            box_faces(k, false);
          } else if constexpr (std::is_same_v<T, BoxUnion>) {
            for (const Box& b : k.boxes) box_faces(b, true);
          } else {
            double r = 0;
            for (std::size_t i = 0; i < m; ++i) r += (x[i] - k.center[i]) * (x[i] - k.center[i]);
            r = std::sqrt(r);
            if (std::abs(r - k.radius) <= tol && r > 0) {
              Point n(m);
              for (std::size_t i = 0; i < m; ++i) n[i] = (x[i] - k.center[i]) / r;
              out.push_back(std::move(n));
            }
            for (std::size_t i = 0; i < m; ++i) {
              if (k.orthants[i] == Orthant::kAny) continue;
              if (std::abs(x[i] - k.center[i]) > tol) continue;
              Point n(m, 0.0);
              n[i] = k.orthants[i] == Orthant::kNonNeg ? -1.0 : 1.0;
              out.push_back(std::move(n));
            }
          }
        },
        kind_);
    return out;
  }

  const Kind& kind() const { return kind_; }

 private:
  explicit Domain(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

/// Tensor-grid quadrature over a domain's bounding box. Cells are
/// classified once: exterior cells are dropped, cells whose corners are all
/// inside carry one midpoint weight, and cells cut by the domain boundary
/// keep their inside sub-sample points (sub^m per cell) individually.
class QuadratureGrid {
 public:
  static constexpr int kSub = 4;
  static constexpr std::size_t kMinCellsPerAxis = 8;

  QuadratureGrid() = default;

  QuadratureGrid(const Domain& domain, const std::function<double(std::span<const double>)>& density,
                 std::size_t cells_per_axis)
      : m_(domain.dim()), n_(cells_per_axis) {
    if (n_ < kMinCellsPerAxis)
      throw ConfigError("quadrature resolution " + std::to_string(n_) +
                        " below minimum of " + std::to_string(kMinCellsPerAxis) + " cells per axis");
    if (m_ > 3) throw ConfigError("quadrature supports dimension 1..3");
    const Box bb = domain.bounding_box();
    lo_ = bb.lo;
    width_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) width_[i] = (bb.hi[i] - bb.lo[i]) / static_cast<double>(n_);
    cell_volume_ = 1;
    for (double w : width_) cell_volume_ *= w;
    nsub_ = 1;
    for (std::size_t i = 0; i < m_; ++i) nsub_ *= kSub;
    nvert_axis_ = n_ + 1;
    std::size_t ncells = 1, nverts = 1;
    for (std::size_t i = 0; i < m_; ++i) {
      ncells *= n_;
      nverts *= nvert_axis_;
    }
    ncells_ = ncells;
    nverts_ = nverts;

    std::vector<char> vin(nverts);
    Point x(m_);
    for (std::size_t v = 0; v < nverts; ++v) {
      vertex_point(v, x);
      vin[v] = domain.contains(x) ? 1 : 0;
    }
    kind_.assign(ncells, kExterior);
    weight_.assign(ncells, 0.0);
    partial_begin_.assign(ncells, 0);
    for (std::size_t c = 0; c < ncells; ++c) {
      bool all_in = true;
      for (std::size_t k = 0; k < corner_count(); ++k)
        if (!vin[corner_vertex(c, k)]) all_in = false;
      if (all_in) {
        cell_center(c, x);
        kind_[c] = kInterior;
        weight_[c] = density(x) * cell_volume_;
        interior_cells_.push_back(static_cast<std::uint32_t>(c));
        continue;
      }
      const std::size_t begin = sub_index_.size();
      for (std::size_t s = 0; s < nsub_; ++s) {
        subsample_point(c, s, x);
        if (!domain.contains(x)) continue;
        sub_index_.push_back(static_cast<std::uint8_t>(s));
        sub_weight_.push_back(density(x) * cell_volume_ / static_cast<double>(nsub_));
      }
      if (sub_index_.size() > begin) {
        kind_[c] = kPartial;
        partial_begin_[c] = static_cast<std::uint32_t>(begin);
        partial_cells_.push_back(static_cast<std::uint32_t>(c));
        partial_end_.push_back(static_cast<std::uint32_t>(sub_index_.size()));
      }
    }
    raw_total_ = 0;
    for (std::uint32_t c : interior_cells_) raw_total_ += weight_[c];
    for (double w : sub_weight_) raw_total_ += w;
    if (!(raw_total_ > 0)) throw ConfigError("density integrates to zero on the domain");
    for (double& w : weight_) w /= raw_total_;
    for (double& w : sub_weight_) w /= raw_total_;
  }

  static constexpr std::uint8_t kExterior = 0, kInterior = 1, kPartial = 2;

  std::size_t dim() const { return m_; }
  std::size_t cells_per_axis() const { return n_; }
  std::size_t cell_count() const { return ncells_; }
  std::size_t vertex_count() const { return nverts_; }
  std::size_t corner_count() const { return std::size_t{1} << m_; }
  std::size_t subsample_count() const { return nsub_; }
  double raw_total() const { return raw_total_; }
  const Point& lo() const { return lo_; }
  const Point& width() const { return width_; }

  const std::vector<std::uint32_t>& interior_cells() const { return interior_cells_; }
  const std::vector<std::uint32_t>& partial_cells() const { return partial_cells_; }
  std::uint8_t cell_kind(std::size_t c) const { return kind_[c]; }
  /// Normalized weight of an interior cell.
  double cell_weight(std::size_t c) const { return weight_[c]; }

  /// Inside sub-samples of the i-th partial cell: [begin, end) into
  /// sub_index()/sub_weight().
  std::pair<std::size_t, std::size_t> partial_range(std::size_t i) const {
    return {partial_begin_[partial_cells_[i]], partial_end_[i]};
  }
  const std::vector<std::uint8_t>& sub_index() const { return sub_index_; }
  const std::vector<double>& sub_weight() const { return sub_weight_; }

  void vertex_point(std::size_t v, std::span<double> x) const {
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t idx = v % nvert_axis_;
      v /= nvert_axis_;
      x[i] = lo_[i] + width_[i] * static_cast<double>(idx);
    }
  }

  void cell_center(std::size_t c, std::span<double> x) const {
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t idx = c % n_;
      c /= n_;
      x[i] = lo_[i] + width_[i] * (static_cast<double>(idx) + 0.5);
    }
  }

  void subsample_point(std::size_t c, std::size_t s, std::span<double> x) const {
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t idx = c % n_;
      c /= n_;
      const std::size_t sidx = s % kSub;
      s /= kSub;
      x[i] = lo_[i] + width_[i] * (static_cast<double>(idx) +
                                   (static_cast<double>(sidx) + 0.5) / kSub);
    }
  }

  std::size_t corner_vertex(std::size_t c, std::size_t corner) const {
    std::size_t v = 0, stride = 1;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t idx = c % n_ + ((corner >> i) & 1u);
      c /= n_;
      v += idx * stride;
      stride *= nvert_axis_;
    }
    return v;
  }

 private:
  std::size_t m_ = 0, n_ = 0, nsub_ = 1, nvert_axis_ = 0, ncells_ = 0, nverts_ = 0;
  Point lo_, width_;
  double cell_volume_ = 0, raw_total_ = 0;
  std::vector<std::uint8_t> kind_;
  std::vector<double> weight_;
  std::vector<std::uint32_t> partial_begin_, partial_end_;
  std::vector<std::uint32_t> interior_cells_, partial_cells_;
  std::vector<std::uint8_t> sub_index_;
  std::vector<double> sub_weight_;
};

using DensityFn = std::function<double(std::span<const double>)>;

inline std::size_t default_resolution(std::size_t m) {
  switch (m) {
    case 1: return 4096;
    case 2: return 512;
    default: return 64;
  }
}

/// Absolutely continuous probability measure on a Domain. The density is
/// normalized numerically with the same quadrature used for mass queries,
/// so the full mass is exactly one.
class DensityMeasure {
 public:
  DensityMeasure(Domain domain, DensityFn density, std::size_t resolution = 0,
                 std::string description = "uniform")
      : domain_(std::make_shared<Domain>(std::move(domain))),
        description_(std::move(description)) {
    if (resolution == 0) resolution = default_resolution(domain_->dim());
    raw_density_ = std::make_shared<DensityFn>(std::move(density));
    grid_ = std::make_shared<QuadratureGrid>(*domain_, *raw_density_, resolution);
  }

  static DensityMeasure uniform(Domain domain, std::size_t resolution = 0) {
    const double vol = domain.volume();
    return DensityMeasure(std::move(domain), [vol](std::span<const double>) { return 1.0 / vol; },
                          resolution, "uniform");
  }

  /// Density given as an expression over x1..xm (negative values clip to 0).
  static DensityMeasure from_expression(Domain domain, const std::string& text,
                                        std::size_t resolution = 0) {
    std::map<std::string, int> vars;
    for (std::size_t i = 0; i < domain.dim(); ++i) vars["x" + std::to_string(i + 1)] = static_cast<int>(i);
    auto expr = std::make_shared<Expression>(Expression::parse(text, vars));
    return DensityMeasure(
        std::move(domain), [expr](std::span<const double> x) { return std::max(0.0, expr->eval(x)); },
        resolution, text);
  }

  const Domain& domain() const { return *domain_; }
  const QuadratureGrid& grid() const { return *grid_; }
  std::size_t dim() const { return domain_->dim(); }
  const std::string& description() const { return description_; }

  /// Normalized density at x (zero outside the domain).
  double density(std::span<const double> x) const {
    if (!domain_->contains(x)) return 0.0;
    return (*raw_density_)(x) / grid_->raw_total();
  }

  /// Integral of the raw (unnormalized) density; equals 1 within quadrature
  /// error for densities that were already normalized.
  double normalization() const { return grid_->raw_total(); }

 private:
  std::shared_ptr<Domain> domain_;
  std::shared_ptr<DensityFn> raw_density_;
  std::shared_ptr<QuadratureGrid> grid_;
  std::string description_;
};

/// mu[{x : indicator(x)}] by tensor-grid quadrature. Interior cells whose
/// corners agree take the whole cell; cells with disagreeing corners are
/// refined on the sub-sample lattice; domain-boundary cells always use
/// their inside sub-samples.
inline double mass_of_region(const DensityMeasure& mu,
                             const std::function<bool(std::span<const double>)>& indicator) {
  const QuadratureGrid& g = mu.grid();
  const std::size_t m = g.dim();
  std::vector<char> vin(g.vertex_count());
  parallel_for(g.vertex_count(), [&](std::size_t v) {
    Point x(m);
    g.vertex_point(v, x);
    vin[v] = indicator(x) ? 1 : 0;
  });
  const auto& cells = g.interior_cells();
  std::vector<double> part(cells.size(), 0.0);
  parallel_for(cells.size(), [&](std::size_t i) {
    const std::size_t c = cells[i];
    const char first = vin[g.corner_vertex(c, 0)];
    bool agree = true;
    for (std::size_t k = 1; k < g.corner_count() && agree; ++k)
      if (vin[g.corner_vertex(c, k)] != first) agree = false;
    if (agree) {
      part[i] = first ? g.cell_weight(c) : 0.0;
      return;
    }
    Point x(m);
    std::size_t count = 0;
    for (std::size_t s = 0; s < g.subsample_count(); ++s) {
      g.subsample_point(c, s, x);
      if (indicator(x)) ++count;
    }
    part[i] = g.cell_weight(c) * static_cast<double>(count) / static_cast<double>(g.subsample_count());
  });
  double total = 0;
  for (double p : part) total += p;
  Point x(m);
  for (std::size_t i = 0; i < g.partial_cells().size(); ++i) {
    const auto [b, e] = g.partial_range(i);
    for (std::size_t j = b; j < e; ++j) {
      g.subsample_point(g.partial_cells()[i], g.sub_index()[j], x);
      if (indicator(x)) total += g.sub_weight()[j];
    }
  }
  return total;
}

/// Sublevel-set masses mu[{x : f(x) <= k}] for one scalar field f and many
/// thresholds k. Field values at grid vertices and boundary sub-samples are
/// computed once; interior sub-samples are computed lazily for cells that
/// the level set crosses. Bisection-style callers can narrow the active
/// band of cells with restrict() so each query touches only cells whose
/// value range straddles the current bracket.
class SublevelMass {
 public:
  SublevelMass(const QuadratureGrid& grid, std::function<double(std::span<const double>)> field)
      : g_(&grid), field_(std::move(field)) {
    const std::size_t m = g_->dim();
    vertex_values_.resize(g_->vertex_count());
    {
      Point x(m);
      for (std::size_t v = 0; v < g_->vertex_count(); ++v) {
        g_->vertex_point(v, x);
        vertex_values_[v] = field_(x);
      }
    }
    build_items();
  }

  /// Constructs from precomputed vertex values (e.g. a matching map F).
  SublevelMass(const QuadratureGrid& grid, std::vector<double> vertex_values,
               std::function<double(std::span<const double>)> field)
      : g_(&grid), field_(std::move(field)), vertex_values_(std::move(vertex_values)) {
    build_items();
  }

  double min_value() const { return min_; }
  double max_value() const { return max_; }
  const std::vector<double>& vertex_values() const { return vertex_values_; }

  /// Resets the active band to every item.
  void reset() {
    active_ = all_;
    base_ = 0;
    band_lo_ = -std::numeric_limits<double>::infinity();
    band_hi_ = std::numeric_limits<double>::infinity();
  }

  /// Narrows the active band to thresholds in [a, b]. Subsequent mass()
  /// calls must use k in [a, b].
  void restrict(double a, double b) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const std::uint32_t it = active_[i];
      if (items_[it].hi <= a) {
        base_ += items_[it].weight;
      } else if (items_[it].lo > b) {
        // empty for every k in the band
      } else {
        active_[out++] = it;
      }
    }
    active_.resize(out);
    band_lo_ = a;
    band_hi_ = b;
  }

  std::size_t active_size() const { return active_.size(); }

  double mass(double k) {
    double total = base_;
    for (std::uint32_t it : active_) {
      const Item& item = items_[it];
      if (item.hi <= k) {
        total += item.weight;
      } else if (item.lo > k) {
        continue;
      } else {
        const double* vals = refined(item.cell);
        std::size_t count = 0;
        for (std::size_t s = 0; s < g_->subsample_count(); ++s)
          if (vals[s] <= k) ++count;
        total += item.weight * static_cast<double>(count) / static_cast<double>(g_->subsample_count());
      }
    }
    return total;
  }

 private:
  struct Item {
    double lo, hi, weight;
    std::int64_t cell;  // -1 for single boundary sub-sample points
  };

  void build_items() {
    const std::size_t m = g_->dim();
    items_.clear();
    items_.reserve(g_->interior_cells().size() + g_->sub_weight().size());
    min_ = std::numeric_limits<double>::infinity();
    max_ = -min_;
    for (std::uint32_t c : g_->interior_cells()) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t k = 0; k < g_->corner_count(); ++k) {
        const double v = vertex_values_[g_->corner_vertex(c, k)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      items_.push_back({lo, hi, g_->cell_weight(c), static_cast<std::int64_t>(c)});
      min_ = std::min(min_, lo);
      max_ = std::max(max_, hi);
    }
    Point x(m);
    for (std::size_t i = 0; i < g_->partial_cells().size(); ++i) {
      const auto [b, e] = g_->partial_range(i);
      for (std::size_t j = b; j < e; ++j) {
        g_->subsample_point(g_->partial_cells()[i], g_->sub_index()[j], x);
        const double v = field_(x);
        items_.push_back({v, v, g_->sub_weight()[j], -1});
        min_ = std::min(min_, v);
        max_ = std::max(max_, v);
      }
    }
    all_.resize(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) all_[i] = static_cast<std::uint32_t>(i);
    reset();
  }

  const double* refined(std::int64_t cell) {
    auto [it, inserted] = cache_index_.try_emplace(cell, cache_.size());
    if (inserted) {
      const std::size_t ns = g_->subsample_count();
      cache_.resize(cache_.size() + ns);
      Point x(g_->dim());
      for (std::size_t s = 0; s < ns; ++s) {
        g_->subsample_point(static_cast<std::size_t>(cell), s, x);
        cache_[it->second + s] = field_(x);
      }
    }
    return cache_.data() + it->second;
  }

  const QuadratureGrid* g_;
  std::function<double(std::span<const double>)> field_;
  std::vector<double> vertex_values_;
  std::vector<Item> items_;
  std::vector<std::uint32_t> all_, active_;
  double base_ = 0, band_lo_ = 0, band_hi_ = 0;
  double min_ = 0, max_ = 0;
  std::unordered_map<std::int64_t, std::size_t> cache_index_;
  std::vector<double> cache_;
};

/// Atomless probability measure on [lo, hi] with density, CDF and
/// quantile. Non-uniform densities are tabulated on a fine grid and the
/// CDF is integrated by the trapezoid rule.
class Measure1D {
 public:
  static constexpr std::size_t kTableSize = 8193;

  static Measure1D uniform(double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("Measure1D: support must satisfy lo < hi");
    Measure1D m;
    m.lo_ = lo;
    m.hi_ = hi;
    m.uniform_ = true;
    m.description_ = "uniform";
    return m;
  }

  static Measure1D from_density(double lo, double hi, const std::function<double(double)>& density,
                                std::string description = "density") {
    if (!(lo < hi)) throw ConfigError("Measure1D: support must satisfy lo < hi");
    std::vector<double> ys = linspace(lo, hi, kTableSize);
    std::vector<double> cdf(kTableSize, 0.0);
    for (std::size_t i = 1; i < kTableSize; ++i) {
      const double a = std::max(0.0, density(ys[i - 1]));
      const double b = std::max(0.0, density(ys[i]));
      cdf[i] = cdf[i - 1] + 0.5 * (a + b) * (ys[i] - ys[i - 1]);
    }
    if (!(cdf.back() > 0)) throw ConfigError("Measure1D: density integrates to zero");
    return from_cdf_table(std::move(ys), std::move(cdf), std::move(description));
  }

  static Measure1D from_expression(double lo, double hi, const std::string& text) {
    auto expr = std::make_shared<Expression>(Expression::parse(text, {{"y", 0}}));
    return from_density(lo, hi, [expr](double y) { return expr->eval(std::span<const double>(&y, 1)); },
                        text);
  }

  /// Piecewise-linear CDF through (ys[i], cdf[i]); cdf is rescaled to end at 1.
  static Measure1D from_cdf_table(std::vector<double> ys, std::vector<double> cdf,
                                  std::string description = "tabulated") {
    if (ys.size() < 2 || ys.size() != cdf.size()) throw ConfigError("Measure1D: bad CDF table");
    const double c0 = cdf.front(), total = cdf.back() - c0;
    if (!(total > 0)) throw ConfigError("Measure1D: CDF table has no mass");
    for (double& c : cdf) c = (c - c0) / total;
    for (std::size_t i = 1; i < cdf.size(); ++i) {
      if (cdf[i] < cdf[i - 1]) throw ConfigError("Measure1D: CDF table not monotone");
      if (!(ys[i] > ys[i - 1])) throw ConfigError("Measure1D: CDF abscissae not increasing");
    }
    Measure1D m;
    m.lo_ = ys.front();
    m.hi_ = ys.back();
    m.uniform_ = false;
    m.ys_ = std::make_shared<const std::vector<double>>(std::move(ys));
    m.cdf_ = std::make_shared<const std::vector<double>>(std::move(cdf));
    m.description_ = std::move(description);
    return m;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::string& description() const { return description_; }

  /// nu((-inf, y)); equals nu((-inf, y]) since there are no atoms.
  double cdf(double y) const {
    if (y <= lo_) return 0.0;
    if (y >= hi_) return 1.0;
    if (uniform_) return (y - lo_) / (hi_ - lo_);
    const auto& ys = *ys_;
    const auto& c = *cdf_;
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
    const std::size_t i = j - 1;
    const double t = (y - ys[i]) / (ys[j] - ys[i]);
    return c[i] + t * (c[j] - c[i]);
  }

  double density(double y) const {
    if (y < lo_ || y > hi_) return 0.0;
    if (uniform_) return 1.0 / (hi_ - lo_);
    const auto& ys = *ys_;
    const auto& c = *cdf_;
    std::size_t j = static_cast<std::size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
    j = std::clamp<std::size_t>(j, 1, ys.size() - 1);
    return (c[j] - c[j - 1]) / (ys[j] - ys[j - 1]);
  }

  /// Smallest y with cdf(y) >= t.
  double quantile(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    if (uniform_) return lo_ + t * (hi_ - lo_);
    const auto& ys = *ys_;
    const auto& c = *cdf_;
    const std::size_t j = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), t) - c.begin());
    if (j == 0) return ys.front();
    if (j >= c.size()) return ys.back();
    const double dc = c[j] - c[j - 1];
    if (dc <= 0) return ys[j];
    return ys[j - 1] + (t - c[j - 1]) / dc * (ys[j] - ys[j - 1]);
  }

  /// Restriction to [a, b], renormalized.
  Measure1D restricted(double a, double b) const {
    a = std::max(a, lo_);
    b = std::min(b, hi_);
    if (!(a < b)) throw ConfigError("Measure1D: empty restriction");
    if (uniform_) return uniform(a, b);
    std::vector<double> ys = linspace(a, b, kTableSize);
    std::vector<double> c(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) c[i] = cdf(ys[i]);
    return from_cdf_table(std::move(ys), std::move(c), description_ + " (restricted)");
  }

 private:
  double lo_ = 0, hi_ = 1;
  bool uniform_ = true;
  std::shared_ptr<const std::vector<double>> ys_, cdf_;
  std::string description_;
};

/// nu((-inf, y)), clamped outside the support.
inline double nu_cdf(const Measure1D& nu, double y) { return nu.cdf(y); }

/// Restriction of mu to a sub-box, renormalized (same resolution).
inline DensityMeasure restrict_to_box(const DensityMeasure& mu, const Box& box) {
  const Domain& d = mu.domain();
  auto inside = std::make_shared<Domain>(d);
  auto src = std::make_shared<DensityMeasure>(mu);
  return DensityMeasure(
      Domain::box(box.lo, box.hi),
      [inside, src](std::span<const double> x) { return inside->contains(x) ? src->density(x) : 0.0; },
      mu.grid().cells_per_axis(), mu.description() + " (restricted)");
}

}  // namespace matchkit
