#pragma once

// Run configuration, orchestration and artifact emission behind the
// matchkit command-line tool. Configs are JSON; unknown keys are errors.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 oracle mismatch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "matchkit/applications.hpp"
#include "matchkit/geometry.hpp"
#include "matchkit/hedonic.hpp"
#include "matchkit/levelset.hpp"
#include "matchkit/ot_oracle.hpp"
#include "matchkit/surplus.hpp"

namespace matchkit::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "matchkit 0.1.0";

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kSolver = 3, kOracleMismatch = 4 };

class OracleMismatch : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing and emission

inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// 12 significant digits, '.' decimal point regardless of locale.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// RFC 4180 table: header then rows, CRLF line ends.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }

  void row(const std::vector<double>& values) {
    if (values.size() != cols_) throw Error("csv row width mismatch");
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(fmt(v));
    line(cells);
  }
  const std::string& str() const { return out_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\r\n") == std::string::npos) {
        out_ += c;
      } else {
        out_ += '"';
        for (char ch : c) out_ += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        out_ += '"';
      }
    }
    out_ += "\r\n";
  }
  std::size_t cols_;
  std::string out_;
};

/// Writes files into one directory and records their hashes for the
/// manifest.
class Artifacts {
 public:
  Artifacts(std::filesystem::path dir, std::set<std::string> formats) : dir_(std::move(dir)), formats_(std::move(formats)) {
    std::filesystem::create_directories(dir_);
  }

  bool wants(const std::string& format) const { return formats_.count(format) > 0; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir_ / name).string());
    f << content;
    files_[name] = {content.size(), hex64(fnv1a(content))};
  }
  void csv(const std::string& name, const Csv& c) {
    if (wants("csv")) write(name, c.str());
  }
  void json_file(const std::string& name, const json& j) {
    if (wants("json")) write(name, j.dump(2) + "\n");
  }

  void manifest(json meta) {
    json files = json::array();
    for (const auto& [name, info] : files_) files.push_back({{"name", name}, {"bytes", info.first}, {"fnv1a64", info.second}});
    meta["files"] = files;
    meta["version"] = kVersion;
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << meta.dump(2) << "\n";
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::set<std::string> formats_;
  std::map<std::string, std::pair<std::size_t, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Schema helpers

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(path + ": unknown key '" + key + "'");
  }
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + ": missing key '" + key + "'");
  return j.at(key);
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline double num_or(const json& j, const char* key, double dflt, const std::string& path) {
  return j.contains(key) ? num(j.at(key), path + "." + key) : dflt;
}

inline std::size_t count_or(const json& j, const char* key, std::size_t dflt, const std::string& path) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline Point point(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of numbers");
  Point p;
  for (std::size_t i = 0; i < j.size(); ++i) p.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return p;
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0)) throw ConfigError(path + ": must be positive");
  return v;
}

// ---------------------------------------------------------------------------
// Problem construction

inline Box parse_box(const json& j, const std::string& path) {
  check_keys(j, {"lo", "hi"}, path);
  Box b{point(require(j, "lo", path), path + ".lo"), point(require(j, "hi", path), path + ".hi")};
  if (b.lo.size() != b.hi.size()) throw ConfigError(path + ": lo and hi differ in dimension");
  for (std::size_t i = 0; i < b.lo.size(); ++i)
    if (!(b.lo[i] < b.hi[i])) throw ConfigError(path + ": needs lo < hi in every coordinate");
  return b;
}

inline Domain parse_domain(const json& j, const std::string& path) {
  const std::string type = str(require(j, "type", path), path + ".type");
  if (type == "box") {
    check_keys(j, {"type", "lo", "hi"}, path);
    const Box b = parse_box(json{{"lo", require(j, "lo", path)}, {"hi", require(j, "hi", path)}}, path);
    return Domain::box(b.lo, b.hi);
  }
  if (type == "disk_sector") {
    check_keys(j, {"type", "center", "radius", "orthants"}, path);
    const Point c = point(require(j, "center", path), path + ".center");
    const double r = positive(num(require(j, "radius", path), path + ".radius"), path + ".radius");
    std::vector<Orthant> o;
    if (j.contains("orthants")) {
      for (const json& e : j.at("orthants")) {
        const std::string s = str(e, path + ".orthants");
        if (s == "any") o.push_back(Orthant::kAny);
        else if (s == "nonneg") o.push_back(Orthant::kNonNeg);
        else if (s == "nonpos") o.push_back(Orthant::kNonPos);
        else throw ConfigError(path + ".orthants: unknown orthant '" + s + "'");
      }
    }
    return Domain::disk_sector(c, r, o);
  }
  if (type == "box_union") {
    check_keys(j, {"type", "boxes"}, path);
    const json& bs = require(j, "boxes", path);
    if (!bs.is_array() || bs.empty()) throw ConfigError(path + ".boxes: expected a non-empty array");
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < bs.size(); ++i) boxes.push_back(parse_box(bs[i], path + ".boxes[" + std::to_string(i) + "]"));
    return Domain::box_union(boxes);
  }
  throw ConfigError(path + ".type: unknown domain type '" + type + "'");
}

inline Measure1D parse_nu(const json& j, const std::string& path) {
  const std::string type = str(require(j, "type", path), path + ".type");
  if (type == "uniform") {
    check_keys(j, {"type", "lo", "hi"}, path);
    return Measure1D::uniform(num(require(j, "lo", path), path + ".lo"), num(require(j, "hi", path), path + ".hi"));
  }
  if (type == "density") {
    check_keys(j, {"type", "lo", "hi", "expression"}, path);
    return Measure1D::from_expression(num(require(j, "lo", path), path + ".lo"),
                                      num(require(j, "hi", path), path + ".hi"),
                                      str(require(j, "expression", path), path + ".expression"));
  }
  if (type == "near_dirac") {
    check_keys(j, {"type", "y0", "eps"}, path);
    return near_dirac(num(require(j, "y0", path), path + ".y0"),
                      positive(num_or(j, "eps", 1e-3, path), path + ".eps"));
  }
  throw ConfigError(path + ".type: unknown measure type '" + type + "'");
}

inline std::vector<std::string> names(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of names");
  std::vector<std::string> out;
  for (const json& e : j) out.push_back(str(e, path));
  return out;
}

inline SurplusPtr parse_surplus(const json& j, const std::string& path) {
  const std::string type = str(require(j, "type", path), path + ".type");
  if (type == "income_fertility") {
    check_keys(j, {"type", "B"}, path);
    return std::make_shared<IncomeFertilitySurplus>(num_or(j, "B", 0.5, path));
  }
  if (type == "rc_index") {
    check_keys(j, {"type", "m"}, path);
    return std::make_shared<RcIndexSurplus>(count_or(j, "m", 2, path));
  }
  if (type == "hedonic_quadratic") {
    check_keys(j, {"type", "m"}, path);
    return std::make_shared<HedonicQuadraticSurplus>(count_or(j, "m", 2, path));
  }
  if (type == "diagonal_separable") {
    check_keys(j, {"type", "f", "g"}, path);
    return std::make_shared<DiagonalSeparableSurplus>(names(require(j, "f", path), path + ".f"),
                                                      names(require(j, "g", path), path + ".g"));
  }
  if (type == "pseudo_index") {
    check_keys(j, {"type", "m", "alpha", "index", "sigma", "weights"}, path);
    Point w;
    if (j.contains("weights")) w = point(j.at("weights"), path + ".weights");
    return std::make_shared<PseudoIndexSurplus>(count_or(j, "m", 2, path), str(require(j, "alpha", path), path + ".alpha"),
                                                str(require(j, "index", path), path + ".index"),
                                                str(require(j, "sigma", path), path + ".sigma"), w);
  }
  if (type == "user_expression") {
    check_keys(j, {"type", "expression", "m", "n", "aliases"}, path);
    std::map<std::string, std::string> aliases;
    if (j.contains("aliases")) {
      const json& a = j.at("aliases");
      if (!a.is_object()) throw ConfigError(path + ".aliases: expected an object of name -> variable");
      for (const auto& [k, v] : a.items()) aliases[k] = str(v, path + ".aliases." + k);
    }
    return parse_surplus_expression(str(require(j, "expression", path), path + ".expression"),
                                    count_or(j, "m", 2, path), count_or(j, "n", 1, path), aliases);
  }
  throw ConfigError(path + ".type: unknown surplus type '" + type + "'");
}

inline HedonicSurplusPtr parse_hedonic(const json& j, const std::string& path, const Box& xb, const std::optional<Box>& yb) {
  if (j.contains("catalog")) {
    check_keys(j, {"catalog", "m"}, path);
    const std::string cat = str(j.at("catalog"), path + ".catalog");
    const std::size_t m = count_or(j, "m", 2, path);
    if (cat == "rc") return reduce_to_matching(rc_problem(m));
    if (cat == "hedonic_quadratic") return reduce_to_matching(hedonic_quadratic_problem(m));
    throw ConfigError(path + ".catalog: unknown hedonic catalog '" + cat + "'");
  }
  check_keys(j, {"U", "c", "m", "n", "product_dim", "z_box"}, path);
  HedonicProblem p;
  p.name = "custom";
  p.m = count_or(j, "m", 2, path);
  p.n = count_or(j, "n", 1, path);
  p.product_dim = count_or(j, "product_dim", p.m, path);
  p.z_solver = ZSolver::kNumericAscent;
  std::map<std::string, int> uv, cv;
  for (std::size_t i = 0; i < p.m; ++i) uv["x" + std::to_string(i + 1)] = static_cast<int>(i);
  for (std::size_t i = 0; i < p.product_dim; ++i) {
    uv["z" + std::to_string(i + 1)] = static_cast<int>(p.m + i);
    cv["z" + std::to_string(i + 1)] = static_cast<int>(p.n + i);
  }
  if (p.n == 1) cv["y"] = 0;
  for (std::size_t j2 = 0; j2 < p.n; ++j2) cv["y" + std::to_string(j2 + 1)] = static_cast<int>(j2);
  auto U = std::make_shared<Expression>(Expression::parse(str(require(j, "U", path), path + ".U"), uv));
  auto c = std::make_shared<Expression>(Expression::parse(str(require(j, "c", path), path + ".c"), cv));
  p.U = [U](Span x, Span z) {
    Point v(x.begin(), x.end());
    v.insert(v.end(), z.begin(), z.end());
    return U->eval(v);
  };
  p.c = [c](Span y, Span z) {
    Point v(y.begin(), y.end());
    v.insert(v.end(), z.begin(), z.end());
    return c->eval(v);
  };
  if (j.contains("z_box")) p.z_box = parse_box(j.at("z_box"), path + ".z_box");
  else if (yb) p.z_box = default_z_box(p, xb, *yb);
  else throw ConfigError(path + ": z_box required when Y has no bounding box");
  if (p.z_box.lo.size() != p.product_dim) throw ConfigError(path + ".z_box: dimension differs from product_dim");
  return reduce_to_matching(std::move(p));
}

struct OracleConfig {
  bool enabled = false;
  std::size_t N = 1000;
  std::uint64_t seed = 7;
};

struct RunConfig {
  std::string preset;  // empty for explicit problems
  double epsilon = 0.01;
  disks::Params disks;
  std::uint64_t instance_seed = 1;

  SurplusPtr surplus;
  HedonicSurplusPtr hedonic;
  std::optional<Domain> x_domain;
  std::string density;  // expression over x1..xm, empty for uniform
  std::size_t x_grid = 0;
  std::optional<Measure1D> nu;

  SolverConfig solver;
  double lattice_spacing = 0.05;
  OracleConfig oracle;
  std::string out_dir = "matchkit_out";
  std::set<std::string> formats{"csv", "json"};
  std::string source_text;  // hashed into the manifest

  std::shared_ptr<const DensityMeasure> mu() const {
    if (!x_domain) throw ConfigError("problem has no x domain");
    if (preset == "pseudo_index") return pseudo_index::random_instance(instance_seed, x_grid ? x_grid : 256).mu;
    if (density.empty()) return std::make_shared<const DensityMeasure>(DensityMeasure::uniform(*x_domain, x_grid));
    return std::make_shared<const DensityMeasure>(DensityMeasure::from_expression(*x_domain, density, x_grid));
  }
  bool is_lattice() const { return preset == "disks"; }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> n{"example1", "example2", "example3", "rc", "disks", "pseudo_index"};
  return n;
}

/// Fills surplus, domain and measures for a named preset.
inline void apply_preset(RunConfig& rc_) {
  const std::string& p = rc_.preset;
  if (p == "example1") {
    rc_.surplus = example1::surplus();
    rc_.x_domain = example1::domain();
    rc_.nu = example1::nu();
  } else if (p == "example2") {
    rc_.surplus = example2::surplus();
    rc_.x_domain = example2::domain();
    rc_.nu = example2::nu();
    if (rc_.solver.decomposition.empty()) rc_.solver.decomposition = example2::decomposition();
  } else if (p == "example3") {
    rc_.surplus = example1::surplus();
    rc_.x_domain = example3::domain(rc_.epsilon);
    rc_.nu = example1::nu();
  } else if (p == "rc") {
    rc_.hedonic = reduce_to_matching(rc_problem(2));
    rc_.surplus = rc_.hedonic;
    rc_.x_domain = rc::domain();
    rc_.nu = rc::nu();
  } else if (p == "disks") {
    rc_.hedonic = reduce_to_matching(hedonic_quadratic_problem(rc_.disks.a.size()));
    rc_.surplus = rc_.hedonic;
    rc_.x_domain = disks::x_domain(rc_.disks);
  } else if (p == "pseudo_index") {
    auto inst = pseudo_index::random_instance(rc_.instance_seed);
    rc_.surplus = inst.s;
    rc_.x_domain = inst.mu->domain();
    rc_.nu = inst.nu;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += " " + n;
    throw ConfigError("unknown preset '" + p + "' (known:" + known + ")");
  }
}

inline void parse_solver(const json& j, RunConfig& rc_) {
  const std::string path = "solver";
  check_keys(j, {"y_grid", "x_grid", "split_tol", "plateau_tol", "max_iter", "v0", "mass_tol", "root_tol",
                 "inclusion_tol", "angle_tol", "stab_tol", "diag_grid", "diagnostics", "decomposition",
                 "lattice_spacing"},
             path);
  SolverConfig& c = rc_.solver;
  c.y_grid = count_or(j, "y_grid", c.y_grid, path);
  rc_.x_grid = count_or(j, "x_grid", rc_.x_grid, path);
  c.split_tol = num_or(j, "split_tol", c.split_tol, path);
  c.plateau_tol = num_or(j, "plateau_tol", c.plateau_tol, path);
  c.max_iter = static_cast<int>(count_or(j, "max_iter", static_cast<std::size_t>(c.max_iter), path));
  c.v0 = num_or(j, "v0", c.v0, path);
  c.mass_tol = num_or(j, "mass_tol", c.mass_tol, path);
  c.root_tol = num_or(j, "root_tol", c.root_tol, path);
  c.inclusion_tol = num_or(j, "inclusion_tol", c.inclusion_tol, path);
  c.angle_tol = num_or(j, "angle_tol", c.angle_tol, path);
  c.stab_tol = num_or(j, "stab_tol", c.stab_tol, path);
  c.diag_grid = count_or(j, "diag_grid", c.diag_grid, path);
  if (j.contains("diagnostics")) {
    if (!j.at("diagnostics").is_boolean()) throw ConfigError("solver.diagnostics: expected a boolean");
    c.diagnostics = j.at("diagnostics").get<bool>();
  }
  rc_.lattice_spacing = positive(num_or(j, "lattice_spacing", rc_.lattice_spacing, path), path + ".lattice_spacing");
  if (j.contains("decomposition")) {
    const json& d = j.at("decomposition");
    if (!d.is_array()) throw ConfigError("solver.decomposition: expected an array");
    c.decomposition.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::string bp = "solver.decomposition[" + std::to_string(i) + "]";
      check_keys(d[i], {"x_lo", "x_hi", "y_lo", "y_hi"}, bp);
      const Box b = parse_box(json{{"lo", require(d[i], "x_lo", bp)}, {"hi", require(d[i], "x_hi", bp)}}, bp);
      c.decomposition.push_back({b, num(require(d[i], "y_lo", bp), bp + ".y_lo"), num(require(d[i], "y_hi", bp), bp + ".y_hi")});
    }
  }
  c.validate();
}

/// Parses a config document. Errors carry a dotted path to the offending
/// key; JSON syntax errors carry line and column.
inline RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  RunConfig rc_;
  rc_.source_text = text;
  check_keys(j, {"problem", "solver", "oracle", "outputs"}, "config");
  if (j.contains("solver")) parse_solver(j.at("solver"), rc_);
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    check_keys(o, {"enabled", "N", "seed"}, "oracle");
    if (o.contains("enabled")) {
      if (!o.at("enabled").is_boolean()) throw ConfigError("oracle.enabled: expected a boolean");
      rc_.oracle.enabled = o.at("enabled").get<bool>();
    }
    rc_.oracle.N = count_or(o, "N", rc_.oracle.N, "oracle");
    rc_.oracle.seed = count_or(o, "seed", rc_.oracle.seed, "oracle");
  }
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    check_keys(o, {"directory", "formats"}, "outputs");
    if (o.contains("directory")) rc_.out_dir = str(o.at("directory"), "outputs.directory");
    if (o.contains("formats")) {
      rc_.formats.clear();
      for (const std::string& f : names(o.at("formats"), "outputs.formats")) {
        if (f != "csv" && f != "json") throw ConfigError("outputs.formats: unknown format '" + f + "'");
        rc_.formats.insert(f);
      }
    }
  }

  const json& p = require(j, "problem", "config");
  check_keys(p, {"preset", "epsilon", "a", "b", "K", "instance_seed", "surplus", "mu", "nu", "hedonic"}, "problem");
  if (p.contains("preset")) {
    for (const char* k : {"surplus", "mu", "nu", "hedonic"})
      if (p.contains(k)) throw ConfigError(std::string("problem: '") + k + "' cannot be combined with a preset");
    rc_.preset = str(p.at("preset"), "problem.preset");
    rc_.epsilon = num_or(p, "epsilon", rc_.epsilon, "problem");
    if (p.contains("a")) rc_.disks.a = point(p.at("a"), "problem.a");
    if (p.contains("b")) rc_.disks.b = point(p.at("b"), "problem.b");
    rc_.disks.K = num_or(p, "K", rc_.disks.K, "problem");
    rc_.instance_seed = count_or(p, "instance_seed", rc_.instance_seed, "problem");
    apply_preset(rc_);
    return rc_;
  }
  for (const char* k : {"epsilon", "a", "b", "K", "instance_seed"})
    if (p.contains(k)) throw ConfigError(std::string("problem.") + k + ": only valid with a preset");
  const json& mu = require(p, "mu", "problem");
  check_keys(mu, {"domain", "density", "resolution"}, "problem.mu");
  rc_.x_domain = parse_domain(require(mu, "domain", "problem.mu"), "problem.mu.domain");
  if (mu.contains("density")) {
    rc_.density = str(mu.at("density"), "problem.mu.density");
    DensityMeasure::from_expression(*rc_.x_domain, rc_.density, 8);  // surfaces parse errors early
  }
  if (mu.contains("resolution") && rc_.x_grid == 0) rc_.x_grid = count_or(mu, "resolution", 0, "problem.mu");
  if (p.contains("nu")) rc_.nu = parse_nu(p.at("nu"), "problem.nu");
  if (p.contains("hedonic") == p.contains("surplus"))
    throw ConfigError("problem: give exactly one of 'surplus' or 'hedonic'");
  if (p.contains("hedonic")) {
    std::optional<Box> yb;
    if (rc_.nu) yb = Box{{rc_.nu->lo()}, {rc_.nu->hi()}};
    rc_.hedonic = parse_hedonic(p.at("hedonic"), "problem.hedonic", rc_.x_domain->bounding_box(), yb);
    rc_.surplus = rc_.hedonic;
  } else {
    rc_.surplus = parse_surplus(p.at("surplus"), "problem.surplus");
  }
  if (rc_.surplus->x_dim() != rc_.x_domain->dim())
    throw ConfigError("problem: surplus x dimension " + std::to_string(rc_.surplus->x_dim()) +
                      " differs from domain dimension " + std::to_string(rc_.x_domain->dim()));
  if (!rc_.nu) throw ConfigError("problem: missing key 'nu'");
  if (rc_.surplus->y_dim() != 1) throw ConfigError("problem: explicit problems need scalar y (n = 1)");
  return rc_;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline RunConfig preset_config(const std::string& name) {
  return parse_config(json{{"problem", {{"preset", name}}}}.dump());
}

// ---------------------------------------------------------------------------
// Runs

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid, atoms;
};

inline void apply(RunConfig& c, const Overrides& o) {
  if (o.out) c.out_dir = *o.out;
  if (o.seed) c.oracle.seed = *o.seed;
  if (o.atoms) c.oracle.N = *o.atoms;
  if (o.grid) {
    if (c.is_lattice()) c.lattice_spacing = 2.0 / static_cast<double>(*o.grid);
    else c.x_grid = *o.grid;
  }
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json point_json(const Point& p) { return json(std::vector<double>(p.begin(), p.end())); }

inline json nestedness_json(const NestednessReport& r, std::size_t max_witnesses = 20) {
  json inc = json::array(), split = json::array();
  for (std::size_t i = 0; i < std::min(max_witnesses, r.monotone_inclusion_violations.size()); ++i) {
    const auto& w = r.monotone_inclusion_violations[i];
    inc.push_back({{"x", point_json(w.x)}, {"y", w.y}, {"y_later", w.y2}});
  }
  for (std::size_t i = 0; i < std::min(max_witnesses, r.unique_splitting_failures.size()); ++i) {
    const auto& w = r.unique_splitting_failures[i];
    split.push_back({{"x", point_json(w.x)}, {"roots", w.roots}});
  }
  return {{"verdict", to_string(r.verdict)},
          {"inclusion_violation_count", r.inclusion_violation_count},
          {"monotone_inclusion_violations", inc},
          {"splitting_failure_count", r.splitting_failure_count},
          {"unique_splitting_failures", split},
          {"dynamic_criterion_min", finite_or_null(r.dynamic_criterion_min)},
          {"dynamic_endpoint_min", finite_or_null(r.dynamic_endpoint_min)},
          {"transversality_flags", r.transversality_flags},
          {"x_samples", r.x_samples},
          {"iso_points", r.iso_points}};
}

inline Csv split_csv(const SplitFunction& sp) {
  Csv c({"y", "k", "k_minus", "k_plus", "v", "h_residual"});
  for (std::size_t i = 0; i < sp.size(); ++i) c.row({sp.y[i], sp.k[i], sp.k_minus[i], sp.k_plus[i], sp.v[i], sp.h_residual[i]});
  return c;
}

inline Csv k_csv(const MatchingSolution& sol) {
  Csv c({"y", "k", "v"});
  for (const auto& r : sol.grid_rows()) c.row({r.y, r.k, r.v});
  return c;
}

/// Points of an n-per-axis grid inside the domain.
inline std::vector<Point> map_points(const Domain& d, std::size_t n) {
  const SampleGrid g = SampleGrid::over(d, n);
  std::vector<Point> out;
  for (std::size_t p = 0; p < g.points.size(); ++p)
    if (g.inside[p]) out.push_back(g.points[p]);
  return out;
}

inline Csv map_csv(const MatchingSolution& sol, const std::vector<Point>& xs) {
  std::vector<std::string> head;
  for (std::size_t i = 0; i < sol.mu().domain().dim(); ++i) head.push_back("x" + std::to_string(i + 1));
  for (const char* h : {"F", "u", "unique", "multi_valued"}) head.push_back(h);
  std::vector<std::vector<double>> rows(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    const MatchResult r = sol.match(xs[i]);
    std::vector<double> row(xs[i].begin(), xs[i].end());
    row.push_back(r.y);
    row.push_back(sol.surplus().value(xs[i], r.y) - sol.v(r.y));
    row.push_back(r.unique ? 1 : 0);
    row.push_back(r.multi_valued ? 1 : 0);
    rows[i] = std::move(row);
  });
  Csv c(head);
  for (const auto& r : rows) c.row(r);
  return c;
}

inline Csv coupling_csv(const DiscreteProblem& p, const DiscreteCoupling& c) {
  std::vector<std::string> head{"i", "j"};
  for (std::size_t q = 0; q < p.x_atoms[0].size(); ++q) head.push_back("x" + std::to_string(q + 1));
  if (p.y_atoms[0].size() == 1) head.push_back("y");
  else
    for (std::size_t q = 0; q < p.y_atoms[0].size(); ++q) head.push_back("y" + std::to_string(q + 1));
  head.push_back("s_ij");
  Csv out(head);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t j = c.partner[i];
    std::vector<double> row{static_cast<double>(i), static_cast<double>(j)};
    row.insert(row.end(), p.x_atoms[i].begin(), p.x_atoms[i].end());
    row.insert(row.end(), p.y_atoms[j].begin(), p.y_atoms[j].end());
    row.push_back(p.at(i, j));
    out.row(row);
  }
  return out;
}

inline json certificate_json(const DiscreteProblem& p, const DiscreteCoupling& c) {
  const MonotonicityReport mono = check_s_monotonicity(p, c);
  const PurityReport pur = purity_report(p, c);
  return {{"N", c.size()},
          {"total_surplus", c.total_surplus},
          {"dual_objective", c.dual_objective()},
          {"duality_gap", c.duality_gap},
          {"max_dual_violation", c.max_dual_violation},
          {"min_delta", mono.min_delta},
          {"max_partners_per_x", pur.max_partners_per_x},
          {"split_x_atoms", pur.split_x_atoms},
          {"distinct_partner_values", pur.distinct_partner_values},
          {"tied_optimum", pur.tied_optimum}};
}

/// Certificate failures: gap above lp_tol relative, or negative
/// cross-differences on the support.
inline std::string certificate_problem(const json& cert) {
  const double total = cert["total_surplus"].get<double>();
  if (cert["duality_gap"].get<double>() > kLpTol * std::max(1.0, std::abs(total))) return "duality gap above tolerance";
  if (cert["min_delta"].get<double>() < -kLpTol * std::max(1.0, std::abs(total))) return "support is not s-monotone";
  return "";
}

struct RunContext {
  RunConfig cfg;
  std::string command;
  std::ostream& log;
  json verdicts = json::object();
  int exit_code = kOk;
};

inline void finish(RunContext& ctx, Artifacts& art) {
  json meta{{"command", ctx.command},
            {"preset", ctx.cfg.preset},
            {"inputs_fnv1a64", hex64(fnv1a(ctx.cfg.source_text))},
            {"seeds", {{"oracle", ctx.cfg.oracle.seed}, {"instance", ctx.cfg.instance_seed}}},
            {"verdicts", ctx.verdicts},
            {"exit_code", ctx.exit_code}};
  art.manifest(meta);
}

// Reference comparisons for presets with closed forms.

inline json reference_example1(const MatchingSolution& sol, const std::vector<Point>& xs) {
  double k_err = 0;
  const SplitFunction& sp = sol.split();
  for (std::size_t i = 0; i < sp.size(); ++i)
    if (sp.y[i] >= 0.55 && sp.y[i] <= 0.95) k_err = std::max(k_err, std::abs(2 * (sp.k[i] - 1) - example1::K(sp.y[i])));
  const double yb = example1::y_break();
  double F_err = 0;
  for (const Point& x : xs) F_err = std::max(F_err, std::abs(sol.F(x) - example1::F(x[0], x[1])));
  return {{"K_max_abs_error_055_095", k_err},
          {"K_at_y_break", 2 * (sol.k(yb) - 1)},
          {"K_at_y_break_reference", 1 / (2 * (std::numbers::e - 1))},
          {"F_max_abs_error", F_err}};
}

inline json reference_example2(const MatchingSolution& sol, const std::vector<Point>& xs) {
  double G_err = 0;
  for (const Point& x : xs)
    if (std::abs(x[1] - 0.5) > 0.01) G_err = std::max(G_err, std::abs(sol.F(x) - example2::G(x[0], x[1])));
  const Point mid{1.0, 0.5};
  const MatchResult r = sol.match(mid);
  const auto lim = example2::limits(1.0);
  return {{"G_max_abs_error_off_band", G_err},
          {"two_limit_report", r.roots},
          {"two_limit_reference", {lim.upper, lim.lower}},
          {"decomposed", sol.decomposed()},
          {"undecomposed_verdict", to_string(sol.nested().verdict)}};
}

inline json reference_example3(const MatchingSolution& sol, double eps) {
  json shares = json::object();
  for (double y : {0.55, 0.6, 0.95, 0.975}) {
    const auto b = example3::iso_blocks(sol, y, eps);
    shares[fmt(y)] = {{"in_high_fertility_block", b.in_high}, {"in_other_block", b.in_low}};
  }
  return {{"epsilon", eps},
          {"outside_hypotheses", eps == 0.0},
          {"iso_set_blocks", shares},
          {"push_forward_max_error", push_forward_check(sol).max_abs_error}};
}

inline json reference_rc(const MatchingSolution& sol, const HedonicSurplus& hs, const std::vector<Point>& xs) {
  double F_err = 0, u_err = 0, uvs = 0;
  for (const Point& x : xs) {
    const double F = sol.F(x);
    F_err = std::max(F_err, std::abs(F - rc::F(x)));
    u_err = std::max(u_err, std::abs(sol.u(x) - rc::u(x)));
    uvs = std::max(uvs, std::abs(sol.u(x) + sol.v(F) - sol.surplus().value(x, F)));
  }
  double v_err = 0;
  for (const auto& r : sol.grid_rows()) v_err = std::max(v_err, std::abs(r.v - rc::v(r.y)));
  json pts = json::array();
  for (const Point& x : {Point{0.0, 0.0}, Point{1.0, 0.0}}) {
    const double y = sol.F(x);
    const Point z = hs.z_star(x, y);
    const double P = sol.v(y) + hs.problem().c(Point{y}, z);
    const auto ref = rc::price_point(std::clamp(y, 1.0, 2.0));
    pts.push_back({{"y", y}, {"Z", dot(z, z)}, {"P", P}, {"Z_reference", ref.Z}, {"P_reference", ref.P}});
  }
  return {{"F_max_abs_error", F_err},
          {"u_max_abs_error", u_err},
          {"v_max_abs_error", v_err},
          {"u_plus_v_minus_s_max", uvs},
          {"price_points", pts}};
}

inline json reference_disks(const LatticeSolution& L, const HedonicSurplus& hs, const disks::Params& prm) {
  double F_err = 0;
  std::vector<double> d;
  for (std::size_t i = 0; i < L.problem.size(); ++i) {
    const Point& x = L.problem.x_atoms[i];
    const Point& y = L.problem.y_atoms[L.coupling.partner[i]];
    const Point F = disks::F(prm, x);
    for (std::size_t q = 0; q < F.size(); ++q) F_err = std::max(F_err, std::abs(F[q] - y[q]));
    const Point z = hs.z_star(x, y);
    d.push_back(L.v_atoms[L.coupling.partner[i]] + hs.problem().c(y, z) - disks::P(prm, z));
  }
  const double shift = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double P_err = 0;
  for (double t : d) P_err = std::max(P_err, std::abs(t - shift));
  return {{"atoms", L.problem.size()},
          {"F_max_abs_error", F_err},
          {"P_max_abs_error_after_alignment", P_err},
          {"P_constant_shift", shift},
          {"duality_gap", L.coupling.duality_gap}};
}

inline LatticeSolution solve_lattice(const RunConfig& c) {
  return solve_on_lattice(*c.surplus, disks::x_domain(c.disks), disks::y_domain(c.disks), c.lattice_spacing);
}

/// Discrete oracle vs continuum; returns a mismatch message or "".
inline std::string oracle_compare(RunContext& ctx, Artifacts& art, const MatchingSolution& sol,
                                  const DensityMeasure& mu) {
  const RunConfig& c = ctx.cfg;
  const DiscreteProblem p = sample_atoms(*c.surplus, mu, *c.nu, c.oracle.N, c.oracle.seed);
  const DiscreteCoupling cp = solve_exact(p);
  const ContinuumComparison cmp = compare_to_continuum(p, cp, sol);
  json cert = certificate_json(p, cp);
  cert["seed"] = c.oracle.seed;
  cert["surplus_ratio"] = cmp.surplus_ratio;
  cert["matched_y_rmse"] = cmp.matched_y_rmse;
  cert["continuum_min_delta"] = cmp.continuum_monotonicity.min_delta;
  art.csv("coupling.csv", coupling_csv(p, cp));
  art.json_file("oracle.json", cert);
  ctx.log << "oracle: N=" << c.oracle.N << " gap=" << fmt(cp.duality_gap) << " surplus_ratio=" << fmt(cmp.surplus_ratio)
          << " matched_y_rmse=" << fmt(cmp.matched_y_rmse) << "\n";
  std::string bad = certificate_problem(cert);
  if (bad.empty() && cmp.surplus_ratio < 1 - 5e-3) bad = "continuum surplus below oracle optimum by more than 5e-3";
  return bad;
}

inline int run_solve(RunContext& ctx) {
  const RunConfig& c = ctx.cfg;
  Artifacts art(c.out_dir, c.formats);
  json reference;
  if (c.is_lattice()) {
    const LatticeSolution L = solve_lattice(c);
    Csv lat({"x1", "x2", "y1", "y2", "u", "v"});
    for (std::size_t i = 0; i < L.problem.size(); ++i) {
      const Point& x = L.problem.x_atoms[i];
      const std::size_t j = L.coupling.partner[i];
      const Point& y = L.problem.y_atoms[j];
      lat.row({x[0], x[1], y[0], y[1], L.u_atoms[i], L.v_atoms[j]});
    }
    art.csv("lattice.csv", lat);
    reference = reference_disks(L, *c.hedonic, c.disks);
    ctx.verdicts["lattice_duality_gap"] = L.coupling.duality_gap;
    ctx.log << "solve: lattice assignment with " << L.problem.size() << " atoms, gap " << fmt(L.coupling.duality_gap)
            << "\n";
  } else {
    const auto mu = c.mu();
    const MatchingSolution sol = build_matching(c.surplus, mu, *c.nu, c.solver);
    art.csv("k.csv", k_csv(sol));
    art.csv("split.csv", split_csv(sol.split()));
    const std::vector<Point> xs = map_points(mu->domain(), 33);
    art.csv("map.csv", map_csv(sol, xs));
    json nest = nestedness_json(sol.nested());
    nest["decomposed"] = sol.decomposed();
    nest["warnings"] = sol.warnings();
    if (sol.decomposed()) {
      json blocks = json::array();
      for (const auto& pc : sol.pieces()) blocks.push_back(nestedness_json(pc.report));
      nest["blocks"] = blocks;
    }
    art.json_file("nestedness.json", nest);
    const PushForwardReport pf = push_forward_check(sol);
    const StabilityReport st = stability_check(sol);
    art.json_file("checks.json", {{"push_forward_max_error", pf.max_abs_error},
                                  {"stability_min_residual", st.min_residual},
                                  {"stability_passes", st.passes},
                                  {"support_min_cross_difference", support_monotonicity_check(sol)}});
    ctx.verdicts["nestedness"] = to_string(sol.nested().verdict);
    ctx.verdicts["decomposed"] = sol.decomposed();
    ctx.log << "solve: verdict " << to_string(sol.nested().verdict) << (sol.decomposed() ? " (block-decomposed)" : "")
            << ", push-forward error " << fmt(pf.max_abs_error) << "\n";
    if (c.preset == "example1") reference = reference_example1(sol, xs);
    else if (c.preset == "example2") reference = reference_example2(sol, xs);
    else if (c.preset == "example3") reference = reference_example3(sol, c.epsilon);
    else if (c.preset == "rc") reference = reference_rc(sol, *c.hedonic, xs);
    if (c.preset == "example3" && c.epsilon == 0.0)
      ctx.log << "note: epsilon = 0 leaves the domain disconnected; outside the solver's hypotheses\n";
    if (c.oracle.enabled) {
      const std::string bad = oracle_compare(ctx, art, sol, *mu);
      ctx.verdicts["oracle"] = bad.empty() ? "agree" : bad;
      if (!bad.empty()) {
        ctx.log << "oracle mismatch: " << bad << "\n";
        ctx.exit_code = kOracleMismatch;
      }
    }
  }
  if (!reference.is_null()) art.json_file("reference.json", reference);
  finish(ctx, art);
  return ctx.exit_code;
}

inline void require_scalar_y(const RunConfig& c, const char* what) {
  if (c.is_lattice() || !c.nu) throw ConfigError(std::string(what) + " needs a problem with scalar y");
}

inline int run_check_nestedness(RunContext& ctx) {
  const RunConfig& c = ctx.cfg;
  require_scalar_y(c, "check-nestedness");
  Artifacts art(c.out_dir, c.formats);
  const auto mu = c.mu();
  SolverConfig sc = c.solver;
  sc.validate();
  const SplitFunction sp = compute_split(*c.surplus, *mu, *c.nu, sc);
  const NestednessReport r = nestedness_diagnostics(*c.surplus, *mu, *c.nu, sp, sc);
  art.csv("split.csv", split_csv(sp));
  art.json_file("nestedness.json", nestedness_json(r));
  ctx.verdicts["nestedness"] = to_string(r.verdict);
  ctx.log << "check-nestedness: " << to_string(r.verdict) << " (inclusion violations " << r.inclusion_violation_count
          << ", splitting failures " << r.splitting_failure_count << ", dynamic min "
          << fmt(r.dynamic_criterion_min) << ")\n";
  finish(ctx, art);
  return kOk;
}

inline int run_oracle(RunContext& ctx) {
  const RunConfig& c = ctx.cfg;
  Artifacts art(c.out_dir, c.formats);
  DiscreteProblem p;
  if (c.is_lattice()) {
    const LatticeSolution L = solve_lattice(c);
    p = L.problem;
  } else {
    p = sample_atoms(*c.surplus, *c.mu(), *c.nu, c.oracle.N, c.oracle.seed);
  }
  const DiscreteCoupling cp = solve_exact(p);
  json cert = certificate_json(p, cp);
  cert["seed"] = c.oracle.seed;
  art.csv("coupling.csv", coupling_csv(p, cp));
  art.json_file("certificate.json", cert);
  const std::string bad = certificate_problem(cert);
  ctx.verdicts["certificate"] = bad.empty() ? "ok" : bad;
  ctx.log << "oracle: N=" << cp.size() << " total_surplus=" << fmt(cp.total_surplus)
          << " duality_gap=" << fmt(cp.duality_gap) << "\n";
  if (!bad.empty()) {
    ctx.log << "oracle mismatch: " << bad << "\n";
    ctx.exit_code = kOracleMismatch;
  }
  finish(ctx, art);
  return ctx.exit_code;
}

inline int run_price(RunContext& ctx) {
  const RunConfig& c = ctx.cfg;
  if (!c.hedonic) throw ConfigError("price needs a hedonic problem (preset rc, preset disks or problem.hedonic)");
  Artifacts art(c.out_dir, c.formats);
  const HedonicSurplus& hs = *c.hedonic;
  PriceSchedule ps;
  if (c.is_lattice()) {
    const LatticeSolution L = solve_lattice(c);
    ps = price_schedule(L.payoffs(hs), hs, L.problem.x_atoms, L.problem.y_atoms);
    Csv out({"z1", "z2", "P", "lower_env", "upper_env", "P_reference"});
    for (const TradedPoint& t : ps.traded) {
      out.row({t.z[0], t.z[1], t.P, t.lower, t.upper, disks::P(c.disks, t.z)});
    }
    art.csv("price.csv", out);
    art.json_file("reference.json", reference_disks(L, hs, c.disks));
  } else {
    const auto mu = c.mu();
    const MatchingSolution sol = build_matching(c.surplus, mu, *c.nu, c.solver);
    std::vector<Point> xs = sample_from_measure(*mu, c.oracle.N, c.oracle.seed);
    ps = price_schedule(sol, hs, xs);
    std::vector<std::size_t> order(ps.traded.size());
    std::iota(order.begin(), order.end(), 0);
    auto Z = [&](std::size_t i) { return dot(ps.traded[i].z, ps.traded[i].z); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return Z(a) < Z(b); });
    std::vector<std::string> head{"Z"};
    for (std::size_t q = 0; q < hs.problem().product_dim; ++q) head.push_back("z" + std::to_string(q + 1));
    for (const char* h : {"y", "P", "lower_env", "upper_env"}) head.push_back(h);
    Csv out(head);
    for (std::size_t i : order) {
      const TradedPoint& t = ps.traded[i];
      std::vector<double> row{Z(i)};
      row.insert(row.end(), t.z.begin(), t.z.end());
      row.insert(row.end(), {t.y[0], t.P, t.lower, t.upper});
      out.row(row);
    }
    art.csv("price.csv", out);
    if (c.preset == "rc") art.json_file("reference.json", reference_rc(sol, hs, map_points(mu->domain(), 33)));
  }
  art.json_file("price.json", {{"traded_points", ps.traded.size()},
                               {"max_side_gap", ps.max_side_gap},
                               {"max_band_violation", ps.max_band_violation}});
  ctx.verdicts["price_band_violation"] = ps.max_band_violation;
  ctx.log << "price: " << ps.traded.size() << " traded goods, max band violation " << fmt(ps.max_band_violation) << "\n";
  finish(ctx, art);
  return kOk;
}

inline int run_twist_check(RunContext& ctx) {
  const RunConfig& c = ctx.cfg;
  Artifacts art(c.out_dir, c.formats);
  std::vector<Point> xs, ys;
  if (c.is_lattice()) {
    const Domain xd = disks::x_domain(c.disks), yd = disks::y_domain(c.disks);
    xs = lattice_atoms(xd, 0.25, xd.bounding_box().lo);
    ys = lattice_atoms(yd, 0.25, yd.bounding_box().lo);
  } else {
    xs = sample_from_measure(*c.mu(), 64, c.oracle.seed);
    for (std::size_t j = 0; j < 17; ++j) ys.push_back({c.nu->quantile((static_cast<double>(j) + 0.5) / 17.0)});
  }
  std::vector<std::pair<Point, Point>> pairs;
  for (std::size_t a = 0; a < ys.size(); ++a)
    for (std::size_t b = a + 1; b < ys.size(); ++b) pairs.push_back({ys[a], ys[b]});
  const TwistReport r = check_twist(*c.surplus, xs, pairs);
  json wit = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(10, r.witnesses.size()); ++i) {
    const auto& w = r.witnesses[i];
    wit.push_back({{"x", point_json(w.x)}, {"y", point_json(w.y)}, {"y0", point_json(w.y0)}, {"diff_norm", w.diff_norm}});
  }
  art.json_file("twist.json", {{"verdict", r.holds ? "pass" : "fail"},
                               {"min_diff_norm", r.min_diff_norm},
                               {"tested", r.tested},
                               {"witnesses", wit}});
  ctx.verdicts["twist"] = r.holds ? "pass" : "fail";
  ctx.log << "twist-check: " << (r.holds ? "pass" : "fail") << " (min |D_x s(x,y) - D_x s(x,y')| = "
          << fmt(r.min_diff_norm) << " over " << r.tested << " pairs)\n";
  finish(ctx, art);
  return kOk;
}

/// Runs `body` and maps library errors onto exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kConfig;
  } catch (const OracleMismatch& e) {
    err << "oracle mismatch: " << e.what() << "\n";
    return kOracleMismatch;
  } catch (const Error& e) {
    err << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return kUnexpected;
  }
}

}  // namespace matchkit::cli
