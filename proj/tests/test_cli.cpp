#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "matchkit/cli.hpp"

using namespace matchkit;
namespace fs = std::filesystem;
using cli::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("matchkit_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Paths are baked in at build time; the environment can override them.
std::string cli_path() {
  const char* p = std::getenv("MATCHKIT_CLI");
  return p ? p : MATCHKIT_CLI_PATH;
}

std::string config_path(const std::string& name) {
  const char* d = std::getenv("MATCHKIT_CONFIGS");
  return std::string(d ? d : MATCHKIT_CONFIG_DIR) + "/" + name;
}

/// Runs the CLI with stdout/stderr captured to files under `dir`.
int run(const std::string& args, const fs::path& dir, std::string* out = nullptr) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = cli_path() + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) *out = read_file(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const std::string& text) {
  try {
    cli::parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("fnv1a and hex") {
  CHECK(cli::fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(cli::fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(cli::hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("csv rows are CRLF terminated and quoted when needed") {
  cli::Csv c({"y", "a,b"});
  c.row({0.5, 1e-20});
  CHECK(c.str() == "y,\"a,b\"\r\n0.5,1e-20\r\n");
  CHECK_THROWS_AS(c.row({1.0}), Error);
}

TEST_CASE("config validation") {
  CHECK(config_error(R"({"problem": {"preset": "example1"}, "solver": {"y_gird": 3}})").find("y_gird") !=
        std::string::npos);
  CHECK(config_error(R"({"problem": {"preset": "example1"}, "solver": {"mass_tol": -1}})") != "");
  CHECK(config_error(R"({"problem": {"preset": "nope"}})").find("unknown preset") != std::string::npos);
  CHECK(config_error(R"({"problem": {"preset": "example1", "nu": {}}})") != "");
  CHECK(config_error("{\n  \"problem\": {\n    \"preset\": \"example1\"\n  ,}\n}").find("line 4") != std::string::npos);
  CHECK(config_error(R"({"problem": {"surplus": {"type": "rc_index"}}})") != "");
  CHECK(config_error(R"({"problem": {"preset": "example1"}})") == "");
}

TEST_CASE("explicit problems parse") {
  const auto c = cli::load_config(config_path("custom_pseudo_index.json"));
  CHECK(c.surplus);
  CHECK(c.nu.has_value());
  CHECK(c.x_domain.has_value());
}

TEST_CASE("overrides") {
  auto c = cli::preset_config("disks");
  cli::apply(c, {std::string("o"), 3u, 40u, 50u});
  CHECK(c.out_dir == "o");
  CHECK(c.oracle.seed == 3);
  CHECK(c.oracle.N == 50);
  CHECK(c.lattice_spacing == Catch::Approx(0.05));
}

TEST_CASE("errors map to exit codes") {
  std::ostringstream err;
  CHECK(cli::guarded(err, [] { return 0; }) == cli::kOk);
  CHECK(cli::guarded(err, []() -> int { throw ConfigError("x"); }) == cli::kConfig);
  CHECK(cli::guarded(err, []() -> int { throw DomainError("x"); }) == cli::kConfig);
  CHECK(cli::guarded(err, []() -> int { throw InfeasibleError("x"); }) == cli::kSolver);
  CHECK(cli::guarded(err, []() -> int { throw cli::OracleMismatch("x"); }) == cli::kOracleMismatch);
  CHECK(cli::guarded(err, []() -> int { throw std::runtime_error("x"); }) == cli::kUnexpected);
}

TEST_CASE("cli: example1 end to end") {
  const fs::path d = scratch_dir("ex1");
  REQUIRE(run("example example1 --grid 128 --out " + d.string(), d) == 0);
  for (const char* f : {"k.csv", "split.csv", "map.csv", "nestedness.json", "manifest.json"})
    CHECK(fs::exists(d / f));
  CHECK(json::parse(read_file(d / "nestedness.json"))["verdict"] == "nested");
  const json man = json::parse(read_file(d / "manifest.json"));
  CHECK(man["exit_code"] == 0);
  CHECK(read_file(d / "k.csv").find("\r\n") != std::string::npos);
}

TEST_CASE("cli: example2 is decomposed") {
  const fs::path d = scratch_dir("ex2");
  REQUIRE(run("example example2 --grid 128 --out " + d.string(), d) == 0);
  const json n = json::parse(read_file(d / "nestedness.json"));
  CHECK(n["verdict"] == "not_nested");
}

TEST_CASE("cli: malformed config exits 2 with location") {
  const fs::path d = scratch_dir("bad");
  std::ofstream(d / "bad.json") << "{\n  \"problem\": {\"preset\": \"example1\"\n";
  std::string out;
  CHECK(run("solve --config " + (d / "bad.json").string(), d, &out) == 2);
  CHECK(out.find("line") != std::string::npos);
  CHECK(out.find("column") != std::string::npos);
  CHECK(run("solve", d) == 2);
  CHECK(run("solve --config " + (d / "missing.json").string(), d) == 2);
}

TEST_CASE("cli: oracle output is byte-identical across runs") {
  const fs::path a = scratch_dir("orc_a"), b = scratch_dir("orc_b");
  const std::string cfg = config_path("example1.json");
  REQUIRE(run("oracle --config " + cfg + " --grid 128 --atoms 200 --seed 7 --out " + a.string(), a) == 0);
  REQUIRE(run("oracle --config " + cfg + " --grid 128 --atoms 200 --seed 7 --out " + b.string(), b) == 0);
  CHECK(read_file(a / "coupling.csv") == read_file(b / "coupling.csv"));
  CHECK(read_file(a / "certificate.json") == read_file(b / "certificate.json"));
  CHECK_FALSE(read_file(a / "coupling.csv").empty());
}

TEST_CASE("cli: rc price curve") {
  const fs::path d = scratch_dir("price");
  REQUIRE(run("price --config " + config_path("rc.json") + " --grid 128 --out " + d.string(), d) == 0);
  const std::string csv = read_file(d / "price.csv");
  CHECK(csv.rfind("Z,", 0) == 0);
  CHECK(fs::exists(d / "price.json"));
}

TEST_CASE("cli: twist-check on an additive surplus fails") {
  const fs::path d = scratch_dir("twist");
  std::string out;
  CHECK(run("twist-check --config " + config_path("additive.json") + " --out " + d.string(), d, &out) == 0);
  CHECK(out.find("twist-check: fail") != std::string::npos);
  CHECK(json::parse(read_file(d / "twist.json"))["verdict"] == "fail");
}

TEST_CASE("cli: version") {
  const fs::path d = scratch_dir("ver");
  std::string out;
  CHECK(run("--version", d, &out) == 0);
  CHECK(out.find("matchkit") != std::string::npos);
}
