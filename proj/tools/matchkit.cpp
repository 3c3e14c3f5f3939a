// matchkit command-line tool. See `matchkit --help`.

#include <iostream>

#include "CLI11.hpp"
#include "matchkit/cli.hpp"

namespace mc = matchkit::cli;

int main(int argc, char** argv) {
  CLI::App app{"Multi-to-one dimensional matching: nested solver, discrete oracle and hedonic prices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mc::kVersion);

  std::string config_path;
  mc::Overrides ov;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { ov.out = v; }, "output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { ov.seed = v; }, "oracle / sampling seed");
    sub->add_option_function<std::size_t>("--grid", [&](std::size_t v) { ov.grid = v; },
                                          "x quadrature cells per axis (lattice cells per diameter for disks)");
    sub->add_option_function<std::size_t>("--atoms", [&](std::size_t v) { ov.atoms = v; }, "oracle atom count");
  };

  auto* solve = app.add_subcommand("solve", "solve, diagnose and (optionally) compare with the oracle");
  auto* nest = app.add_subcommand("check-nestedness", "split function and nestedness diagnostics only");
  auto* oracle = app.add_subcommand("oracle", "exact discrete transport on sampled atoms");
  auto* price = app.add_subcommand("price", "hedonic price schedule with envelopes");
  auto* twist = app.add_subcommand("twist-check", "sampled twist condition test");
  auto* example = app.add_subcommand("example", "run a named preset end to end");
  std::string preset;
  example->add_option("name", preset, "preset name")->required()->check(CLI::IsMember(mc::preset_names()));
  for (auto* s : {solve, nest, oracle, price, twist}) add_common(s, true);
  add_common(example, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mc::kConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  return mc::guarded(std::cerr, [&] {
    mc::RunConfig cfg = chosen == example ? (config_path.empty() ? mc::preset_config(preset) : mc::load_config(config_path))
                                          : mc::load_config(config_path);
    if (chosen == example && !config_path.empty() && cfg.preset != preset)
      throw matchkit::ConfigError("example " + preset + ": --config names preset '" + cfg.preset + "'");
    mc::apply(cfg, ov);
    mc::RunContext ctx{std::move(cfg), chosen->get_name(), std::cout};
    if (chosen == solve || chosen == example) return mc::run_solve(ctx);
    if (chosen == nest) return mc::run_check_nestedness(ctx);
    if (chosen == oracle) return mc::run_oracle(ctx);
    if (chosen == price) return mc::run_price(ctx);
    return mc::run_twist_check(ctx);
  });
}
