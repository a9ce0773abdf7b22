// Command-line front end.  Flag handling only; everything below the surface
// lives in brwlab/cli.hpp so the test suite can exercise it in-process.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "brwlab/cli.hpp"

namespace {

using brwlab::Scenario;

struct FlagSet {
  std::string config, preset, model_file, out_dir;
  double a = 0.0, x_min = 0.0, x_max = 0.0;
  std::uint64_t seed = 0;
  std::size_t samples = 0, replicates = 0, horizon = 0, cap = 0, x_points = 0;
};

void add_common_flags(CLI::App* sub, FlagSet& f) {
  sub->add_option("--config", f.config, "scenario file (key = value lines)");
  sub->add_option("--preset", f.preset, "built-in model by name (see `presets`)");
  sub->add_option("--model-file", f.model_file, "model description file");
  sub->add_option("--a", f.a, "drift parameter a > 0");
  sub->add_option("--seed", f.seed, "master seed (required; no clock default)");
  sub->add_option("--out", f.out_dir, "output directory");
  sub->add_option("--samples", f.samples, "renewal path budget");
  sub->add_option("--replicates", f.replicates, "ensemble size for brw");
  sub->add_option("--horizon", f.horizon, "renewal horizon cap / brw depth");
  sub->add_option("--cap", f.cap, "population cap per generation");
  sub->add_option("--x-min", f.x_min, "left end of the evaluation grid");
  sub->add_option("--x-max", f.x_max, "right end of the evaluation grid");
  sub->add_option("--x-points", f.x_points, "number of grid points");
}

// flags given on the command line override the scenario file
void apply_flags(const CLI::App* sub, const FlagSet& f, Scenario& sc) {
  if (sub->count("--preset")) {
    sc.preset = f.preset;
    sc.model_file.clear();
  }
  if (sub->count("--model-file")) {
    sc.model_file = f.model_file;
    sc.preset.clear();
  }
  if (sub->count("--a")) sc.a = f.a;
  if (sub->count("--seed")) {
    sc.seed = f.seed;
    sc.seed_set = true;
  }
  if (sub->count("--out")) sc.out_dir = f.out_dir;
  if (sub->count("--samples")) sc.samples = f.samples;
  if (sub->count("--replicates")) sc.replicates = f.replicates;
  if (sub->count("--horizon")) sc.horizon = f.horizon;
  if (sub->count("--cap")) sc.cap = f.cap;
  if (sub->count("--x-min")) sc.x_min = f.x_min;
  if (sub->count("--x-max")) sc.x_max = f.x_max;
  if (sub->count("--x-points")) sc.x_points = f.x_points;
}

void print_presets(std::ostream& out) {
  out << "available presets:\n";
  for (const auto& p : brwlab::preset_catalogue()) {
    out << "  " << p.name;
    for (std::size_t i = p.name.size(); i < 19; ++i) out << ' ';
    out << "(a = " << p.default_a << ")  " << p.summary << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for branching random walk martingales"};
  app.require_subcommand(0, 1);
  FlagSet flags;

  CLI::App* analyze =
      app.add_subcommand("analyze", "hypothesis checks and rate constants");
  CLI::App* renewal =
      app.add_subcommand("renewal", "renewal function grids and asymptotes");
  CLI::App* brw = app.add_subcommand("brw", "martingale trace ensembles");
  CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite");
  CLI::App* presets = app.add_subcommand("presets", "list built-in models");
  for (CLI::App* sub : {analyze, renewal, brw, verify})
    add_common_flags(sub, flags);
  app.add_option("--config", flags.config,
                 "scenario file; its task runs when no subcommand is given");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (presets->parsed()) {
    print_presets(std::cout);
    return 0;
  }

  const CLI::App* sub = nullptr;
  for (const CLI::App* s : {analyze, renewal, brw, verify})
    if (s->parsed()) sub = s;
  if (!sub && flags.config.empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    Scenario sc;
    bool have_config = !flags.config.empty();
    if (have_config) {
      std::ifstream in(flags.config);
      if (!in) throw brwlab::ConfigError("cannot open config '" + flags.config + "'");
      sc = brwlab::parse_scenario(in);
    }
    if (sub) {
      const std::string name = sub->get_name();
      sc.task = name == "analyze"   ? Scenario::Task::Analyze
                : name == "renewal" ? Scenario::Task::Renewal
                : name == "brw"     ? Scenario::Task::Brw
                                    : Scenario::Task::Verify;
      apply_flags(sub, flags, sc);
    }
    if (!sc.seed_set && sc.task != Scenario::Task::Verify)
      throw brwlab::ConfigError("a seed is required (seed = ... or --seed)");
    if (sc.task != Scenario::Task::Verify && sc.preset.empty() &&
        sc.model_file.empty())
      throw brwlab::ConfigError("pick a model: --preset NAME or --model-file PATH");

    const brwlab::cli::RunResult res = brwlab::cli::run(sc, &std::cout);
    for (const auto& f : res.files) std::cout << "wrote " << f << "\n";
    if (!res.message.empty()) std::cout << res.message << "\n";
    return res.exit_code;
  } catch (const brwlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const brwlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
