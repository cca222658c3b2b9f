#include "invmh/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  namespace r = invmh::runner;
  CLI::App app{"Involutive Metropolis-Hastings sampler runner"};
  app.set_version_flag("--version", r::kLibraryVersion);
  app.require_subcommand(1);

  std::string config_path;
  r::RunOverrides ov;
  std::string output_dir;
  std::uint64_t seed = 0;
  int chains = 0;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  auto* out_opt = run->add_option("--output-dir", output_dir, "Output directory (overrides config and $INVMH_OUTPUT_DIR)");
  auto* seed_opt = run->add_option("--seed", seed, "Seed (overrides config)");
  auto* chains_opt = run->add_option("--chains", chains, "Number of chains (overrides config)");

  app.add_subcommand("list", "List built-in targets and samplers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : r::kConfigError;
  }

  if (app.got_subcommand("list")) {
    std::cout << r::list_builtins();
    return r::kOk;
  }
  if (*out_opt) ov.output_dir = output_dir;
  if (*seed_opt) ov.seed = seed;
  if (*chains_opt) ov.chains = chains;
  return r::run_command(config_path, ov, std::cout, std::cerr);
}
