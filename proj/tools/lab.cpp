// lab <kind> --config <path> [--seed N] [--workers N] [--out DIR]
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "oslab/lab/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Experiment runner for regularity, entropy and tail studies on suspension flows"};
  std::string kind, config_path, out;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  app.add_option("kind", kind, "experiment kind")->required()->check(CLI::IsMember(oslab::lab::experiment_kinds()));
  app.add_option("--config", config_path, "INI configuration file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override experiment.seed");
  auto* workers_opt = app.add_option("--workers", workers, "override experiment.workers")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "override experiment.out");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  oslab::lab::ExperimentConfig cfg;
  try {
    cfg = oslab::lab::load_config(config_path, kind);
    if (*seed_opt) cfg.seed = seed;
    if (*workers_opt) cfg.workers = workers;
    if (*out_opt) cfg.out_dir = out;
  } catch (const oslab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    const auto bundle = oslab::lab::run(cfg);
    const auto dir = oslab::lab::write_bundle(cfg, bundle);
    std::printf("%s: wrote %s (checks %s)\n", cfg.kind.c_str(), dir.string().c_str(),
                bundle.checks_passed ? "passed" : "FAILED");
    return bundle.checks_passed ? 0 : 3;
  } catch (const oslab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
