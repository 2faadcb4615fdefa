#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cop2l/config.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/experiment.hpp"
#include "cop2l/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cop2l: self-certified continual learning experiments"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  int jobs = 1;
  std::uint64_t seed_override = 0;
  auto* run = app.add_subcommand("run", "execute every (method, seed) cell of a config");
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--jobs", jobs, "number of cells to run in parallel")
      ->default_val(1)
      ->check(CLI::Range(1, 1024));
  auto* seed_opt = run->add_option("--seed-override", seed_override,
                                   "run this single seed instead of the config's list");
  run->add_option("--out", run_out, "output directory (overrides COP2L_OUT and the config)");

  std::string verify_record_path;
  std::string verify_config;
  auto* verify = app.add_subcommand("verify", "replay a record and check its certificates");
  verify->add_option("record", verify_record_path, "record.json written by a run")
      ->required();
  verify->add_option("--config", verify_config, "config file to cross-check against");

  std::string render_metrics;
  std::string render_out;
  auto* render = app.add_subcommand("render", "draw the bound figure from a metrics table");
  render->add_option("metrics", render_metrics, "metrics.csv written by a run")->required();
  render->add_option("svg", render_out, "output SVG path")->required();

  std::string info_config;
  auto* info = app.add_subcommand("info", "print the engine version and a config's canonical form");
  info->add_option("--config", info_config, "config file to canonicalize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      cop2l::ExperimentConfig cfg = cop2l::load_experiment_config(run_config);
      if (seed_opt->count() > 0) cfg.run.seeds = {seed_override};
      std::string out = cop2l::resolve_out_dir(cfg.run.out, run_out);
      return cop2l::run_experiment(cfg, jobs, out);
    }
    if (verify->parsed()) {
      return cop2l::verify_record(verify_record_path, verify_config);
    }
    if (render->parsed()) {
      return cop2l::render_figure(render_metrics, render_out);
    }
    if (info->parsed()) {
      std::printf("engine %s\n", cop2l::kEngineVersion);
      if (!info_config.empty()) {
        cop2l::ExperimentConfig cfg = cop2l::load_experiment_config(info_config);
        std::printf("config_hash %s\n", cfg.config_hash().c_str());
        for (const auto& line : cfg.canonical_lines())
          std::printf("%s\n", line.c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
