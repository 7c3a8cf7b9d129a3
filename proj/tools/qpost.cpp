// qpost: batch driver for quasi-posterior experiments.
//
// Subcommands (one per task): gen-logistic, gen-ising, fit, oracle, bounds,
// verify, rate-study. Every run takes a JSON config plus optional flag
// overrides (flags win), and writes its reports under --out. Exit codes:
// 0 pass, 1 config validation error, 2 runtime error, 3 verify-suite failure.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "qpost/experiment.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  int workers = -1;
};

int run_task(const std::string& task, const CliArgs& args) {
  qpost::json raw;
  try {
    raw = qpost::read_json(args.config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
  raw["task"] = task;
  if (args.has_seed) raw["seed"] = args.seed;
  if (!args.out_dir.empty()) raw["out"] = args.out_dir;
  if (args.workers >= 0) raw["workers"] = args.workers;

  qpost::ExperimentConfig cfg;
  try {
    cfg = qpost::parse_config(raw);
  } catch (const qpost::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
  try {
    const qpost::ExperimentResult res = qpost::run_experiment(cfg);
    return res.exit_code;
  } catch (const qpost::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-posterior contraction toolkit"};
  app.require_subcommand(1);

  CliArgs args;
  std::string picked;
  for (const std::string& task : qpost::ExperimentConfig::known_tasks()) {
    CLI::App* sub = app.add_subcommand(task, "run the '" + task + "' task");
    sub->add_option("--config", args.config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "seed override (flags win over config)")
        ->each([&](const std::string&) { args.has_seed = true; });
    sub->add_option("--out", args.out_dir, "output directory override");
    sub->add_option("--workers", args.workers,
                    "worker cap override (QPOST_WORKERS also honored)");
    sub->callback([&picked, task]() { picked = task; });
  }

  CLI11_PARSE(app, argc, argv);
  return run_task(picked, args);
}
