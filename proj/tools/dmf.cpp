#include "dmf/harness/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

dmf::harness::ExperimentConfig load(const std::string& path,
                                    const std::vector<std::string>& overrides) {
  dmf::harness::ExperimentConfig cfg = dmf::harness::load_config(path);
  for (const auto& o : overrides) dmf::harness::apply_override(cfg, o);
  if (const char* env = std::getenv("DMF_SEED")) {
    cfg.seed = std::stoull(env);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep matrix factorization experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  dmf::harness::RunOptions opts;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) {
      sub->add_option("config", config_path, "experiment config file")->required();
      sub->add_option("--set", overrides, "override a config key (section.key=value)");
    }
    sub->add_flag("--quiet", opts.quiet, "suppress progress output");
    sub->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-timestamp", opts.no_timestamp,
                  "omit the generated-at header from CSV output");
  };

  CLI::App* run = app.add_subcommand("run", "train over the configured grid");
  add_common(run, true);
  CLI::App* flow = app.add_subcommand("flow", "integrate the product-matrix flow");
  add_common(flow, true);
  CLI::App* baseline =
      app.add_subcommand("baseline", "minimum nuclear norm solutions over the m grid");
  add_common(baseline, true);
  CLI::App* check = app.add_subcommand("check", "run the theory verification suite");
  add_common(check, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      dmf::harness::run_experiment(load(config_path, overrides), opts);
    } else if (flow->parsed()) {
      dmf::harness::run_flow(load(config_path, overrides), opts);
    } else if (baseline->parsed()) {
      dmf::harness::run_baseline(load(config_path, overrides), opts);
    } else if (check->parsed()) {
      if (!dmf::harness::run_theory_checks(std::cout)) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
