#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "re2/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> steps;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "Master seed override");
  cmd->add_option("--out", args.out, "Output base directory override");
  cmd->add_option("--steps", args.steps, "max_steps override");
}

re2::RunConfig load_with_overrides(const CommonArgs& args) {
  re2::RunConfig cfg = re2::RunConfig::load(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    if (!cfg.world_seed_base_explicit) cfg.world_seed_base = *args.seed;
  }
  if (args.out) cfg.out = *args.out;
  if (args.steps) cfg.train.max_steps = *args.steps;
  cfg.validate();
  return cfg;
}

void report(const re2::RunArtifacts& art) {
  std::cout << "run dir: " << art.run_dir.string() << '\n';
  for (const auto& [name, path] : art.outputs)
    std::cout << "  " << name << ": " << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale RL trainer with a resolve/restart action"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, compare_args, estlab_args, analyze_args;
  std::string checkpoint_path, baseline_config_path;

  CLI::App* train = app.add_subcommand("train", "Run training, write metrics and checkpoints");
  add_common(train, train_args);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint, write analysis CSVs");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint to evaluate")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* compare = app.add_subcommand("compare", "Paired budget-equalized comparison");
  add_common(compare, compare_args);
  compare->add_option("--baseline-config", baseline_config_path, "Baseline configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* estlab = app.add_subcommand("estlab", "Estimator bias/variance sweep");
  add_common(estlab, estlab_args);

  CLI::App* analyze = app.add_subcommand("analyze", "Length and prefix-drop analyses");
  add_common(analyze, analyze_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = load_with_overrides(train_args);
      report(re2::run_train(cfg, cfg.out));
    } else if (eval->parsed()) {
      const auto cfg = load_with_overrides(eval_args);
      report(re2::run_eval(cfg, checkpoint_path, cfg.out));
    } else if (compare->parsed()) {
      const auto cfg = load_with_overrides(compare_args);
      re2::RunConfig baseline = re2::RunConfig::load(baseline_config_path);
      if (compare_args.steps) baseline.train.max_steps = *compare_args.steps;
      report(re2::run_compare(cfg, baseline, cfg.out));
    } else if (estlab->parsed()) {
      const auto cfg = load_with_overrides(estlab_args);
      report(re2::run_estlab(cfg, cfg.out));
    } else if (analyze->parsed()) {
      const auto cfg = load_with_overrides(analyze_args);
      report(re2::run_analyze(cfg, cfg.out));
    }
  } catch (const re2::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const re2::IncompatibleError& e) {
    std::cerr << "incompatibility: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
