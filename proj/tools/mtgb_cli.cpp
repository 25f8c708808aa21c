// mtgb: run, validate and inspect backdoor-attack experiment configs.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 pipeline error.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "mtgb/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;

void print_diagnostics(const std::vector<mtgb::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "config error: " << d.field << ": " << d.message << "\n";
}

int do_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<int> threads,
           const std::optional<std::string>& out) {
  try {
    mtgb::ExperimentConfig cfg = mtgb::load_config(path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (out) cfg.output_dir = *out;
    const auto result = mtgb::run(cfg);
    std::cout << mtgb::report_to_csv(result.report);
    if (!result.comparison.empty()) std::cout << "\n" << mtgb::comparison_to_csv(result.comparison);
    std::cout << "artifacts: " << result.output_dir.string() << "\n";
    return 0;
  } catch (const mtgb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mtgb::PipelineError& e) {
    std::cerr << "pipeline error in stage " << e.stage() << ": " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kExitPipeline;
  }
}

int do_validate(const std::string& path, std::optional<std::uint64_t> seed) {
  std::vector<mtgb::Diagnostic> diags;
  try {
    mtgb::ExperimentConfig cfg = mtgb::load_config(path);
    if (seed) cfg.seed = *seed;
    diags = mtgb::validate(cfg);
  } catch (const mtgb::ConfigError& e) {
    diags.push_back({e.field(), e.what()});
  }
  if (diags.empty()) {
    std::cout << "ok\n";
    return 0;
  }
  print_diagnostics(diags);
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-target graph backdoor attack experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mtgb::kVersion));

  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Run the attack pipeline described by a config or manifest");
  run->add_option("config", config_path, "Config (or manifest.json) path")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--threads", threads, "Training threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", out, "Override the output directory");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "Config path")->required();
  validate->add_option("--seed", seed, "Override the master seed");

  auto* defaults = app.add_subcommand("defaults", "Print the attack defaults");
  bool full = false;
  defaults->add_flag("--full", full, "Print a complete default config instead");

  CLI11_PARSE(app, argc, argv);

  if (*run) return do_run(config_path, seed, threads, out);
  if (*validate) return do_validate(config_path, seed);
  if (*defaults) {
    std::cout << (full ? mtgb::config_to_json(mtgb::default_config()) : mtgb::attack_defaults_json());
    return 0;
  }
  return 1;
}
