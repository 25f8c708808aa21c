#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtgb/dataset_io.hpp"
#include "mtgb/error.hpp"
#include "mtgb/defenses.hpp"
#include "mtgb/evaluator.hpp"
#include "mtgb/gnn.hpp"
#include "mtgb/poisoner.hpp"
#include "mtgb/trigger.hpp"

namespace mtgb {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kVersion = "mtgb 0.1.0";

// A stage of the attack pipeline failed (dataset, split, clean_train, poison,
// backdoor_train, evaluate, defenses, sweep, write).
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" | "tu"
  SyntheticSpec synthetic;           // seed: unset means the master seed
  bool synthetic_seed_set = false;
  std::string tu_path;
  std::string tu_name;
  bool degree_features = false;  // replace intrinsic features by degrees
};

struct TriggerConfig {
  std::optional<double> size_fraction;  // unset: rule below
  double size_fraction_small = 0.20;    // n_avg < size_threshold
  double size_fraction_large = 0.10;
  double size_threshold = 150.0;
  std::optional<double> edge_density;   // unset: by feature kind
  double edge_density_intrinsic = 0.8;
  double edge_density_degree = 0.2;
  std::optional<double> x_min;
  std::optional<double> x_max;
  bool per_column_range = false;
};

struct AttackConfig {
  int n_targets = 3;
  std::vector<int> targets;  // empty: classes 0..n_targets-1
  double poisoning_ratio = 0.05;
  TriggerConfig trigger;
  InjectionStrategy strategy = InjectionStrategy::random;
  int k = 1;
  bool distinct_host_anchors = false;
  Mechanism mechanism = Mechanism::injection;
  // Also run the other mechanism on the same hosts and emit a comparison table.
  bool compare_mechanisms = false;
  bool exclude_target_class = false;
};

struct RsConfig {
  bool enabled = false;
  int n_samples = 100;
  std::vector<double> sigmas{0.0, 0.1, 0.2, 0.4, 0.8};
};

struct FpConfig {
  bool enabled = false;
  double clean_fraction = 0.05;
  std::vector<double> ratios{0.0, 0.25, 0.5, 0.75};
  int finetune_epochs = 20;
  std::optional<double> finetune_learning_rate;  // unset: train lr / 10
  bool all_hidden_layers = false;
};

struct SweepConfig {
  std::string parameter;
  std::vector<std::string> values;
  std::vector<std::string> second_values;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 7;
  DatasetConfig dataset;
  SplitSpec split;  // seed field ignored; derived from the master seed
  ModelConfig model;  // num_classes / input_dim / seed filled from the data
  TrainConfig train;  // seed / threads filled at run time
  AttackConfig attack;
  RsConfig rs;
  FpConfig fp;
  std::optional<SweepConfig> sweep;
  int threads = 1;
  std::string output_dir = "out";
};

struct Diagnostic {
  std::string field;
  std::string message;
};

ExperimentConfig default_config();

// The attack defaults (target count, ratio, strategy, k, mechanism, trigger
// size and density rules) as JSON.
std::string attack_defaults_json();

// Strict: unknown keys and wrong types raise ConfigError naming the JSON path.
// Accepts either a config document or a run manifest (its resolved_config).
ExperimentConfig config_from_json(const std::string& json);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Hash of the resolved config minus output location and thread count.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Everything a run would check before training: field ranges, dataset files,
// target classes against the data, host-selection feasibility.
std::vector<Diagnostic> validate(const ExperimentConfig& cfg);
std::vector<Diagnostic> validate_file(const std::filesystem::path& path);

struct PreparedData {
  GraphDataset full;
  Split split;
  DatasetStats train_stats;
};

PreparedData prepare_data(const ExperimentConfig& cfg);
// Fills every default that depends on the data (trigger size, density,
// targets, model dimensions, synthetic seed).
ExperimentConfig resolve(const ExperimentConfig& cfg, const PreparedData& data);

// Trigger spec and target list of a resolved config.
TriggerSpec trigger_spec_of(const ExperimentConfig& resolved, std::uint64_t stream = 0);
std::vector<int> targets_of(const ExperimentConfig& cfg);

struct AttackOutcome {
  PoisonPlan plan;
  TrainedModel backdoored;
  AttackReport report;
};

// Triggers -> hosts -> poisoned train set -> backdoored training -> report.
// `stream` separates substreams of different runs sharing a master seed (0 for
// the main run, cell index + 1 for sweep cells).
AttackOutcome run_attack(const ExperimentConfig& resolved, const PreparedData& data,
                         const TrainedModel& clean_model, std::uint64_t stream = 0);

// Copy of `resolved` with one sweep cell's values applied.
ExperimentConfig apply_sweep_value(const ExperimentConfig& resolved, const std::string& parameter,
                                   const std::string& value, const std::string& second_value);
// Cell i runs on stream i + 1 against the shared clean model.
SweepGrid run_sweep(const ExperimentConfig& resolved, const SweepConfig& sweep_cfg,
                    const PreparedData& data, const TrainedModel& clean_model);

TrainedModel train_clean_model(const ExperimentConfig& resolved, const PreparedData& data);

struct RunResult {
  std::filesystem::path output_dir;
  AttackReport report;
  std::vector<AttackReport> comparison;
  std::optional<DefenseCurve> rs;
  std::optional<DefenseCurve> fp;
  std::optional<SweepGrid> sweep;
};

// Full pipeline; writes manifest.json, models/, plans/, reports/ under
// cfg.output_dir. Throws ConfigError for invalid configs and PipelineError
// (with the failing stage) for everything else.
RunResult run(const ExperimentConfig& cfg);

}  // namespace mtgb
