#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtgb/gnn.hpp"
#include "mtgb/graph.hpp"
#include "mtgb/poisoner.hpp"
#include "mtgb/trigger.hpp"

namespace mtgb {

// Fraction of poisoned_test predicted as `target`. Throws EmptyInputError on
// an empty set.
double attack_success_rate(const TrainedModel& model, const GraphDataset& poisoned_test, int target);
double clean_accuracy(const TrainedModel& model, const GraphDataset& test);

// Recount helpers over stored predictions.
double hit_fraction(const std::vector<int>& predictions, int target);
double accuracy_of(const std::vector<int>& predictions, const GraphDataset& truth);

struct TargetResult {
  int target_class = 0;
  double asr = 0.0;
  std::vector<int> predictions;  // backdoored model on the poisoned test set
};

struct AttackReport {
  std::string mechanism = "injection";
  std::vector<TargetResult> targets;
  double clean_accuracy = 0.0;        // backdoored model, clean test set
  double clean_model_accuracy = 0.0;  // clean model, clean test set
  double cad = 0.0;                   // clean_model_accuracy - clean_accuracy
  double mean_asr = 0.0;
  std::vector<int> clean_predictions;        // backdoored model
  std::vector<int> clean_model_predictions;  // clean model
  std::uint64_t config_hash = 0;

  std::vector<double> asr() const;
};

// Poisons the test set once per trigger (seed selects the injection
// substreams), then measures every ASR, the backdoored CA and the CAD.
AttackReport full_attack_eval(const TrainedModel& clean_model, const TrainedModel& backdoored_model,
                              const GraphDataset& test, const std::vector<Trigger>& triggers,
                              const InjectionOptions& opts, std::uint64_t seed,
                              bool exclude_target_class = false);

std::string report_to_json(const AttackReport& r);
AttackReport report_from_json(const std::string& json);
// Aligned columns: mechanism, clean_model_CA, ASR_1..ASR_m, CA, CAD, mean_ASR.
std::string report_to_csv(const AttackReport& r);
// Injection-vs-replacement table, one row per report.
std::string comparison_to_csv(const std::vector<AttackReport>& reports);

enum class CellStatus { ok, failed };

struct SweepCell {
  std::string value;         // primary swept value, as text
  std::string second_value;  // second axis of a 2-D grid; empty otherwise
  CellStatus status = CellStatus::ok;
  std::string error;
  AttackReport report;
};

struct SweepGrid {
  std::string parameter;
  std::vector<std::string> values;
  std::vector<std::string> second_values;  // 2-D grids only
  std::vector<SweepCell> cells;            // row-major over (values, second_values)
};

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names = {
      "poisoning_ratio", "trigger_size", "edge_density", "k", "n_targets", "strategy",
      "trigger_size_x_edge_density"};
  return names;
}

// Produces one AttackReport for a cell. `cell_index` is the row-major position
// and is meant to seed per-cell substreams. Exceptions mark the cell failed.
using SweepPipeline = std::function<AttackReport(const std::string& value, const std::string& second_value,
                                                 std::size_t cell_index)>;

// Runs the pipeline for every value (or value pair); failed cells keep their
// error text and the sweep continues. Throws ArgumentError for unknown
// parameter names.
SweepGrid sweep(const std::string& parameter, const std::vector<std::string>& values,
                const std::vector<std::string>& second_values, const SweepPipeline& pipeline);

std::string sweep_to_json(const SweepGrid& grid);
// Long format: value[,second_value],status,CA,CAD,mean_ASR,ASR_1..ASR_m.
std::string sweep_to_csv(const SweepGrid& grid);
// Matrix of mean ASR, rows = values, columns = second_values.
std::string sweep_heatmap_csv(const SweepGrid& grid);

}  // namespace mtgb
