#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtgb/gnn.hpp"
#include "mtgb/graph.hpp"

namespace mtgb {

struct SmoothingConfig {
  int n_samples = 100;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SmoothedPrediction {
  int label = 0;
  std::vector<int> votes;        // per class; sums to n_samples
  std::vector<int> predictions;  // one per noisy copy, in sample order
};

// Majority class of a vote histogram, lowest class index on ties.
int majority_vote(const std::vector<int>& votes);

// Predicts on n_samples copies of g whose features carry N(0, sigma^2) noise
// (topology untouched) and returns the majority vote. `graph_index` selects
// the per-graph noise substream.
SmoothedPrediction smooth_predict_detailed(const TrainedModel& model, const Graph& g,
                                           const SmoothingConfig& cfg, std::uint64_t graph_index = 0);
int smooth_predict(const TrainedModel& model, const Graph& g, const SmoothingConfig& cfg,
                   std::uint64_t graph_index = 0);

struct DefensePoint {
  double knob = 0.0;  // sigma or prune ratio
  double clean_accuracy = 0.0;
  std::vector<double> asr;  // one per poisoned test set
};

struct DefenseCurve {
  std::string defense;  // "rs" or "fp"
  std::vector<DefensePoint> points;
};

// Fraction of `poisoned` graphs predicted as `target` by the smoothed
// classifier; clean accuracy similarly. Exposed for curve construction.
double smoothed_accuracy(const TrainedModel& model, const GraphDataset& test,
                         const SmoothingConfig& cfg);
double smoothed_hit_rate(const TrainedModel& model, const GraphDataset& poisoned, int target,
                         const SmoothingConfig& cfg);

// One row per sigma: smoothed CA on clean_test, smoothed ASR per poisoned set.
// targets[j] is the target class of poisoned_tests[j].
DefenseCurve rs_curve(const TrainedModel& model, const GraphDataset& clean_test,
                      const std::vector<GraphDataset>& poisoned_tests, const std::vector<int>& targets,
                      const std::vector<double>& sigmas, const SmoothingConfig& cfg);

struct PruneConfig {
  double prune_ratio = 0.0;
  double clean_fraction = 0.05;
  TrainConfig finetune;
  // Prune every hidden layer by the same ratio instead of only the last.
  bool all_hidden_layers = false;
  std::uint64_t seed = 0;
};

// Fine-tune defaults: 20 epochs at one tenth of the training learning rate.
TrainConfig default_finetune(const TrainConfig& training);

// Clean subset of the train set used for fine-tuning: round(fraction * |train|)
// graphs (at least one), drawn without replacement from `seed`.
GraphDataset draw_clean_subset(const GraphDataset& train, double fraction, std::uint64_t seed);

// Units of `layer` ordered by ascending mean activation on `data`; ties by
// unit index. The first round(ratio * hidden_dim) are the pruned set.
std::vector<std::size_t> prune_order(const TrainedModel& model, const GraphDataset& data, int layer);
std::size_t prune_count(double ratio, int hidden_dim);

struct PruneResult {
  TrainedModel model;
  // pruned_units[l]: zeroed units of hidden layer l (empty for unpruned layers).
  std::vector<std::vector<std::size_t>> pruned_units;
  std::vector<std::string> warnings;
};

// Zeroes the lowest-activation units without fine-tuning.
PruneResult prune_model(const TrainedModel& model, const GraphDataset& clean_subset,
                        double ratio, bool all_hidden_layers);

// Fine-tunes on clean_subset with cfg.finetune, then prunes.
PruneResult fine_prune(const TrainedModel& model, const GraphDataset& clean_subset,
                       const PruneConfig& cfg);

// Fine-tunes once, then prunes the fine-tuned model at every ratio.
DefenseCurve fp_curve(const TrainedModel& model, const GraphDataset& clean_subset,
                      const GraphDataset& clean_test, const std::vector<GraphDataset>& poisoned_tests,
                      const std::vector<int>& targets, const std::vector<double>& ratios,
                      const PruneConfig& cfg);

// Columns: defense, knob, CA, ASR_1..ASR_m.
std::string curve_to_csv(const DefenseCurve& curve);

}  // namespace mtgb
