#include "mtgb/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

namespace mtgb {

int majority_vote(const std::vector<int>& votes) {
  if (votes.empty()) throw EmptyInputError("majority_vote: no classes");
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

SmoothedPrediction smooth_predict_detailed(const TrainedModel& model, const Graph& g,
                                           const SmoothingConfig& cfg, std::uint64_t graph_index) {
  if (cfg.n_samples < 1) throw ArgumentError("smoothing needs n_samples >= 1");
  if (cfg.sigma < 0.0) throw ArgumentError("smoothing sigma must be >= 0");
  SmoothedPrediction out;
  out.votes.assign(static_cast<std::size_t>(model.config.num_classes), 0);
  out.predictions.reserve(static_cast<std::size_t>(cfg.n_samples));
  if (cfg.sigma == 0.0) {
    // Every copy is g itself.
    const int y = predict(model, g);
    out.predictions.assign(static_cast<std::size_t>(cfg.n_samples), y);
    out.votes[static_cast<std::size_t>(y)] = cfg.n_samples;
    out.label = y;
    return out;
  }
  for (int s = 0; s < cfg.n_samples; ++s) {
    Rng rng = make_rng(cfg.seed, "smoothing", {graph_index, static_cast<std::uint64_t>(s)});
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    Matrix x = g.features();
    for (double& v : x.values()) v += noise(rng);
    const int y = predict(model, g.with_features(std::move(x)));
    out.predictions.push_back(y);
    ++out.votes[static_cast<std::size_t>(y)];
  }
  out.label = majority_vote(out.votes);
  return out;
}

int smooth_predict(const TrainedModel& model, const Graph& g, const SmoothingConfig& cfg,
                   std::uint64_t graph_index) {
  return smooth_predict_detailed(model, g, cfg, graph_index).label;
}

double smoothed_accuracy(const TrainedModel& model, const GraphDataset& test,
                         const SmoothingConfig& cfg) {
  if (test.empty()) throw EmptyInputError("smoothed_accuracy: empty test set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    hits += smooth_predict(model, test[i], cfg, i) == test[i].label();
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double smoothed_hit_rate(const TrainedModel& model, const GraphDataset& poisoned, int target,
                         const SmoothingConfig& cfg) {
  if (poisoned.empty()) throw EmptyInputError("smoothed_hit_rate: empty poisoned set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < poisoned.size(); ++i)
    hits += smooth_predict(model, poisoned[i], cfg, i) == target;
  return static_cast<double>(hits) / static_cast<double>(poisoned.size());
}

DefenseCurve rs_curve(const TrainedModel& model, const GraphDataset& clean_test,
                      const std::vector<GraphDataset>& poisoned_tests, const std::vector<int>& targets,
                      const std::vector<double>& sigmas, const SmoothingConfig& cfg) {
  if (poisoned_tests.size() != targets.size())
    throw ArgumentError("rs_curve: one target per poisoned test set required");
  DefenseCurve curve{"rs", {}};
  for (double sigma : sigmas) {
    SmoothingConfig c = cfg;
    c.sigma = sigma;
    DefensePoint p;
    p.knob = sigma;
    p.clean_accuracy = smoothed_accuracy(model, clean_test, c);
    for (std::size_t j = 0; j < poisoned_tests.size(); ++j)
      p.asr.push_back(smoothed_hit_rate(model, poisoned_tests[j], targets[j], c));
    curve.points.push_back(std::move(p));
  }
  return curve;
}

TrainConfig default_finetune(const TrainConfig& training) {
  TrainConfig ft = training;
  ft.epochs = 20;
  ft.learning_rate = training.learning_rate / 10.0;
  return ft;
}

GraphDataset draw_clean_subset(const GraphDataset& train, double fraction, std::uint64_t seed) {
  if (train.empty()) throw EmptyInputError("draw_clean_subset: empty train set");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("clean_fraction must lie in (0, 1]");
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size()))));
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, "fp-clean-subset");
  for (std::size_t i = 0; i < want; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return train.subset(idx);
}

std::vector<std::size_t> prune_order(const TrainedModel& model, const GraphDataset& data, int layer) {
  const auto act = mean_activations(model, data, layer);
  std::vector<std::size_t> order(act.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return act[a] < act[b]; });
  return order;
}

std::size_t prune_count(double ratio, int hidden_dim) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ArgumentError("prune_ratio must lie in [0, 1]");
  return static_cast<std::size_t>(std::llround(ratio * hidden_dim));
}

PruneResult prune_model(const TrainedModel& model, const GraphDataset& clean_subset, double ratio,
                        bool all_hidden_layers) {
  PruneResult out{model, {}, {}};
  const int layers = model.config.num_layers;
  out.pruned_units.resize(static_cast<std::size_t>(layers));
  const std::size_t count = prune_count(ratio, model.config.hidden_dim);
  if (count == 0) return out;
  if (count == static_cast<std::size_t>(model.config.hidden_dim))
    out.warnings.push_back("all hidden units pruned; the model output is constant");
  const int first = all_hidden_layers ? 0 : layers - 1;
  // Rankings come from the unpruned model so they do not depend on layer order.
  for (int l = first; l < layers; ++l) {
    auto order = prune_order(model, clean_subset, l);
    order.resize(count);
    std::sort(order.begin(), order.end());
    for (std::size_t u : order) zero_hidden_unit(out.model, l, u);
    out.pruned_units[static_cast<std::size_t>(l)] = std::move(order);
  }
  return out;
}

PruneResult fine_prune(const TrainedModel& model, const GraphDataset& clean_subset,
                       const PruneConfig& cfg) {
  prune_count(cfg.prune_ratio, model.config.hidden_dim);
  const TrainedModel tuned =
      cfg.finetune.epochs > 0 ? train(model, clean_subset, cfg.finetune) : model;
  return prune_model(tuned, clean_subset, cfg.prune_ratio, cfg.all_hidden_layers);
}

namespace {

double accuracy(const TrainedModel& m, const GraphDataset& ds) {
  const auto pred = predict_all(m, ds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += pred[i] == ds[i].label();
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

double hit_rate(const TrainedModel& m, const GraphDataset& ds, int target) {
  const auto pred = predict_all(m, ds);
  return static_cast<double>(std::count(pred.begin(), pred.end(), target)) /
         static_cast<double>(ds.size());
}

}  // namespace

DefenseCurve fp_curve(const TrainedModel& model, const GraphDataset& clean_subset,
                      const GraphDataset& clean_test, const std::vector<GraphDataset>& poisoned_tests,
                      const std::vector<int>& targets, const std::vector<double>& ratios,
                      const PruneConfig& cfg) {
  if (poisoned_tests.size() != targets.size())
    throw ArgumentError("fp_curve: one target per poisoned test set required");
  if (clean_test.empty()) throw EmptyInputError("fp_curve: empty clean test set");
  const TrainedModel tuned =
      cfg.finetune.epochs > 0 ? train(model, clean_subset, cfg.finetune) : model;
  DefenseCurve curve{"fp", {}};
  for (double r : ratios) {
    const auto pruned = prune_model(tuned, clean_subset, r, cfg.all_hidden_layers);
    DefensePoint p;
    p.knob = r;
    p.clean_accuracy = accuracy(pruned.model, clean_test);
    for (std::size_t j = 0; j < poisoned_tests.size(); ++j) {
      if (poisoned_tests[j].empty()) throw EmptyInputError("fp_curve: empty poisoned test set");
      p.asr.push_back(hit_rate(pruned.model, poisoned_tests[j], targets[j]));
    }
    curve.points.push_back(std::move(p));
  }
  return curve;
}

std::string curve_to_csv(const DefenseCurve& curve) {
  std::ostringstream out;
  out.precision(10);
  const std::size_t m = curve.points.empty() ? 0 : curve.points.front().asr.size();
  out << "defense,knob,CA";
  for (std::size_t j = 0; j < m; ++j) out << ",ASR_" << j + 1;
  out << "\n";
  for (const auto& p : curve.points) {
    out << curve.defense << "," << p.knob << "," << p.clean_accuracy;
    for (double a : p.asr) out << "," << a;
    out << "\n";
  }
  return out.str();
}

}  // namespace mtgb
