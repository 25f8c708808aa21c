#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mtgb/gnn.hpp"
#include "test_support.hpp"

namespace mtgb::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  // Scalars whose one-sided differences disagree: a ReLU switches inside
  // [x - h, x + h], so the central difference is not a derivative there.
  std::size_t kinks = 0;
};

inline bool one_sided_disagree(double up, double base, double down) {
  const double fwd = up - base, bwd = base - down;
  return std::abs(fwd - bwd) > 1e-2 * std::max(std::abs(fwd), std::abs(bwd)) + 1e-13;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps gradients that are zero up
// to rounding from dominating.
inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Central differences of the batch loss against loss_and_grad for every
// parameter scalar.
inline GradCheckResult grad_check(const TrainedModel& model, const std::vector<Sample>& batch,
                                  double h = 1e-5) {
  const LossGrad lg = loss_and_grad(model, batch);
  const double base = lg.loss;
  GradCheckResult r;
  TrainedModel probe = model;
  for (std::size_t p = 0; p < probe.params.size(); ++p) {
    auto& values = probe.params[p].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = loss_and_grad(probe, batch).loss;
      values[i] = keep - h;
      const double down = loss_and_grad(probe, batch).loss;
      values[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double err = rel_error(lg.grads[p].values()[i], numeric);
      ++r.checked;
      r.kinks += one_sided_disagree(up, base, down);
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_param = probe.params.items()[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Model with every parameter (biases and eps included) drawn from N(0, 0.5^2)
// so that no gradient is trivially zero.
inline TrainedModel randomized_model(ModelConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  TrainedModel m = init_model(cfg);
  Rng rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& p : m.params.items())
    for (double& v : p.value.values()) v = n(rng);
  return m;
}

// Graphs with 5-10 nodes, d features, labels in [0, classes).
inline std::vector<Graph> small_graphs(std::uint64_t seed, std::size_t count, std::size_t d, int classes) {
  Rng rng(seed);
  std::vector<Graph> gs;
  for (std::size_t i = 0; i < count; ++i)
    gs.push_back(random_graph(rng, 5 + uniform_index(rng, 6), 0.4, d,
                              static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)))));
  return gs;
}

inline std::vector<Sample> samples_of(const std::vector<Graph>& gs) {
  std::vector<Sample> s;
  for (const Graph& g : gs) s.push_back({&g, g.label(), 1.0});
  return s;
}

}  // namespace mtgb::testing
