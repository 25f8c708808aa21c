#include "mtgb/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

namespace mtgb {

std::size_t resolve_node_count(const TriggerSpec& spec, const DatasetStats& stats) {
  const auto n = std::llround(spec.size_fraction * stats.avg_nodes);
  return static_cast<std::size_t>(std::max<long long>(2, n));
}

std::size_t trigger_edge_count(std::size_t n, double density) {
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double x = density * pairs;
  // Half-up on the decimal value: 0.3 * 5 must give 2 even though 0.3 is
  // stored slightly below 0.3.
  const double fl = std::floor(x);
  if (std::abs(x - (fl + 0.5)) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(fl) + 1;
  return static_cast<std::size_t>(std::llround(x));
}

Trigger generate_trigger(const TriggerSpec& spec, const DatasetStats& stats, int target, int id,
                         int attempt) {
  if (!(spec.size_fraction > 0.0)) throw ArgumentError("trigger size_fraction must be > 0");
  if (!(spec.edge_density > 0.0 && spec.edge_density <= 1.0))
    throw ArgumentError("trigger edge_density must lie in (0, 1]");
  const std::size_t n = resolve_node_count(spec, stats);
  const std::size_t m = trigger_edge_count(n, spec.edge_density);
  if (m == 0)
    throw DegenerateTriggerError("edge density " + std::to_string(spec.edge_density) +
                                 " gives 0 edges for a " + std::to_string(n) + "-node trigger");

  const std::uint64_t seed = derive_seed(spec.seed, "trigger",
                                         {static_cast<std::uint64_t>(id),
                                          static_cast<std::uint64_t>(attempt)});
  Rng rng(seed);

  // Partial Fisher-Yates over the n(n-1)/2 pair slots.
  std::vector<Edge> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b) pairs.push_back({a, b});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_index(rng, pairs.size() - i);
    std::swap(pairs[i], pairs[j]);
  }
  pairs.resize(m);

  Matrix x;
  const bool degree_mode = spec.feature_mode == TriggerFeatureMode::degree ||
                           stats.feature_kind == FeatureKind::degree;
  if (degree_mode) {
    if (stats.feature_dim != 1)
      throw ShapeError("degree-mode triggers need a feature_dim 1 dataset");
    x = degree_features(n, pairs);
  } else {
    x = Matrix(n, stats.feature_dim);
    for (std::size_t c = 0; c < stats.feature_dim; ++c) {
      double lo = spec.per_column_range ? stats.column_min[c] : stats.feature_min;
      double hi = spec.per_column_range ? stats.column_max[c] : stats.feature_max;
      if (spec.x_min) lo = *spec.x_min;
      if (spec.x_max) hi = *spec.x_max;
      if (hi < lo) throw ArgumentError("trigger feature range has x_max < x_min");
      std::uniform_real_distribution<double> dist(lo, hi);
      // Column-major draw keeps the per-column ranges independent.
      for (std::size_t v = 0; v < n; ++v) x(v, c) = hi > lo ? dist(rng) : lo;
    }
  }
  Trigger t;
  t.target_class = target;
  t.trigger_id = id;
  t.seed = seed;
  t.graph = Graph(n, std::move(pairs), std::move(x), 0);
  return t;
}

std::vector<Trigger> generate_trigger_family(const TriggerSpec& spec, const DatasetStats& stats,
                                             const std::vector<int>& targets) {
  if (std::set<int>(targets.begin(), targets.end()).size() != targets.size())
    throw ArgumentError("trigger targets must be distinct");
  std::vector<Trigger> out;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < kDistinctRetries && !placed; ++attempt) {
      Trigger t = generate_trigger(spec, stats, targets[j], static_cast<int>(j), attempt);
      const bool clash = std::any_of(out.begin(), out.end(), [&](const Trigger& o) {
        return o.graph.edges() == t.graph.edges();
      });
      if (!clash) {
        out.push_back(std::move(t));
        placed = true;
      }
    }
    if (!placed)
      throw DistinctnessError("could not generate a structurally distinct trigger for target " +
                              std::to_string(targets[j]) + " after " +
                              std::to_string(kDistinctRetries) + " attempts");
  }
  return out;
}

namespace {

nlohmann::json to_json_value(const Trigger& t) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : t.graph.edges()) edges.push_back({e.u, e.v});
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t r = 0; r < t.graph.num_nodes(); ++r) {
    const auto row = t.graph.features().row(r);
    features.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"target_class", t.target_class},
          {"trigger_id", t.trigger_id},
          {"num_nodes", t.graph.num_nodes()},
          {"edges", edges},
          {"features", features},
          {"seed", t.seed},
          {"er_variant", kErVariant}};
}

}  // namespace

std::string trigger_to_json(const Trigger& t) { return to_json_value(t).dump(2); }

std::string triggers_to_json(const std::vector<Trigger>& ts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Trigger& t : ts) arr.push_back(to_json_value(t));
  return arr.dump(2);
}

Trigger trigger_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto n = j.at("num_nodes").get<std::size_t>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>()});
  const auto& rows = j.at("features");
  if (rows.size() != n) throw ShapeError("trigger feature rows != num_nodes");
  const std::size_t d = n ? rows.at(0).size() : 0;
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != d) throw ShapeError("ragged trigger feature matrix");
    for (std::size_t c = 0; c < d; ++c) x(r, c) = rows[r][c].get<double>();
  }
  Trigger t;
  t.target_class = j.at("target_class").get<int>();
  t.trigger_id = j.at("trigger_id").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.graph = Graph(n, std::move(edges), std::move(x), 0);
  return t;
}

}  // namespace mtgb
