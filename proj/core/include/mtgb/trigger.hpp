#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtgb/graph.hpp"

namespace mtgb {

enum class TriggerFeatureMode { uniform_random, degree };

struct TriggerSpec {
  // Trigger node count as a fraction of the dataset's average node count.
  double size_fraction = 0.2;
  // rho = 2e / (n (n - 1)).
  double edge_density = 0.8;
  TriggerFeatureMode feature_mode = TriggerFeatureMode::uniform_random;
  // Explicit U(x_min, x_max) range; unset means the dataset's feature range.
  std::optional<double> x_min;
  std::optional<double> x_max;
  // Draw each column from that column's own dataset range instead of the
  // global one.
  bool per_column_range = false;
  std::uint64_t seed = 0;
};

inline constexpr const char* kErVariant = "gnm";
inline constexpr int kDistinctRetries = 64;

struct Trigger {
  int target_class = 0;
  int trigger_id = 0;
  Graph graph;  // label field unused
  std::uint64_t seed = 0;

  std::size_t num_nodes() const noexcept { return graph.num_nodes(); }
  std::size_t num_edges() const noexcept { return graph.num_edges(); }
  bool operator==(const Trigger&) const = default;
};

// max(2, round(size_fraction * avg_nodes)).
std::size_t resolve_node_count(const TriggerSpec& spec, const DatasetStats& stats);

// round(rho * n (n - 1) / 2).
std::size_t trigger_edge_count(std::size_t n, double density);

// Erdos-Renyi G(n, m) trigger with exactly trigger_edge_count(n, rho) edges
// drawn uniformly without replacement. `attempt` selects an alternative RNG
// substream (used by generate_trigger_family retries).
Trigger generate_trigger(const TriggerSpec& spec, const DatasetStats& stats, int target, int id,
                         int attempt = 0);

// One trigger per target, pairwise distinct canonical edge lists. Throws
// DistinctnessError when kDistinctRetries attempts fail for some trigger.
std::vector<Trigger> generate_trigger_family(const TriggerSpec& spec, const DatasetStats& stats,
                                             const std::vector<int>& targets);

std::string trigger_to_json(const Trigger& t);
Trigger trigger_from_json(const std::string& json);
std::string triggers_to_json(const std::vector<Trigger>& ts);

}  // namespace mtgb
