#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtgb/graph.hpp"
#include "mtgb/rng.hpp"
#include "mtgb/trigger.hpp"

namespace mtgb {

enum class InjectionStrategy { random, highest_degree, lowest_degree, highest_similarity, lowest_similarity };

enum class Mechanism { injection, replacement };

// Origin tag per training graph: kCleanOrigin, or the index j of the trigger
// it was poisoned with.
inline constexpr int kCleanOrigin = -1;

struct InjectionOptions {
  std::size_t k = 1;
  InjectionStrategy strategy = InjectionStrategy::random;
  // Bridge from k distinct host nodes (each to one trigger node) instead of
  // fanning out from a single anchor.
  bool distinct_host_anchors = false;
  Mechanism mechanism = Mechanism::injection;
};

struct PoisonPlan {
  std::vector<Trigger> triggers;
  double poisoning_ratio = 0.05;
  InjectionOptions injection;
  // host_indices[j]: train-set indices poisoned with trigger j.
  std::vector<std::vector<std::size_t>> host_indices;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct PoisonedDataset {
  GraphDataset dataset;
  PoisonPlan plan;
  std::vector<int> origin;  // one tag per graph of `dataset`
};

struct HostSelection {
  std::vector<std::vector<std::size_t>> host_indices;
  std::vector<std::string> warnings;
};

// floor(r * count), guarded against representation error just below an
// integer.
std::size_t hosts_per_class(double r, std::size_t class_count);

// Samples floor(r * |class i|) graphs from each class i != target_j, per
// trigger in order, excluding graphs already picked for an earlier trigger.
// Throws OversubscriptionError when a class runs out.
HostSelection select_hosts(const GraphDataset& train, const std::vector<Trigger>& triggers,
                           double r, std::uint64_t seed);

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Ties go to the lowest node index.
NodeId choose_injection_node(const Graph& g, const Trigger& trig, InjectionStrategy strategy,
                             Rng& rng);

// Host nodes keep ids 0..n-1; trigger node t becomes n + t. Adds the trigger
// edges plus k bridge edges (k clamped to the trigger size). With
// `recompute_degrees` set, feature rows of every node whose degree changed are
// recomputed.
Graph inject(const Graph& g, const Trigger& trig, const InjectionOptions& opts, Rng& rng,
             bool recompute_degrees = false);

// Overwrites a uniformly chosen node set of the trigger's size: internal edges
// replaced by the trigger pattern, feature rows by the trigger's features.
// Boundary edges are kept. Throws ReplacementInfeasibleError when the host is
// smaller than the trigger.
Graph replace_attack(const Graph& g, const Trigger& trig, Rng& rng, bool recompute_degrees = false);

// Applies the plan's mechanism (inject or replace_attack) to one graph.
Graph apply_trigger(const Graph& g, const Trigger& trig, const InjectionOptions& opts, Rng& rng,
                    bool recompute_degrees);

// Validates and selects hosts; returns a plan ready for build_poisoned_dataset.
PoisonPlan make_plan(const GraphDataset& train, std::vector<Trigger> triggers, double r,
                     const InjectionOptions& opts, std::uint64_t seed);

// Hosts are replaced by their triggered versions relabelled to the target;
// every other graph is untouched. Size equals the clean train set.
PoisonedDataset build_poisoned_dataset(const GraphDataset& train, const PoisonPlan& plan);

// Injects `trig` into every test graph, labels unchanged. With
// exclude_target_class, graphs already labelled with the target are dropped.
GraphDataset poison_test_set(const GraphDataset& test, const Trigger& trig,
                             const InjectionOptions& opts, std::uint64_t seed,
                             bool exclude_target_class = false);

// Removes the trailing trigger block (nodes >= host_nodes) and every edge that
// touches it; degree features are recomputed when requested.
Graph strip_trigger(const Graph& g, std::size_t host_nodes, bool recompute_degrees = false);

std::string plan_to_json(const PoisonPlan& plan);
PoisonPlan plan_from_json(const std::string& json);

const char* to_string(InjectionStrategy s);
const char* to_string(Mechanism m);
InjectionStrategy strategy_from_string(const std::string& s);
Mechanism mechanism_from_string(const std::string& s);

}  // namespace mtgb
