#include "mtgb/poisoner.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "mtgb/error.hpp"

namespace mtgb {

std::size_t hosts_per_class(double r, std::size_t class_count) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(class_count) + 1e-9));
}

HostSelection select_hosts(const GraphDataset& train, const std::vector<Trigger>& triggers,
                           double r, std::uint64_t seed) {
  if (!(r >= 0.0 && r < 1.0)) throw ArgumentError("poisoning ratio must lie in [0, 1)");
  HostSelection sel;
  sel.host_indices.resize(triggers.size());
  std::vector<bool> taken(train.size(), false);
  for (std::size_t j = 0; j < triggers.size(); ++j) {
    const int target = triggers[j].target_class;
    if (target < 0 || target >= train.num_classes())
      throw ArgumentError("trigger target class " + std::to_string(target) + " out of range");
    auto& hosts = sel.host_indices[j];
    for (int y = 0; y < train.num_classes(); ++y) {
      if (y == target) continue;
      const auto members = train.indices_of_class(y);
      const std::size_t want = hosts_per_class(r, members.size());
      if (want == 0) continue;
      std::vector<std::size_t> free;
      for (std::size_t i : members)
        if (!taken[i]) free.push_back(i);
      if (free.size() < want)
        throw OversubscriptionError(
            "host selection oversubscribed: class " + std::to_string(y) + " has " +
                std::to_string(free.size()) + " unpoisoned graphs left but trigger " +
                std::to_string(j) + " needs " + std::to_string(want),
            y);
      Rng rng = make_rng(seed, "hosts", {j, static_cast<std::uint64_t>(y)});
      for (std::size_t i = 0; i < want; ++i) {
        const std::size_t pick = i + uniform_index(rng, free.size() - i);
        std::swap(free[i], free[pick]);
        taken[free[i]] = true;
        hosts.push_back(free[i]);
      }
    }
    std::sort(hosts.begin(), hosts.end());
    if (hosts.empty())
      sel.warnings.push_back("trigger " + std::to_string(j) + " (target " +
                             std::to_string(target) + ") received no host graphs");
  }
  return sel;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<double> mean_row(const Matrix& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m[c] += x(r, c);
  for (double& v : m) v /= static_cast<double>(x.rows());
  return m;
}

// Per-node score for the deterministic strategies; larger is preferred.
std::vector<double> node_scores(const Graph& g, const Trigger& trig, InjectionStrategy s) {
  std::vector<double> score(g.num_nodes());
  const auto tmean = mean_row(trig.graph.features());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    switch (s) {
      case InjectionStrategy::highest_degree: score[v] = static_cast<double>(g.degree(v)); break;
      case InjectionStrategy::lowest_degree: score[v] = -static_cast<double>(g.degree(v)); break;
      case InjectionStrategy::highest_similarity:
        score[v] = cosine_similarity(g.features().row(v), tmean);
        break;
      case InjectionStrategy::lowest_similarity:
        score[v] = -cosine_similarity(g.features().row(v), tmean);
        break;
      case InjectionStrategy::random: break;
    }
  }
  return score;
}

// Node ids ordered by strategy preference (ties: lowest index first).
std::vector<NodeId> ranked_nodes(const Graph& g, const Trigger& trig, InjectionStrategy s) {
  const auto score = node_scores(g, trig, s);
  std::vector<NodeId> order(g.num_nodes());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return score[a] > score[b]; });
  return order;
}

// First `count` entries of a partial Fisher-Yates shuffle of 0..n-1.
std::vector<NodeId> sample_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(ids[i], ids[i + uniform_index(rng, n - i)]);
  ids.resize(count);
  return ids;
}

}  // namespace

NodeId choose_injection_node(const Graph& g, const Trigger& trig, InjectionStrategy strategy,
                             Rng& rng) {
  if (strategy == InjectionStrategy::random)
    return static_cast<NodeId>(uniform_index(rng, g.num_nodes()));
  return ranked_nodes(g, trig, strategy).front();
}

Graph inject(const Graph& g, const Trigger& trig, const InjectionOptions& opts, Rng& rng,
             bool recompute_degrees) {
  if (opts.k < 1) throw ArgumentError("inject: k must be >= 1");
  if (trig.graph.feature_dim() != g.feature_dim())
    throw ShapeError("inject: trigger feature_dim differs from host");
  const std::size_t n = g.num_nodes();
  const std::size_t nt = trig.num_nodes();
  std::size_t k = std::min(opts.k, nt);

  std::vector<NodeId> anchors;
  if (opts.distinct_host_anchors) {
    k = std::min(k, n);
    if (opts.strategy == InjectionStrategy::random) {
      anchors = sample_distinct(n, k, rng);
    } else {
      anchors = ranked_nodes(g, trig, opts.strategy);
      anchors.resize(k);
    }
  } else {
    anchors.assign(k, choose_injection_node(g, trig, opts.strategy, rng));
  }
  const auto bridged = sample_distinct(nt, k, rng);

  std::vector<Edge> edges = g.edges();
  edges.reserve(edges.size() + trig.num_edges() + k);
  const auto offset = static_cast<NodeId>(n);
  for (const Edge& e : trig.graph.edges()) edges.push_back({e.u + offset, e.v + offset});
  for (std::size_t i = 0; i < k; ++i) edges.push_back({anchors[i], bridged[i] + offset});

  Matrix x(n + nt, g.feature_dim());
  std::copy(g.features().values().begin(), g.features().values().end(), x.values().begin());
  std::copy(trig.graph.features().values().begin(), trig.graph.features().values().end(),
            x.values().begin() + static_cast<std::ptrdiff_t>(n * g.feature_dim()));

  Graph out(n + nt, std::move(edges), std::move(x), g.label());
  if (!recompute_degrees) return out;
  Matrix refreshed = out.features();
  for (std::size_t i = 0; i < k; ++i) {
    refreshed(anchors[i], 0) = static_cast<double>(out.degree(anchors[i]));
    refreshed(bridged[i] + offset, 0) = static_cast<double>(out.degree(bridged[i] + offset));
  }
  return out.with_features(std::move(refreshed));
}

Graph replace_attack(const Graph& g, const Trigger& trig, Rng& rng, bool recompute_degrees) {
  const std::size_t n = g.num_nodes();
  const std::size_t nt = trig.num_nodes();
  if (n < nt)
    throw ReplacementInfeasibleError("replace_attack: host has " + std::to_string(n) +
                                     " nodes, trigger needs " + std::to_string(nt));
  if (trig.graph.feature_dim() != g.feature_dim())
    throw ShapeError("replace_attack: trigger feature_dim differs from host");
  const auto chosen = sample_distinct(n, nt, rng);
  std::vector<bool> in_set(n, false);
  for (NodeId v : chosen) in_set[v] = true;

  std::vector<Edge> edges;
  for (const Edge& e : g.edges())
    if (!(in_set[e.u] && in_set[e.v])) edges.push_back(e);
  for (const Edge& e : trig.graph.edges()) edges.push_back(make_edge(chosen[e.u], chosen[e.v]));

  Matrix x = g.features();
  for (std::size_t t = 0; t < nt; ++t) {
    const auto src = trig.graph.features().row(t);
    std::copy(src.begin(), src.end(), x.row(chosen[t]).begin());
  }
  Graph out(n, std::move(edges), std::move(x), g.label());
  if (!recompute_degrees) return out;
  return out.with_features(degree_features(out.num_nodes(), out.edges()));
}

Graph apply_trigger(const Graph& g, const Trigger& trig, const InjectionOptions& opts, Rng& rng,
                    bool recompute_degrees) {
  return opts.mechanism == Mechanism::injection ? inject(g, trig, opts, rng, recompute_degrees)
                                                : replace_attack(g, trig, rng, recompute_degrees);
}

PoisonPlan make_plan(const GraphDataset& train, std::vector<Trigger> triggers, double r,
                     const InjectionOptions& opts, std::uint64_t seed) {
  PoisonPlan plan;
  auto sel = select_hosts(train, triggers, r, seed);
  plan.triggers = std::move(triggers);
  plan.poisoning_ratio = r;
  plan.injection = opts;
  plan.host_indices = std::move(sel.host_indices);
  plan.warnings = std::move(sel.warnings);
  plan.seed = seed;
  return plan;
}

PoisonedDataset build_poisoned_dataset(const GraphDataset& train, const PoisonPlan& plan) {
  if (plan.host_indices.size() != plan.triggers.size())
    throw ArgumentError("plan has " + std::to_string(plan.host_indices.size()) +
                        " host lists for " + std::to_string(plan.triggers.size()) + " triggers");
  const bool degree = train.feature_kind() == FeatureKind::degree;
  std::vector<Graph> graphs = train.graphs();
  std::vector<int> origin(train.size(), kCleanOrigin);
  for (std::size_t j = 0; j < plan.triggers.size(); ++j) {
    const Trigger& trig = plan.triggers[j];
    for (std::size_t h : plan.host_indices[j]) {
      if (h >= train.size()) throw IndexError("plan host index out of range");
      if (origin[h] != kCleanOrigin)
        throw ArgumentError("plan poisons train graph " + std::to_string(h) + " twice");
      if (train[h].label() == trig.target_class)
        throw ArgumentError("plan poisons a graph already in the target class");
      Rng rng = make_rng(plan.seed, "inject", {j, h});
      graphs[h] = apply_trigger(train[h], trig, plan.injection, rng, degree)
                      .with_label(trig.target_class);
      origin[h] = static_cast<int>(j);
    }
  }
  return {train.with_graphs(std::move(graphs)), plan, std::move(origin)};
}

GraphDataset poison_test_set(const GraphDataset& test, const Trigger& trig,
                             const InjectionOptions& opts, std::uint64_t seed,
                             bool exclude_target_class) {
  const bool degree = test.feature_kind() == FeatureKind::degree;
  std::vector<Graph> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (exclude_target_class && test[i].label() == trig.target_class) continue;
    Rng rng = make_rng(seed, "test-inject", {static_cast<std::uint64_t>(trig.trigger_id), i});
    out.push_back(apply_trigger(test[i], trig, opts, rng, degree));
  }
  return test.with_graphs(std::move(out));
}

Graph strip_trigger(const Graph& g, std::size_t host_nodes, bool recompute_degrees) {
  if (host_nodes == 0 || host_nodes > g.num_nodes())
    throw ArgumentError("strip_trigger: bad host node count");
  std::vector<Edge> edges;
  for (const Edge& e : g.edges())
    if (e.v < host_nodes) edges.push_back(e);
  Matrix x(host_nodes, g.feature_dim());
  std::copy_n(g.features().values().begin(), host_nodes * g.feature_dim(), x.values().begin());
  if (recompute_degrees) x = degree_features(host_nodes, edges);
  return Graph(host_nodes, std::move(edges), std::move(x), g.label());
}

const char* to_string(InjectionStrategy s) {
  switch (s) {
    case InjectionStrategy::random: return "random";
    case InjectionStrategy::highest_degree: return "highest_degree";
    case InjectionStrategy::lowest_degree: return "lowest_degree";
    case InjectionStrategy::highest_similarity: return "highest_similarity";
    case InjectionStrategy::lowest_similarity: return "lowest_similarity";
  }
  return "?";
}

const char* to_string(Mechanism m) {
  return m == Mechanism::injection ? "injection" : "replacement";
}

InjectionStrategy strategy_from_string(const std::string& s) {
  for (auto v : {InjectionStrategy::random, InjectionStrategy::highest_degree,
                 InjectionStrategy::lowest_degree, InjectionStrategy::highest_similarity,
                 InjectionStrategy::lowest_similarity})
    if (s == to_string(v)) return v;
  throw ArgumentError("unknown injection strategy '" + s + "'");
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "injection") return Mechanism::injection;
  if (s == "replacement") return Mechanism::replacement;
  throw ArgumentError("unknown mechanism '" + s + "'");
}

std::string plan_to_json(const PoisonPlan& plan) {
  nlohmann::json j;
  j["triggers"] = nlohmann::json::parse(triggers_to_json(plan.triggers));
  j["poisoning_ratio"] = plan.poisoning_ratio;
  j["k"] = plan.injection.k;
  j["strategy"] = to_string(plan.injection.strategy);
  j["mechanism"] = to_string(plan.injection.mechanism);
  j["distinct_host_anchors"] = plan.injection.distinct_host_anchors;
  j["host_indices"] = plan.host_indices;
  j["seed"] = plan.seed;
  j["warnings"] = plan.warnings;
  return j.dump(2);
}

PoisonPlan plan_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PoisonPlan plan;
  for (const auto& t : j.at("triggers")) plan.triggers.push_back(trigger_from_json(t.dump()));
  plan.poisoning_ratio = j.at("poisoning_ratio").get<double>();
  plan.injection.k = j.at("k").get<std::size_t>();
  plan.injection.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  plan.injection.mechanism = mechanism_from_string(j.at("mechanism").get<std::string>());
  plan.injection.distinct_host_anchors = j.value("distinct_host_anchors", false);
  plan.host_indices = j.at("host_indices").get<std::vector<std::vector<std::size_t>>>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.warnings = j.value("warnings", std::vector<std::string>{});
  return plan;
}

}  // namespace mtgb
