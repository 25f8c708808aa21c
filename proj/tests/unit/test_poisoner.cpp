#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mtgb/error.hpp"
#include "mtgb/poisoner.hpp"
#include "test_support.hpp"

namespace mtgb {
namespace {

// `per_class` graphs in each of `classes` classes, ~10 nodes each.
GraphDataset balanced(int classes, std::size_t per_class, std::uint64_t seed, std::size_t d = 2) {
  Rng rng(seed);
  std::vector<Graph> gs;
  for (int y = 0; y < classes; ++y)
    for (std::size_t i = 0; i < per_class; ++i)
      gs.push_back(testing::random_graph(rng, 6 + uniform_index(rng, 8), 0.3, d, y));
  return GraphDataset(std::move(gs), classes, d, FeatureKind::intrinsic);
}

Trigger make_trigger(int target, int id, std::size_t n = 4, std::size_t d = 2) {
  std::vector<Edge> e;
  for (NodeId v = 1; v < n; ++v) e.push_back({v - 1, v});
  Matrix x(n, d, 0.5 + id);
  return Trigger{target, id, Graph(n, e, x, 0), 0};
}

std::vector<Trigger> triggers_for(std::initializer_list<int> targets) {
  std::vector<Trigger> ts;
  int id = 0;
  for (int t : targets) ts.push_back(make_trigger(t, id++));
  return ts;
}

TEST(HostsPerClass, FloorWithRepresentationGuard) {
  EXPECT_EQ(hosts_per_class(0.05, 100), 5u);
  EXPECT_EQ(hosts_per_class(0.05, 240), 12u);
  EXPECT_EQ(hosts_per_class(0.05, 19), 0u);
  EXPECT_EQ(hosts_per_class(0.3, 10), 3u);  // 0.3 * 10 is 2.9999999999999996
}

TEST(SelectHosts, ArithmeticExample) {
  const GraphDataset train = balanced(4, 100, 1);
  const auto sel = select_hosts(train, triggers_for({0, 1, 2}), 0.05, 9);
  std::size_t total = 0;
  for (const auto& h : sel.host_indices) {
    EXPECT_EQ(h.size(), 15u);
    total += h.size();
  }
  EXPECT_EQ(total, 45u);
}

TEST(SelectHostsProperty, PerClassCountsDisjointAndNoTargetClass) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GraphDataset train = balanced(4, 40 + seed, seed);
    const auto ts = triggers_for({3, 0, 1});
    const double r = 0.05 + 0.02 * static_cast<double>(seed);
    const auto sel = select_hosts(train, ts, r, seed);
    std::set<std::size_t> seen;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      std::vector<std::size_t> per_class(4, 0);
      for (std::size_t h : sel.host_indices[j]) {
        EXPECT_TRUE(seen.insert(h).second);
        ++per_class[static_cast<std::size_t>(train[h].label())];
      }
      for (int y = 0; y < 4; ++y) {
        const std::size_t want =
            y == ts[j].target_class ? 0 : static_cast<std::size_t>(std::floor(r * (40.0 + seed) + 1e-9));
        EXPECT_EQ(per_class[static_cast<std::size_t>(y)], want);
      }
    }
  }
}

TEST(SelectHosts, OversubscriptionNamesClass) {
  const GraphDataset train = balanced(10, 10, 2);
  try {
    select_hosts(train, triggers_for({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.3, 1);
    FAIL() << "expected OversubscriptionError";
  } catch (const OversubscriptionError& e) {
    EXPECT_GE(e.exhausted_class(), 0);
    EXPECT_LT(e.exhausted_class(), 10);
  }
}

TEST(SelectHosts, SameSeedSameHosts) {
  const GraphDataset train = balanced(3, 50, 3);
  EXPECT_EQ(select_hosts(train, triggers_for({0, 1}), 0.1, 5).host_indices,
            select_hosts(train, triggers_for({0, 1}), 0.1, 5).host_indices);
}

TEST(SelectHosts, TinyRatioWarnsOfEmptyTarget) {
  const GraphDataset train = balanced(3, 10, 4);
  const auto sel = select_hosts(train, triggers_for({0}), 0.05, 1);
  EXPECT_TRUE(sel.host_indices[0].empty());
  EXPECT_EQ(sel.warnings.size(), 1u);
}

Graph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (NodeId v = 1; v <= leaves; ++v) e.push_back({0, v});
  return Graph(leaves + 1, e, Matrix(leaves + 1, 2, 1.0), 0);
}

TEST(ChooseInjectionNode, StarDegreeStrategies) {
  Rng rng(1);
  const Trigger t = make_trigger(0, 0);
  EXPECT_EQ(choose_injection_node(star(5), t, InjectionStrategy::highest_degree, rng), 0u);
  EXPECT_EQ(choose_injection_node(star(5), t, InjectionStrategy::lowest_degree, rng), 1u);
}

TEST(ChooseInjectionNode, CosineExample) {
  // Cosines against (1, 0): 1, 0 and 1/sqrt(2).
  const double s = 1.0 / std::sqrt(2.0);
  const Graph g(3, {{0, 1}, {1, 2}}, Matrix(3, 2, std::vector<double>{1, 0, 0, 1, s, s}), 0);
  Matrix tx(2, 2, std::vector<double>{2, 0, 0, 0});  // mean row (1, 0)
  const Trigger t{0, 0, Graph(2, {{0, 1}}, tx, 0), 0};
  Rng rng(1);
  EXPECT_EQ(choose_injection_node(g, t, InjectionStrategy::highest_similarity, rng), 0u);
  EXPECT_EQ(choose_injection_node(g, t, InjectionStrategy::lowest_similarity, rng), 1u);
  EXPECT_NEAR(cosine_similarity(g.features().row(2), std::vector<double>{1, 0}), s, 1e-15);
}

TEST(CosineSimilarity, ZeroNormIsZero) {
  EXPECT_EQ(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2}), 0.0);
}

TEST(ChooseInjectionNode, RandomIsUniformOverNodes) {
  Rng rng(3);
  const Graph g = star(3);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 4000; ++i) ++hits[choose_injection_node(g, make_trigger(0, 0), InjectionStrategy::random, rng)];
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

TEST(Inject, ConstructionArithmeticAndStructure) {
  Rng rng(5);
  const Graph g = testing::random_graph(rng, 9, 0.3, 2, 1);
  const Trigger t = make_trigger(0, 0, 5);
  InjectionOptions o;
  o.k = 2;
  const Graph out = inject(g, t, o, rng);
  EXPECT_EQ(out.num_nodes(), g.num_nodes() + 5);
  EXPECT_EQ(out.num_edges(), g.num_edges() + t.num_edges() + 2);
  EXPECT_EQ(out.label(), g.label());
  std::size_t bridges = 0;
  std::set<NodeId> anchors;
  for (const Edge& e : out.edges())
    if (e.u < 9 && e.v >= 9) {
      ++bridges;
      anchors.insert(e.u);
    }
  EXPECT_EQ(bridges, 2u);
  EXPECT_EQ(anchors.size(), 1u);
  EXPECT_EQ(strip_trigger(out, 9), g);
}

TEST(Inject, KClampedToTriggerSize) {
  Rng rng(6);
  InjectionOptions o;
  o.k = 50;
  const Graph out = inject(star(4), make_trigger(0, 0, 3), o, rng);
  EXPECT_EQ(out.num_edges(), 4u + 2u + 3u);
}

TEST(Inject, DistinctHostAnchors) {
  Rng rng(7);
  InjectionOptions o;
  o.k = 3;
  o.distinct_host_anchors = true;
  const Graph out = inject(star(6), make_trigger(0, 0, 4), o, rng);
  std::set<NodeId> anchors;
  for (const Edge& e : out.edges())
    if (e.u < 7 && e.v >= 7) anchors.insert(e.u);
  EXPECT_EQ(anchors.size(), 3u);
}

TEST(Inject, DegreeFeatureAnchorIncrements) {
  Rng rng(8);
  const GraphDataset ds = relabel_to_degree_features(GraphDataset({star(4)}, 1, 2, FeatureKind::intrinsic));
  std::vector<Edge> te{{0, 1}, {1, 2}};
  const Trigger t{0, 0, Graph(3, te, degree_features(3, te), 0), 0};
  InjectionOptions o;
  o.strategy = InjectionStrategy::highest_degree;
  const Graph out = inject(ds[0], t, o, rng, true);
  EXPECT_EQ(out.features()(0, 0), 5.0);
  EXPECT_EQ(out.features(), degree_features(out.num_nodes(), out.edges()));
  EXPECT_EQ(strip_trigger(out, 5, true), ds[0]);
}

TEST(ReplaceAttack, ArithmeticAndBoundaryEdgesKept) {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Graph g = testing::random_graph(rng, 8 + uniform_index(rng, 5), 0.4, 2);
    const Trigger trig = make_trigger(0, 0, 4);
    Rng a(static_cast<std::uint64_t>(t));
    const Graph out = replace_attack(g, trig, a);
    EXPECT_EQ(out.num_nodes(), g.num_nodes());
    // Recover the chosen set from the overwritten feature rows (0.5 marks).
    std::vector<bool> in(g.num_nodes(), false);
    std::size_t chosen = 0;
    for (NodeId v = 0; v < g.num_nodes(); ++v)
      if (out.features()(v, 0) == 0.5 && out.features()(v, 1) == 0.5) in[v] = true, ++chosen;
    ASSERT_EQ(chosen, 4u);
    std::size_t induced = 0;
    for (const Edge& e : g.edges()) induced += in[e.u] && in[e.v];
    EXPECT_EQ(out.num_edges(), g.num_edges() - induced + trig.num_edges());
  }
}

TEST(ReplaceAttack, FullReplacementEqualsTriggerTopology) {
  Rng rng(10);
  const Graph g = testing::random_graph(rng, 4, 0.5, 2);
  const Trigger trig = make_trigger(0, 0, 4);
  const Graph out = replace_attack(g, trig, rng);
  EXPECT_EQ(out.num_edges(), trig.num_edges());
}

TEST(ReplaceAttack, HostSmallerThanTrigger) {
  Rng rng(11);
  EXPECT_THROW(replace_attack(star(2), make_trigger(0, 0, 5), rng), ReplacementInfeasibleError);
}

TEST(BuildPoisoned, SyntheticTrainArithmetic) {
  const GraphDataset train = balanced(4, 240, 12);
  const PoisonPlan plan = make_plan(train, triggers_for({0, 1, 2}), 0.05, {}, 3);
  const PoisonedDataset p = build_poisoned_dataset(train, plan);
  EXPECT_EQ(p.dataset.size(), train.size());
  std::vector<std::size_t> per(3, 0);
  std::size_t clean = 0;
  for (std::size_t i = 0; i < p.origin.size(); ++i) {
    if (p.origin[i] == kCleanOrigin) {
      ++clean;
      EXPECT_EQ(p.dataset[i], train[i]);
    } else {
      ++per[static_cast<std::size_t>(p.origin[i])];
      EXPECT_EQ(p.dataset[i].label(), plan.triggers[static_cast<std::size_t>(p.origin[i])].target_class);
      EXPECT_EQ(p.dataset[i].num_nodes(), train[i].num_nodes() + 4);
    }
  }
  EXPECT_EQ(per, (std::vector<std::size_t>{36, 36, 36}));
  EXPECT_EQ(clean, 852u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(per[j], plan.host_indices[j].size());
}

TEST(BuildPoisoned, ZeroRatioIsIdentity) {
  const GraphDataset train = balanced(3, 20, 13);
  const PoisonedDataset p = build_poisoned_dataset(train, make_plan(train, triggers_for({0, 1}), 0.0, {}, 1));
  EXPECT_EQ(p.dataset, train);
}

TEST(PoisonTestSet, SizesAndExcludeFlag) {
  const GraphDataset test = balanced(3, 10, 14);
  const Trigger t = make_trigger(1, 0, 4);
  const GraphDataset p = poison_test_set(test, t, {}, 2);
  ASSERT_EQ(p.size(), test.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p[i].num_nodes(), test[i].num_nodes() + 4);
    EXPECT_EQ(p[i].label(), test[i].label());
  }
  EXPECT_EQ(poison_test_set(test, t, {}, 2, true).size(), 20u);
  EXPECT_EQ(poison_test_set(test, t, {}, 2), p);
  EXPECT_NE(poison_test_set(test, make_trigger(2, 1, 5), {}, 2), p);
}

TEST(PlanJson, RoundTrip) {
  const GraphDataset train = balanced(3, 40, 15);
  InjectionOptions o;
  o.k = 2;
  o.strategy = InjectionStrategy::lowest_similarity;
  o.mechanism = Mechanism::replacement;
  const PoisonPlan plan = make_plan(train, triggers_for({2, 0}), 0.1, o, 77);
  const PoisonPlan back = plan_from_json(plan_to_json(plan));
  EXPECT_EQ(back.host_indices, plan.host_indices);
  EXPECT_EQ(back.triggers, plan.triggers);
  EXPECT_EQ(back.injection.k, 2u);
  EXPECT_EQ(back.injection.strategy, InjectionStrategy::lowest_similarity);
  EXPECT_EQ(back.injection.mechanism, Mechanism::replacement);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(plan_to_json(back), plan_to_json(plan));
}

TEST(StrategyNames, RoundTrip) {
  for (auto s : {InjectionStrategy::random, InjectionStrategy::highest_degree, InjectionStrategy::lowest_degree,
                 InjectionStrategy::highest_similarity, InjectionStrategy::lowest_similarity})
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  EXPECT_THROW(strategy_from_string("middle"), ArgumentError);
  EXPECT_THROW(mechanism_from_string("swap"), ArgumentError);
}

}  // namespace
}  // namespace mtgb
