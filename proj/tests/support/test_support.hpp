#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "mtgb/graph.hpp"
#include "mtgb/rng.hpp"

namespace mtgb::testing {

// G(n, p) with Gaussian features.
inline Graph random_graph(Rng& rng, std::size_t n, double p, std::size_t d, int label = 0) {
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> feat;
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (coin(rng)) edges.push_back({u, v});
  Matrix x(n, d);
  for (double& v : x.values()) v = feat(rng);
  return Graph(n, std::move(edges), std::move(x), label);
}

// Every class gets at least one graph so label spaces survive a round trip.
inline GraphDataset random_dataset(Rng& rng, std::size_t graphs, int classes, std::size_t d,
                                   std::size_t min_nodes = 1, std::size_t max_nodes = 12) {
  std::uniform_int_distribution<std::size_t> nodes(min_nodes, max_nodes);
  std::uniform_real_distribution<double> dens(0.0, 0.7);
  std::vector<Graph> gs;
  for (std::size_t i = 0; i < graphs; ++i) {
    const int y = i < static_cast<std::size_t>(classes) ? static_cast<int>(i)
                                                        : static_cast<int>(uniform_index(rng, classes));
    gs.push_back(random_graph(rng, nodes(rng), dens(rng), d, y));
  }
  return GraphDataset(std::move(gs), classes, d, FeatureKind::intrinsic);
}

inline std::filesystem::path source_dir() { return MTGB_TEST_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "fixtures"; }
inline std::filesystem::path golden_dir() { return source_dir() / "golden"; }

}  // namespace mtgb::testing
