#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtgb/matrix.hpp"

namespace mtgb {

using NodeId = std::uint32_t;

// Undirected edge stored canonically with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(NodeId a, NodeId b) noexcept { return a < b ? Edge{a, b} : Edge{b, a}; }

// One classification sample: simple undirected graph, dense node features and
// a class label. Immutable after construction; edges are kept sorted.
class Graph {
 public:
  Graph() = default;

  // Validates and canonicalizes. Throws IndexError on out-of-range endpoints,
  // ArgumentError on self-loops, duplicate edges, zero nodes or a feature row
  // count that differs from num_nodes.
  Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix features, int label);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& features() const noexcept { return features_; }
  int label() const noexcept { return label_; }

  // Throws IndexError if v >= num_nodes.
  std::size_t degree(NodeId v) const;
  std::span<const NodeId> neighbors(NodeId v) const;

  Graph with_label(int label) const;
  Graph with_features(Matrix features) const;

  bool operator==(const Graph& o) const {
    return num_nodes_ == o.num_nodes_ && label_ == o.label_ && edges_ == o.edges_ &&
           features_ == o.features_;
  }

 private:
  void build_adjacency();

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  int label_ = 0;
  // CSR adjacency, neighbors ascending.
  std::vector<std::uint32_t> offsets_;
  std::vector<NodeId> adjacency_;
};

std::size_t degree(const Graph& g, NodeId v);

// Node degrees as an n x 1 feature matrix.
Matrix degree_features(std::size_t num_nodes, std::span<const Edge> edges);

enum class FeatureKind { intrinsic, degree };

// Where intrinsic features came from when a dataset was parsed; serializers
// use it to reproduce the original files.
enum class FeatureSource { attributes, node_labels, degree, synthetic };

struct DatasetMeta {
  std::string name;
  FeatureSource feature_source = FeatureSource::synthetic;
  // Original graph-label values; class i was label_values[i]. Empty means
  // identity.
  std::vector<long long> label_values;
  // One-hot node-label encoding: feature column c = label node_label_min + c.
  long long node_label_min = 0;
  // Asymmetric pairs seen while parsing (recorded once each).
  std::size_t asymmetric_pairs = 0;
  std::size_t dropped_self_loops = 0;
};

// Ordered collection of graphs sharing a feature dimension and label space.
class GraphDataset {
 public:
  GraphDataset() = default;
  // Throws ArgumentError / ShapeError if the invariants do not hold.
  GraphDataset(std::vector<Graph> graphs, int num_classes, std::size_t feature_dim,
               FeatureKind kind, DatasetMeta meta = {});

  const std::vector<Graph>& graphs() const noexcept { return graphs_; }
  const Graph& operator[](std::size_t i) const { return graphs_[i]; }
  std::size_t size() const noexcept { return graphs_.size(); }
  bool empty() const noexcept { return graphs_.empty(); }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  FeatureKind feature_kind() const noexcept { return kind_; }
  const DatasetMeta& meta() const noexcept { return meta_; }

  // Same metadata, different graphs.
  GraphDataset with_graphs(std::vector<Graph> graphs) const;
  // Indices of graphs with label y, ascending.
  std::vector<std::size_t> indices_of_class(int y) const;
  GraphDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const GraphDataset& o) const {
    return num_classes_ == o.num_classes_ && feature_dim_ == o.feature_dim_ && kind_ == o.kind_ &&
           graphs_ == o.graphs_;
  }

 private:
  std::vector<Graph> graphs_;
  int num_classes_ = 0;
  std::size_t feature_dim_ = 0;
  FeatureKind kind_ = FeatureKind::intrinsic;
  DatasetMeta meta_;
};

struct DatasetStats {
  std::size_t num_graphs = 0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;
  std::size_t feature_dim = 0;
  int num_classes = 0;
  std::vector<std::size_t> class_counts;
  FeatureKind feature_kind = FeatureKind::intrinsic;
  // Global and per-column feature ranges over every node of every graph.
  double feature_min = 0.0;
  double feature_max = 0.0;
  std::vector<double> column_min;
  std::vector<double> column_max;
  // Running sums kept so that add_graph can update the averages exactly.
  std::size_t total_nodes = 0;
  std::size_t total_edges = 0;
};

// Throws EmptyInputError on an empty dataset.
DatasetStats compute_stats(const GraphDataset& ds);
// Incremental update equal to recomputing the stats with g appended.
DatasetStats add_graph(const DatasetStats& stats, const Graph& g);

GraphDataset relabel_to_degree_features(const GraphDataset& ds);

// Content hash over topology, features (bitwise) and labels.
std::uint64_t hash_dataset(const GraphDataset& ds);

}  // namespace mtgb
