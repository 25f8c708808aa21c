#include "mtgb/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

namespace mtgb {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix features, int label)
    : num_nodes_(num_nodes), edges_(std::move(edges)), features_(std::move(features)), label_(label) {
  if (num_nodes_ == 0) throw ArgumentError("graph must have at least one node");
  if (features_.rows() != num_nodes_)
    throw ArgumentError("feature rows (" + std::to_string(features_.rows()) +
                        ") != num_nodes (" + std::to_string(num_nodes_) + ")");
  if (label_ < 0) throw ArgumentError("negative label");
  for (Edge& e : edges_) {
    if (e.u >= num_nodes_ || e.v >= num_nodes_)
      throw IndexError("edge endpoint out of range");
    if (e.u == e.v) throw ArgumentError("self-loop on node " + std::to_string(e.u));
    e = make_edge(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
    throw ArgumentError("duplicate edge");
  build_adjacency();
}

void Graph::build_adjacency() {
  offsets_.assign(num_nodes_ + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
  }
  for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.resize(edges_.size() * 2);
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) adjacency_[cursor[e.v]++] = e.u;
  for (const Edge& e : edges_) adjacency_[cursor[e.u]++] = e.v;
  for (std::size_t i = 0; i < num_nodes_; ++i)
    std::sort(adjacency_.begin() + offsets_[i], adjacency_.begin() + offsets_[i + 1]);
}

std::size_t Graph::degree(NodeId v) const {
  if (v >= num_nodes_)
    throw IndexError("node " + std::to_string(v) + " out of range for graph with " +
                     std::to_string(num_nodes_) + " nodes");
  return offsets_[v + 1] - offsets_[v];
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  if (v >= num_nodes_) throw IndexError("node out of range");
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

Graph Graph::with_label(int label) const {
  Graph g = *this;
  if (label < 0) throw ArgumentError("negative label");
  g.label_ = label;
  return g;
}

Graph Graph::with_features(Matrix features) const {
  if (features.rows() != num_nodes_) throw ArgumentError("feature rows != num_nodes");
  Graph g = *this;
  g.features_ = std::move(features);
  return g;
}

std::size_t degree(const Graph& g, NodeId v) { return g.degree(v); }

Matrix degree_features(std::size_t num_nodes, std::span<const Edge> edges) {
  Matrix m(num_nodes, 1);
  for (const Edge& e : edges) {
    m(e.u, 0) += 1.0;
    m(e.v, 0) += 1.0;
  }
  return m;
}

GraphDataset::GraphDataset(std::vector<Graph> graphs, int num_classes, std::size_t feature_dim,
                           FeatureKind kind, DatasetMeta meta)
    : graphs_(std::move(graphs)),
      num_classes_(num_classes),
      feature_dim_(feature_dim),
      kind_(kind),
      meta_(std::move(meta)) {
  if (num_classes_ < 1) throw ArgumentError("dataset needs at least one class");
  if (kind_ == FeatureKind::degree && feature_dim_ != 1)
    throw ShapeError("degree-feature datasets have feature_dim 1");
  for (std::size_t i = 0; i < graphs_.size(); ++i) {
    const Graph& g = graphs_[i];
    if (g.feature_dim() != feature_dim_)
      throw ShapeError("graph " + std::to_string(i) + " has feature_dim " +
                       std::to_string(g.feature_dim()) + ", dataset expects " +
                       std::to_string(feature_dim_));
    if (g.label() >= num_classes_)
      throw ArgumentError("graph " + std::to_string(i) + " label out of range");
  }
}

GraphDataset GraphDataset::with_graphs(std::vector<Graph> graphs) const {
  return GraphDataset(std::move(graphs), num_classes_, feature_dim_, kind_, meta_);
}

std::vector<std::size_t> GraphDataset::indices_of_class(int y) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < graphs_.size(); ++i)
    if (graphs_[i].label() == y) out.push_back(i);
  return out;
}

GraphDataset GraphDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Graph> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= graphs_.size()) throw IndexError("subset index out of range");
    out.push_back(graphs_[i]);
  }
  return with_graphs(std::move(out));
}

namespace {

void absorb_features(DatasetStats& s, const Graph& g) {
  const Matrix& x = g.features();
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double v = x(r, c);
      s.column_min[c] = std::min(s.column_min[c], v);
      s.column_max[c] = std::max(s.column_max[c], v);
      s.feature_min = std::min(s.feature_min, v);
      s.feature_max = std::max(s.feature_max, v);
    }
}

}  // namespace

DatasetStats compute_stats(const GraphDataset& ds) {
  if (ds.empty()) throw EmptyInputError("compute_stats: empty dataset");
  DatasetStats s;
  s.feature_dim = ds.feature_dim();
  s.num_classes = ds.num_classes();
  s.feature_kind = ds.feature_kind();
  s.class_counts.assign(static_cast<std::size_t>(ds.num_classes()), 0);
  s.feature_min = std::numeric_limits<double>::infinity();
  s.feature_max = -std::numeric_limits<double>::infinity();
  s.column_min.assign(ds.feature_dim(), std::numeric_limits<double>::infinity());
  s.column_max.assign(ds.feature_dim(), -std::numeric_limits<double>::infinity());
  for (const Graph& g : ds.graphs()) {
    s.total_nodes += g.num_nodes();
    s.total_edges += g.num_edges();
    ++s.class_counts[static_cast<std::size_t>(g.label())];
    absorb_features(s, g);
  }
  s.num_graphs = ds.size();
  s.avg_nodes = static_cast<double>(s.total_nodes) / static_cast<double>(s.num_graphs);
  s.avg_edges = static_cast<double>(s.total_edges) / static_cast<double>(s.num_graphs);
  return s;
}

DatasetStats add_graph(const DatasetStats& stats, const Graph& g) {
  if (g.feature_dim() != stats.feature_dim) throw ShapeError("add_graph: feature_dim mismatch");
  if (g.label() >= stats.num_classes) throw ArgumentError("add_graph: label out of range");
  DatasetStats s = stats;
  s.total_nodes += g.num_nodes();
  s.total_edges += g.num_edges();
  ++s.num_graphs;
  ++s.class_counts[static_cast<std::size_t>(g.label())];
  absorb_features(s, g);
  s.avg_nodes = static_cast<double>(s.total_nodes) / static_cast<double>(s.num_graphs);
  s.avg_edges = static_cast<double>(s.total_edges) / static_cast<double>(s.num_graphs);
  return s;
}

GraphDataset relabel_to_degree_features(const GraphDataset& ds) {
  std::vector<Graph> out;
  out.reserve(ds.size());
  for (const Graph& g : ds.graphs())
    out.push_back(g.with_features(degree_features(g.num_nodes(), g.edges())));
  DatasetMeta meta = ds.meta();
  meta.feature_source = FeatureSource::degree;
  return GraphDataset(std::move(out), ds.num_classes(), 1, FeatureKind::degree, std::move(meta));
}

std::uint64_t hash_dataset(const GraphDataset& ds) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(ds.num_classes()) * 31 + ds.feature_dim());
  auto feed = [&h](std::uint64_t x) { h = mix64(h ^ x); };
  feed(static_cast<std::uint64_t>(ds.feature_kind()));
  for (const Graph& g : ds.graphs()) {
    feed(g.num_nodes());
    feed(static_cast<std::uint64_t>(g.label()));
    for (const Edge& e : g.edges()) feed((static_cast<std::uint64_t>(e.u) << 32) | e.v);
    for (double v : g.features().values()) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace mtgb
