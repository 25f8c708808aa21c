#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtgb/graph.hpp"

namespace mtgb {

// Raw contents of one TUDataset bundle (<name>_A.txt, <name>_graph_indicator.txt, ...).
struct TuBundle {
  std::string name;
  std::string adjacency;
  std::string graph_indicator;
  std::string graph_labels;
  std::optional<std::string> node_labels;
  std::optional<std::string> node_attributes;
};

// Reads <dir>/<name>_*.txt. Missing required files raise ParseError with line 0.
TuBundle read_tu_bundle(const std::filesystem::path& dir, const std::string& name);

// Parses a bundle. Each directed pair of the adjacency file collapses into one
// undirected edge; graph labels are remapped to 0..c-1 in ascending order of
// the original values. Features come from node attributes if present, else a
// one-hot of node labels, else node degree.
//
// Throws ParseError naming the file and 1-based line for dangling node ids,
// non-contiguous graph ids, malformed lines and row-count mismatches.
GraphDataset parse_tu(const TuBundle& bundle);
GraphDataset parse_tu(const std::filesystem::path& dir, const std::string& name);

// Inverse of parse_tu: parse_tu(serialize_tu(ds, n)) reproduces ds.
TuBundle serialize_tu(const GraphDataset& ds, const std::string& name);
void write_tu(const TuBundle& bundle, const std::filesystem::path& dir);

struct SyntheticSpec {
  int classes = 4;
  int per_class = 300;
  int nodes_mean = 30;
  int feature_dim = 3;
  double class_sep = 1.5;
  std::uint64_t seed = 7;
};

// Two-block SBM topologies with class-dependent inter-block probability plus
// Gaussian node features around a class mean. Deterministic in spec.seed.
GraphDataset generate_synthetic(const SyntheticSpec& spec);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct Split {
  GraphDataset train;
  GraphDataset test;
  std::vector<std::size_t> train_indices;  // ascending, into the source dataset
  std::vector<std::size_t> test_indices;
};

// Disjoint and exhaustive. Stratified splits take round(fraction * |class|) of
// each class; a class with fewer than two graphs raises SplitError.
Split split(const GraphDataset& ds, const SplitSpec& spec);

}  // namespace mtgb
