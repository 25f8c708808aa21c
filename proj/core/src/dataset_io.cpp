#include "mtgb/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

namespace mtgb {
namespace {

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

// Splits into lines; trailing blank lines are dropped, any other blank line is
// an error.
std::vector<Line> split_lines(const std::string& file, std::string_view content) {
  std::vector<Line> lines;
  std::size_t start = 0, number = 1;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    lines.push_back({number++, trim(content.substr(start, end - start))});
    if (end == content.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().text.empty()) lines.pop_back();
  for (const Line& l : lines)
    if (l.text.empty()) throw ParseError(file, l.number, "blank line");
  return lines;
}

long long parse_int(const std::string& file, const Line& line, std::string_view field) {
  field = trim(field);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw ParseError(file, line.number, "expected integer, got '" + std::string(field) + "'");
  return v;
}

double parse_real(const std::string& file, const Line& line, std::string_view field) {
  field = trim(field);
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw ParseError(file, line.number, "expected real, got '" + std::string(field) + "'");
  return v;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t c = s.find(',', start);
    if (c == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, c - start));
    start = c + 1;
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p.filename().string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

TuBundle read_tu_bundle(const std::filesystem::path& dir, const std::string& name) {
  TuBundle b;
  b.name = name;
  b.adjacency = read_file(dir / (name + "_A.txt"));
  b.graph_indicator = read_file(dir / (name + "_graph_indicator.txt"));
  b.graph_labels = read_file(dir / (name + "_graph_labels.txt"));
  if (auto p = dir / (name + "_node_labels.txt"); std::filesystem::exists(p))
    b.node_labels = read_file(p);
  if (auto p = dir / (name + "_node_attributes.txt"); std::filesystem::exists(p))
    b.node_attributes = read_file(p);
  return b;
}

GraphDataset parse_tu(const std::filesystem::path& dir, const std::string& name) {
  return parse_tu(read_tu_bundle(dir, name));
}

GraphDataset parse_tu(const TuBundle& b) {
  const std::string f_a = b.name + "_A.txt";
  const std::string f_ind = b.name + "_graph_indicator.txt";
  const std::string f_gl = b.name + "_graph_labels.txt";
  const std::string f_nl = b.name + "_node_labels.txt";
  const std::string f_attr = b.name + "_node_attributes.txt";

  // Graph indicator: node i (1-based) belongs to graph id.
  const auto ind_lines = split_lines(f_ind, b.graph_indicator);
  const std::size_t num_nodes_total = ind_lines.size();
  if (num_nodes_total == 0) throw ParseError(f_ind, 0, "no nodes");
  std::vector<std::size_t> node_graph(num_nodes_total);
  std::vector<std::size_t> node_local(num_nodes_total);
  std::vector<std::size_t> graph_sizes;
  for (std::size_t i = 0; i < num_nodes_total; ++i) {
    const long long id = parse_int(f_ind, ind_lines[i], ind_lines[i].text);
    if (id < 1) throw ParseError(f_ind, ind_lines[i].number, "graph ids start at 1");
    const auto gid = static_cast<std::size_t>(id - 1);
    if (gid > graph_sizes.size())
      throw ParseError(f_ind, ind_lines[i].number,
                       "non-contiguous graph id " + std::to_string(id) + " (expected at most " +
                           std::to_string(graph_sizes.size() + 1) + ")");
    if (gid == graph_sizes.size()) graph_sizes.push_back(0);
    node_graph[i] = gid;
    node_local[i] = graph_sizes[gid]++;
  }
  const std::size_t num_graphs = graph_sizes.size();

  // Graph labels.
  const auto gl_lines = split_lines(f_gl, b.graph_labels);
  if (gl_lines.size() != num_graphs)
    throw ParseError(f_gl, gl_lines.size() < num_graphs ? 0 : gl_lines[num_graphs].number,
                     "expected " + std::to_string(num_graphs) + " graph labels, found " +
                         std::to_string(gl_lines.size()));
  std::vector<long long> raw_labels(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g)
    raw_labels[g] = parse_int(f_gl, gl_lines[g], gl_lines[g].text);
  std::vector<long long> label_values(raw_labels);
  std::sort(label_values.begin(), label_values.end());
  label_values.erase(std::unique(label_values.begin(), label_values.end()), label_values.end());

  // Adjacency.
  DatasetMeta meta;
  meta.name = b.name;
  std::vector<std::vector<Edge>> graph_edges(num_graphs);
  std::set<std::pair<std::size_t, std::size_t>> directed;
  for (const Line& line : split_lines(f_a, b.adjacency)) {
    const auto fields = split_commas(line.text);
    if (fields.size() != 2) throw ParseError(f_a, line.number, "expected 'a, b'");
    const long long a = parse_int(f_a, line, fields[0]);
    const long long c = parse_int(f_a, line, fields[1]);
    for (long long id : {a, c})
      if (id < 1 || static_cast<std::size_t>(id) > num_nodes_total)
        throw ParseError(f_a, line.number,
                         "dangling node id " + std::to_string(id) + " (" +
                             std::to_string(num_nodes_total) + " nodes declared)");
    const auto u = static_cast<std::size_t>(a - 1), v = static_cast<std::size_t>(c - 1);
    if (node_graph[u] != node_graph[v])
      throw ParseError(f_a, line.number, "edge joins nodes of different graphs");
    if (u == v) {
      ++meta.dropped_self_loops;
      continue;
    }
    directed.emplace(u, v);
  }
  for (const auto& [u, v] : directed) {
    const bool has_reverse = directed.count({v, u}) > 0;
    if (has_reverse && u > v) continue;  // recorded from the (v, u) side
    if (!has_reverse) ++meta.asymmetric_pairs;
    graph_edges[node_graph[u]].push_back(make_edge(static_cast<NodeId>(node_local[u]),
                                                   static_cast<NodeId>(node_local[v])));
  }

  // Features.
  std::size_t feature_dim = 1;
  FeatureKind kind = FeatureKind::degree;
  std::vector<Matrix> features(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) features[g] = Matrix(graph_sizes[g], 1);

  if (b.node_attributes) {
    const auto lines = split_lines(f_attr, *b.node_attributes);
    if (lines.size() != num_nodes_total)
      throw ParseError(f_attr, lines.size() < num_nodes_total ? 0 : lines[num_nodes_total].number,
                       "expected " + std::to_string(num_nodes_total) + " rows, found " +
                           std::to_string(lines.size()));
    feature_dim = split_commas(lines[0].text).size();
    for (std::size_t g = 0; g < num_graphs; ++g) features[g] = Matrix(graph_sizes[g], feature_dim);
    for (std::size_t i = 0; i < num_nodes_total; ++i) {
      const auto fields = split_commas(lines[i].text);
      if (fields.size() != feature_dim)
        throw ParseError(f_attr, lines[i].number,
                         "expected " + std::to_string(feature_dim) + " attributes");
      for (std::size_t c = 0; c < feature_dim; ++c)
        features[node_graph[i]](node_local[i], c) = parse_real(f_attr, lines[i], fields[c]);
    }
    kind = FeatureKind::intrinsic;
    meta.feature_source = FeatureSource::attributes;
  } else if (b.node_labels) {
    const auto lines = split_lines(f_nl, *b.node_labels);
    if (lines.size() != num_nodes_total)
      throw ParseError(f_nl, lines.size() < num_nodes_total ? 0 : lines[num_nodes_total].number,
                       "expected " + std::to_string(num_nodes_total) + " rows, found " +
                           std::to_string(lines.size()));
    std::vector<long long> labels(num_nodes_total);
    for (std::size_t i = 0; i < num_nodes_total; ++i)
      labels[i] = parse_int(f_nl, lines[i], lines[i].text);
    const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
    meta.node_label_min = *lo;
    feature_dim = static_cast<std::size_t>(*hi - *lo + 1);
    for (std::size_t g = 0; g < num_graphs; ++g) features[g] = Matrix(graph_sizes[g], feature_dim);
    for (std::size_t i = 0; i < num_nodes_total; ++i)
      features[node_graph[i]](node_local[i], static_cast<std::size_t>(labels[i] - *lo)) = 1.0;
    kind = FeatureKind::intrinsic;
    meta.feature_source = FeatureSource::node_labels;
  } else {
    meta.feature_source = FeatureSource::degree;
  }

  std::vector<Graph> graphs;
  graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (kind == FeatureKind::degree) features[g] = degree_features(graph_sizes[g], graph_edges[g]);
    const auto label = static_cast<int>(
        std::lower_bound(label_values.begin(), label_values.end(), raw_labels[g]) -
        label_values.begin());
    graphs.emplace_back(graph_sizes[g], std::move(graph_edges[g]), std::move(features[g]), label);
  }
  meta.label_values = label_values;
  return GraphDataset(std::move(graphs), static_cast<int>(label_values.size()), feature_dim, kind,
                      std::move(meta));
}

TuBundle serialize_tu(const GraphDataset& ds, const std::string& name) {
  TuBundle b;
  b.name = name;
  std::string a, ind, gl, attrs, nlabels;
  const auto& lv = ds.meta().label_values;
  const FeatureSource src = ds.meta().feature_source;
  std::size_t base = 1;
  for (std::size_t gi = 0; gi < ds.size(); ++gi) {
    const Graph& g = ds[gi];
    for (const Edge& e : g.edges()) {
      a += std::to_string(base + e.u) + ", " + std::to_string(base + e.v) + "\n";
      a += std::to_string(base + e.v) + ", " + std::to_string(base + e.u) + "\n";
    }
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      ind += std::to_string(gi + 1) + "\n";
      if (ds.feature_kind() != FeatureKind::intrinsic) continue;
      const auto row = g.features().row(v);
      if (src == FeatureSource::node_labels) {
        const auto hot = static_cast<long long>(std::max_element(row.begin(), row.end()) - row.begin());
        nlabels += std::to_string(ds.meta().node_label_min + hot) + "\n";
      } else {
        for (std::size_t c = 0; c < row.size(); ++c) {
          if (c) attrs += ", ";
          attrs += format_real(row[c]);
        }
        attrs += "\n";
      }
    }
    const auto y = static_cast<std::size_t>(g.label());
    gl += std::to_string(lv.empty() ? static_cast<long long>(y) : lv[y]) + "\n";
    base += g.num_nodes();
  }
  b.adjacency = std::move(a);
  b.graph_indicator = std::move(ind);
  b.graph_labels = std::move(gl);
  if (ds.feature_kind() == FeatureKind::intrinsic) {
    if (src == FeatureSource::node_labels)
      b.node_labels = std::move(nlabels);
    else
      b.node_attributes = std::move(attrs);
  }
  return b;
}

void write_tu(const TuBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& suffix, const std::string& content) {
    std::ofstream out(dir / (b.name + suffix), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / (b.name + suffix)).string());
    out << content;
  };
  put("_A.txt", b.adjacency);
  put("_graph_indicator.txt", b.graph_indicator);
  put("_graph_labels.txt", b.graph_labels);
  if (b.node_labels) put("_node_labels.txt", *b.node_labels);
  if (b.node_attributes) put("_node_attributes.txt", *b.node_attributes);
}

GraphDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ArgumentError("generate_synthetic: classes must be >= 2");
  if (spec.per_class < 1) throw ArgumentError("generate_synthetic: per_class must be >= 1");
  if (spec.feature_dim < 1) throw ArgumentError("generate_synthetic: feature_dim must be >= 1");
  if (spec.nodes_mean < 1) throw ArgumentError("generate_synthetic: nodes_mean must be >= 1");

  constexpr double kIntraP = 0.6;
  const auto d = static_cast<std::size_t>(spec.feature_dim);

  // Class means: +-class_sep along axis (y mod d); classes beyond 2d get a
  // seeded random unit direction.
  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.classes),
                                         std::vector<double>(d, 0.0));
  Rng mean_rng = make_rng(spec.seed, "sbm-means");
  for (int y = 0; y < spec.classes; ++y) {
    auto& mu = means[static_cast<std::size_t>(y)];
    if (static_cast<std::size_t>(y) < 2 * d) {
      const double sign = static_cast<std::size_t>(y) < d ? 1.0 : -1.0;
      mu[static_cast<std::size_t>(y) % d] = sign * spec.class_sep;
    } else {
      std::normal_distribution<double> n01;
      double norm = 0;
      for (double& m : mu) {
        m = n01(mean_rng);
        norm += m * m;
      }
      norm = std::sqrt(norm);
      for (double& m : mu) m = norm > 0 ? m / norm * spec.class_sep : 0.0;
    }
  }

  const int lo = std::min(8, 2 * spec.nodes_mean);
  const int hi = 2 * spec.nodes_mean;
  const std::size_t total = static_cast<std::size_t>(spec.classes) * static_cast<std::size_t>(spec.per_class);
  std::vector<Graph> graphs;
  graphs.reserve(total);
  for (std::size_t gi = 0; gi < total; ++gi) {
    const int y = static_cast<int>(gi % static_cast<std::size_t>(spec.classes));
    Rng topo = make_rng(spec.seed, "sbm-topology", {gi});
    Rng feat = make_rng(spec.seed, "sbm-features", {gi});

    const int n = std::clamp(std::poisson_distribution<int>(spec.nodes_mean)(topo), lo, hi);
    const int half = n / 2;
    const double inter_p = 0.1 * (1 + y % 2);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Edge> edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const bool same_block = (a < half) == (b < half);
        if (u01(topo) < (same_block ? kIntraP : inter_p))
          edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
      }

    Matrix x(static_cast<std::size_t>(n), d);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t v = 0; v < x.rows(); ++v)
      for (std::size_t c = 0; c < d; ++c)
        x(v, c) = means[static_cast<std::size_t>(y)][c] + noise(feat);
    graphs.emplace_back(static_cast<std::size_t>(n), std::move(edges), std::move(x), y);
  }
  DatasetMeta meta;
  meta.name = "synthetic";
  meta.feature_source = FeatureSource::synthetic;
  return GraphDataset(std::move(graphs), spec.classes, d, FeatureKind::intrinsic, std::move(meta));
}

Split split(const GraphDataset& ds, const SplitSpec& spec) {
  if (ds.empty()) throw EmptyInputError("split: empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ArgumentError("split: train_fraction must lie in (0, 1)");
  Rng rng = make_rng(spec.seed, "split");
  std::vector<std::size_t> train, test;
  auto take = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  };
  if (spec.stratified) {
    for (int y = 0; y < ds.num_classes(); ++y) {
      auto idx = ds.indices_of_class(y);
      if (idx.empty()) continue;
      if (idx.size() < 2)
        throw SplitError("split: class " + std::to_string(y) +
                         " has fewer than 2 graphs for a stratified split");
      take(std::move(idx));
    }
  } else {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    take(std::move(idx));
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  Split s{ds.subset(train), ds.subset(test), std::move(train), std::move(test)};
  return s;
}

}  // namespace mtgb
