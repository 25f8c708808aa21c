#include "mtgb/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

namespace mtgb {

const char* to_string(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::gin: return "gin";
    case Arch::sage: return "sage";
  }
  return "?";
}

Arch arch_from_string(const std::string& s) {
  if (s == "gcn") return Arch::gcn;
  if (s == "gin") return Arch::gin;
  if (s == "sage") return Arch::sage;
  throw ArgumentError("unknown architecture '" + s + "'");
}

// ---------------------------------------------------------------------------
// ParameterSet

Matrix& ParameterSet::at(std::string_view name) {
  for (auto& p : items_)
    if (p.name == name) return p.value;
  throw ArgumentError("no parameter named '" + std::string(name) + "'");
}

const Matrix& ParameterSet::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& p : items_) out.add(p.name, Matrix(p.value.rows(), p.value.cols()));
  return out;
}

void ParameterSet::set_zero() {
  for (auto& p : items_) p.value.fill(0.0);
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  if (other.items_.size() != items_.size()) throw ShapeError("parameter set layouts differ");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& dst = items_[i].value.values();
    const auto& src = other.items_[i].value.values();
    if (dst.size() != src.size()) throw ShapeError("parameter '" + items_[i].name + "' shape differs");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

bool bitwise_equal(const TrainedModel& a, const TrainedModel& b) {
  if (!(a.config == b.config) || a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto& pa = a.params.items()[i];
    const auto& pb = b.params.items()[i];
    if (pa.name != pb.name || pa.value.rows() != pb.value.rows() || pa.value.cols() != pb.value.cols())
      return false;
    if (std::memcmp(pa.value.data(), pb.value.data(), pa.value.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Layout

namespace {

std::size_t per_layer(const ModelConfig& c) {
  switch (c.arch) {
    case Arch::gcn: return 2;
    case Arch::gin: return c.learn_eps ? 5 : 4;
    case Arch::sage: return 3;
  }
  return 0;
}

std::size_t layer_base(const ModelConfig& c, int layer) {
  return static_cast<std::size_t>(layer) * per_layer(c);
}

std::size_t head_base(const ModelConfig& c) { return layer_base(c, c.num_layers); }

std::size_t layer_in_dim(const ModelConfig& c, int layer) {
  return static_cast<std::size_t>(layer == 0 ? c.input_dim : c.hidden_dim);
}

void validate(const ModelConfig& c) {
  if (c.num_layers < 1) throw ArgumentError("num_layers must be >= 1");
  if (c.hidden_dim < 1) throw ArgumentError("hidden_dim must be >= 1");
  if (c.num_classes < 1) throw ArgumentError("num_classes must be >= 1");
  if (c.input_dim < 1) throw ArgumentError("input_dim must be >= 1");
}

// ---------------------------------------------------------------------------
// Aggregations. All three operators are linear in the node features; the GCN
// and GIN ones are symmetric, so the same routine serves the backward pass.

// out[v] = x[v] / (d_v + 1) + sum_{u in N(v)} x[u] / sqrt((d_u + 1)(d_v + 1))
void gcn_propagate(const Graph& g, const Matrix& x, Matrix& out) {
  const std::size_t n = g.num_nodes(), d = x.cols();
  out.resize(n, d);
  std::vector<double> s(n);
  for (NodeId v = 0; v < n; ++v) s[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  for (NodeId v = 0; v < n; ++v) {
    double* o = out.data() + v * d;
    const double* xv = x.data() + v * d;
    const double self = s[v] * s[v];
    for (std::size_t c = 0; c < d; ++c) o[c] = self * xv[c];
    for (NodeId u : g.neighbors(v)) {
      const double w = s[u] * s[v];
      const double* xu = x.data() + u * d;
      for (std::size_t c = 0; c < d; ++c) o[c] += w * xu[c];
    }
  }
}

// out[v] = self_weight * x[v] + sum_{u in N(v)} x[u]
void gin_aggregate(const Graph& g, const Matrix& x, double self_weight, Matrix& out) {
  const std::size_t n = g.num_nodes(), d = x.cols();
  out.resize(n, d);
  for (NodeId v = 0; v < n; ++v) {
    double* o = out.data() + v * d;
    const double* xv = x.data() + v * d;
    for (std::size_t c = 0; c < d; ++c) o[c] = self_weight * xv[c];
    for (NodeId u : g.neighbors(v)) {
      const double* xu = x.data() + u * d;
      for (std::size_t c = 0; c < d; ++c) o[c] += xu[c];
    }
  }
}

// out[v] = mean_{u in N(v)} x[u], zero for isolated nodes.
void mean_aggregate(const Graph& g, const Matrix& x, Matrix& out) {
  const std::size_t n = g.num_nodes(), d = x.cols();
  out.resize(n, d);
  for (NodeId v = 0; v < n; ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    double* o = out.data() + v * d;
    for (NodeId u : nbrs) {
      const double* xu = x.data() + u * d;
      for (std::size_t c = 0; c < d; ++c) o[c] += xu[c];
    }
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    for (std::size_t c = 0; c < d; ++c) o[c] *= inv;
  }
}

// Transpose of mean_aggregate: out[u] = sum_{v in N(u)} dm[v] / deg(v).
void mean_aggregate_transpose(const Graph& g, const Matrix& dm, Matrix& out) {
  const std::size_t n = g.num_nodes(), d = dm.cols();
  out.resize(n, d);
  for (NodeId u = 0; u < n; ++u) {
    double* o = out.data() + u * d;
    for (NodeId v : g.neighbors(u)) {
      const double inv = 1.0 / static_cast<double>(g.degree(v));
      const double* dv = dm.data() + v * d;
      for (std::size_t c = 0; c < d; ++c) o[c] += inv * dv[c];
    }
  }
}

void relu(const Matrix& pre, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) out.data()[i] = pre.data()[i] > 0.0 ? pre.data()[i] : 0.0;
}

// grad *= 1[pre > 0]
void relu_backward(const Matrix& pre, Matrix& grad) {
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (!(pre.data()[i] > 0.0)) grad.data()[i] = 0.0;
}

double gin_self_weight(const TrainedModel& m, int layer) {
  if (!m.config.learn_eps) return 1.0 + m.config.gin_eps;
  return 1.0 + m.params[layer_base(m.config, layer) + 4](0, 0);
}

struct LayerCache {
  Matrix agg;         // aggregated layer input
  Matrix hidden_pre;  // GIN inner MLP pre-activation
  Matrix hidden;      // GIN inner MLP activation
  Matrix pre;         // layer output pre-activation
  Matrix out;         // post-ReLU output
};

struct Workspace {
  std::vector<LayerCache> layers;
  std::vector<double> pooled, logits, probs;
  Matrix tmp, tmp2, grad_out, grad_in;
};

// Runs layers [0, stop) and fills the cache.
void forward_layers(const TrainedModel& m, const Graph& g, Workspace& ws, int stop) {
  const ModelConfig& c = m.config;
  if (g.feature_dim() != static_cast<std::size_t>(c.input_dim))
    throw ShapeError("graph feature_dim " + std::to_string(g.feature_dim()) +
                     " does not match model input_dim " + std::to_string(c.input_dim));
  ws.layers.resize(static_cast<std::size_t>(c.num_layers));
  for (int l = 0; l < stop; ++l) {
    LayerCache& lc = ws.layers[static_cast<std::size_t>(l)];
    const Matrix& in = l == 0 ? g.features() : ws.layers[static_cast<std::size_t>(l - 1)].out;
    const std::size_t b = layer_base(c, l);
    switch (c.arch) {
      case Arch::gcn:
        gcn_propagate(g, in, lc.agg);
        matmul(lc.agg, m.params[b], lc.pre);
        add_row_bias(lc.pre, m.params[b + 1]);
        break;
      case Arch::gin:
        gin_aggregate(g, in, gin_self_weight(m, l), lc.agg);
        matmul(lc.agg, m.params[b], lc.hidden_pre);
        add_row_bias(lc.hidden_pre, m.params[b + 1]);
        relu(lc.hidden_pre, lc.hidden);
        matmul(lc.hidden, m.params[b + 2], lc.pre);
        add_row_bias(lc.pre, m.params[b + 3]);
        break;
      case Arch::sage:
        mean_aggregate(g, in, lc.agg);
        matmul(in, m.params[b], lc.pre);
        matmul(lc.agg, m.params[b + 1], ws.tmp);
        for (std::size_t i = 0; i < lc.pre.size(); ++i) lc.pre.data()[i] += ws.tmp.data()[i];
        add_row_bias(lc.pre, m.params[b + 2]);
        break;
    }
    relu(lc.pre, lc.out);
  }
}

void forward_full(const TrainedModel& m, const Graph& g, Workspace& ws) {
  const ModelConfig& c = m.config;
  forward_layers(m, g, ws, c.num_layers);
  const Matrix& h = ws.layers.back().out;
  const std::size_t n = h.rows(), hd = h.cols();
  ws.pooled.assign(hd, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t k = 0; k < hd; ++k) ws.pooled[k] += h(v, k);
  for (double& p : ws.pooled) p /= static_cast<double>(n);

  const std::size_t hb = head_base(c);
  const Matrix& wo = m.params[hb];
  const Matrix& bo = m.params[hb + 1];
  const auto nc = static_cast<std::size_t>(c.num_classes);
  ws.logits.assign(bo.values().begin(), bo.values().end());
  for (std::size_t k = 0; k < hd; ++k) {
    const double pk = ws.pooled[k];
    for (std::size_t y = 0; y < nc; ++y) ws.logits[y] += pk * wo(k, y);
  }
  const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
  ws.probs.resize(nc);
  double z = 0.0;
  for (std::size_t y = 0; y < nc; ++y) z += (ws.probs[y] = std::exp(ws.logits[y] - mx));
  for (double& p : ws.probs) p /= z;
}

// Cross-entropy of one graph; accumulates the unscaled gradient into `grads`.
double backprop_sample(const TrainedModel& m, const Graph& g, int label, Workspace& ws,
                       ParameterSet& grads) {
  const ModelConfig& c = m.config;
  forward_full(m, g, ws);
  const auto nc = static_cast<std::size_t>(c.num_classes);
  const auto y = static_cast<std::size_t>(label);
  if (y >= nc) throw ArgumentError("sample label out of range");
  const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
  double z = 0.0;
  for (double l : ws.logits) z += std::exp(l - mx);
  const double loss = -(ws.logits[y] - mx - std::log(z));

  std::vector<double> dlogits(ws.probs);
  dlogits[y] -= 1.0;

  // Head.
  const std::size_t hb = head_base(c);
  const std::size_t hd = static_cast<std::size_t>(c.hidden_dim);
  Matrix& gwo = grads[hb];
  Matrix& gbo = grads[hb + 1];
  const Matrix& wo = m.params[hb];
  std::vector<double> dpooled(hd, 0.0);
  for (std::size_t k = 0; k < hd; ++k)
    for (std::size_t q = 0; q < nc; ++q) {
      gwo(k, q) += ws.pooled[k] * dlogits[q];
      dpooled[k] += wo(k, q) * dlogits[q];
    }
  for (std::size_t q = 0; q < nc; ++q) gbo(0, q) += dlogits[q];

  const std::size_t n = g.num_nodes();
  Matrix& dout = ws.grad_out;
  dout.resize(n, hd);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t k = 0; k < hd; ++k) dout(v, k) = dpooled[k] * inv_n;

  for (int l = c.num_layers - 1; l >= 0; --l) {
    LayerCache& lc = ws.layers[static_cast<std::size_t>(l)];
    const Matrix& in = l == 0 ? g.features() : ws.layers[static_cast<std::size_t>(l - 1)].out;
    const std::size_t b = layer_base(c, l);
    const bool need_input_grad = l > 0;
    relu_backward(lc.pre, dout);  // dout is now d(pre)
    Matrix& din = ws.grad_in;
    switch (c.arch) {
      case Arch::gcn:
        matmul_tn_acc(lc.agg, dout, grads[b]);
        column_sum_acc(dout, grads[b + 1]);
        if (need_input_grad) {
          matmul_nt(dout, m.params[b], ws.tmp);
          gcn_propagate(g, ws.tmp, din);
        }
        break;
      case Arch::gin: {
        matmul_tn_acc(lc.hidden, dout, grads[b + 2]);
        column_sum_acc(dout, grads[b + 3]);
        matmul_nt(dout, m.params[b + 2], ws.tmp);  // d(hidden)
        relu_backward(lc.hidden_pre, ws.tmp);
        matmul_tn_acc(lc.agg, ws.tmp, grads[b]);
        column_sum_acc(ws.tmp, grads[b + 1]);
        if (need_input_grad || c.learn_eps) {
          matmul_nt(ws.tmp, m.params[b], ws.tmp2);  // d(agg)
          if (c.learn_eps) {
            double de = 0.0;
            for (std::size_t i = 0; i < in.size(); ++i) de += ws.tmp2.data()[i] * in.data()[i];
            grads[b + 4](0, 0) += de;
          }
          if (need_input_grad) gin_aggregate(g, ws.tmp2, gin_self_weight(m, l), din);
        }
        break;
      }
      case Arch::sage:
        matmul_tn_acc(in, dout, grads[b]);
        matmul_tn_acc(lc.agg, dout, grads[b + 1]);
        column_sum_acc(dout, grads[b + 2]);
        if (need_input_grad) {
          matmul_nt(dout, m.params[b + 1], ws.tmp);
          mean_aggregate_transpose(g, ws.tmp, ws.tmp2);
          matmul_nt(dout, m.params[b], din);
          for (std::size_t i = 0; i < din.size(); ++i) din.data()[i] += ws.tmp2.data()[i];
        }
        break;
    }
    if (need_input_grad) std::swap(ws.grad_out, ws.grad_in);
  }
  return loss;
}

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : w.values()) v = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

TrainedModel init_model(const ModelConfig& config) {
  validate(config);
  TrainedModel m;
  m.config = config;
  m.provenance.init_seed = config.seed;
  Rng rng = make_rng(config.seed, "init");
  const auto h = static_cast<std::size_t>(config.hidden_dim);
  auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
    Matrix w(rows, cols);
    glorot(w, rng);
    m.params.add(std::move(name), std::move(w));
  };
  auto bias = [&](std::string name, std::size_t cols) { m.params.add(std::move(name), Matrix(1, cols)); };
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string p = "conv" + std::to_string(l) + ".";
    const std::size_t in = layer_in_dim(config, l);
    switch (config.arch) {
      case Arch::gcn:
        weight(p + "weight", in, h);
        bias(p + "bias", h);
        break;
      case Arch::gin:
        weight(p + "mlp0.weight", in, h);
        bias(p + "mlp0.bias", h);
        weight(p + "mlp1.weight", h, h);
        bias(p + "mlp1.bias", h);
        if (config.learn_eps) m.params.add(p + "eps", Matrix(1, 1, config.gin_eps));
        break;
      case Arch::sage:
        weight(p + "weight_self", in, h);
        weight(p + "weight_neigh", in, h);
        bias(p + "bias", h);
        break;
    }
  }
  weight("head.weight", h, static_cast<std::size_t>(config.num_classes));
  bias("head.bias", static_cast<std::size_t>(config.num_classes));
  return m;
}

std::vector<double> logits(const TrainedModel& model, const Graph& g) {
  Workspace ws;
  forward_full(model, g, ws);
  return ws.logits;
}

std::vector<double> forward(const TrainedModel& model, const Graph& g) {
  Workspace ws;
  forward_full(model, g, ws);
  return ws.probs;
}

int predict(const TrainedModel& model, const Graph& g) {
  const auto p = forward(model, g);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> predict_all(const TrainedModel& model, const GraphDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  Workspace ws;
  for (const Graph& g : ds.graphs()) {
    forward_full(model, g, ws);
    out.push_back(static_cast<int>(std::max_element(ws.probs.begin(), ws.probs.end()) -
                                   ws.probs.begin()));
  }
  return out;
}

std::vector<double> activations(const TrainedModel& model, const Graph& g, int layer) {
  if (layer < 0 || layer >= model.config.num_layers)
    throw IndexError("activations: layer " + std::to_string(layer) + " out of range");
  Workspace ws;
  forward_layers(model, g, ws, layer + 1);
  const Matrix& h = ws.layers[static_cast<std::size_t>(layer)].out;
  std::vector<double> mean(h.cols(), 0.0);
  for (std::size_t v = 0; v < h.rows(); ++v)
    for (std::size_t k = 0; k < h.cols(); ++k) mean[k] += h(v, k);
  for (double& x : mean) x /= static_cast<double>(h.rows());
  return mean;
}

std::vector<double> mean_activations(const TrainedModel& model, const GraphDataset& ds, int layer) {
  if (ds.empty()) throw EmptyInputError("mean_activations: empty dataset");
  std::vector<double> acc(static_cast<std::size_t>(model.config.hidden_dim), 0.0);
  for (const Graph& g : ds.graphs()) {
    const auto a = activations(model, g, layer);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += a[k];
  }
  for (double& x : acc) x /= static_cast<double>(ds.size());
  return acc;
}

LossGrad loss_and_grad(const TrainedModel& model, std::span<const Sample> batch) {
  if (batch.empty()) throw EmptyInputError("loss_and_grad: empty batch");
  LossGrad out;
  out.grads = model.params.zeros_like();
  ParameterSet scratch = model.params.zeros_like();
  Workspace ws;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Sample& s : batch) {
    scratch.set_zero();
    const double l = backprop_sample(model, *s.graph, s.label, ws, scratch);
    out.loss += s.weight * l * inv_b;
    out.grads.add_scaled(scratch, s.weight * inv_b);
  }
  return out;
}

std::vector<double> combined_loss_weights(std::span<const int> origin) {
  const std::size_t total = origin.size();
  std::size_t clean = 0;
  std::vector<std::size_t> per_target;
  for (int o : origin) {
    if (o < 0) {
      ++clean;
      continue;
    }
    if (per_target.size() <= static_cast<std::size_t>(o)) per_target.resize(static_cast<std::size_t>(o) + 1, 0);
    ++per_target[static_cast<std::size_t>(o)];
  }
  const auto m = static_cast<double>(
      std::count_if(per_target.begin(), per_target.end(), [](std::size_t c) { return c > 0; }));
  std::vector<double> w(total, 1.0);
  if (m == 0) return w;
  const auto n = static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (origin[i] < 0)
      w[i] = n / static_cast<double>(clean);
    else
      w[i] = n / (m * static_cast<double>(per_target[static_cast<std::size_t>(origin[i])]));
  }
  return w;
}

TrainedModel train(const TrainedModel& init, const GraphDataset& data, const TrainConfig& tc,
                   std::span<const int> origin) {
  if (data.empty()) throw EmptyInputError("train: empty dataset");
  if (tc.epochs < 0 || tc.batch_size < 1 || !(tc.learning_rate > 0.0) || tc.threads < 1)
    throw ArgumentError("train: invalid TrainConfig");
  if (!origin.empty() && origin.size() != data.size())
    throw ArgumentError("train: origin tags do not match dataset size");
  if (data.feature_dim() != static_cast<std::size_t>(init.config.input_dim))
    throw ShapeError("train: dataset feature_dim does not match model input_dim");

  TrainedModel model = init;
  model.provenance.train_seed = tc.seed;
  model.provenance.data_hash = hash_dataset(data);
  const std::vector<double> weights =
      origin.empty() ? std::vector<double>(data.size(), 1.0) : combined_loss_weights(origin);

  ParameterSet grad = model.params.zeros_like();
  ParameterSet adam_m = model.params.zeros_like();
  ParameterSet adam_v = model.params.zeros_like();
  const auto threads = static_cast<std::size_t>(tc.threads);
  const auto bsz = static_cast<std::size_t>(tc.batch_size);
  std::vector<ParameterSet> sample_grads(threads > 1 ? bsz : 1, model.params.zeros_like());
  std::vector<Workspace> workspaces(threads);
  std::vector<double> sample_loss(bsz);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng = make_rng(tc.seed, "train-shuffle");
  long long step = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_obj = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bsz) {
      const std::size_t count = std::min(bsz, order.size() - start);
      const double inv_b = 1.0 / static_cast<double>(count);
      grad.set_zero();
      double batch_obj = 0.0;
      if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t gi = order[start + i];
          sample_grads[0].set_zero();
          const double l = backprop_sample(model, data[gi], data[gi].label(), workspaces[0], sample_grads[0]);
          batch_obj += weights[gi] * l;
          grad.add_scaled(sample_grads[0], weights[gi] * inv_b);
        }
      } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
          pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) {
              const std::size_t gi = order[start + i];
              sample_grads[i].set_zero();
              sample_loss[i] =
                  backprop_sample(model, data[gi], data[gi].label(), workspaces[t], sample_grads[i]);
            }
          });
        for (auto& th : pool) th.join();
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t gi = order[start + i];
          batch_obj += weights[gi] * sample_loss[i];
          grad.add_scaled(sample_grads[i], weights[gi] * inv_b);
        }
      }
      epoch_obj += batch_obj;

      ++step;
      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < model.params.size(); ++p) {
        auto& w = model.params[p].values();
        const auto& g = grad[p].values();
        auto& mm = adam_m[p].values();
        auto& vv = adam_v[p].values();
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double gk = g[k] + tc.weight_decay * w[k];
          mm[k] = tc.beta1 * mm[k] + (1.0 - tc.beta1) * gk;
          vv[k] = tc.beta2 * vv[k] + (1.0 - tc.beta2) * gk * gk;
          w[k] -= tc.learning_rate * (mm[k] / bc1) / (std::sqrt(vv[k] / bc2) + tc.adam_eps);
        }
      }
    }
    epoch_obj /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_obj))
      throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch), epoch);
    model.train_log.push_back(epoch_obj);
  }
  return model;
}

void zero_hidden_unit(TrainedModel& model, int layer, std::size_t unit) {
  const ModelConfig& c = model.config;
  if (layer < 0 || layer >= c.num_layers) throw IndexError("zero_hidden_unit: layer out of range");
  if (unit >= static_cast<std::size_t>(c.hidden_dim)) throw IndexError("zero_hidden_unit: unit out of range");
  auto zero_col = [unit](Matrix& w) {
    for (std::size_t r = 0; r < w.rows(); ++r) w(r, unit) = 0.0;
  };
  auto zero_row = [unit](Matrix& w) {
    for (std::size_t col = 0; col < w.cols(); ++col) w(unit, col) = 0.0;
  };
  const std::size_t b = layer_base(c, layer);
  switch (c.arch) {
    case Arch::gcn:
      zero_col(model.params[b]);
      zero_col(model.params[b + 1]);
      break;
    case Arch::gin:
      zero_col(model.params[b + 2]);
      zero_col(model.params[b + 3]);
      break;
    case Arch::sage:
      zero_col(model.params[b]);
      zero_col(model.params[b + 1]);
      zero_col(model.params[b + 2]);
      break;
  }
  if (layer + 1 == c.num_layers) {
    zero_row(model.params[head_base(c)]);
    return;
  }
  const std::size_t nb = layer_base(c, layer + 1);
  switch (c.arch) {
    case Arch::gcn:
    case Arch::gin:
      zero_row(model.params[nb]);
      break;
    case Arch::sage:
      zero_row(model.params[nb]);
      zero_row(model.params[nb + 1]);
      break;
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_to_json(const TrainedModel& m) {
  nlohmann::json j;
  j["format"] = "mtgb-checkpoint";
  j["version"] = 1;
  j["config"] = {{"arch", to_string(m.config.arch)},
                 {"num_layers", m.config.num_layers},
                 {"hidden_dim", m.config.hidden_dim},
                 {"num_classes", m.config.num_classes},
                 {"input_dim", m.config.input_dim},
                 {"gin_eps", m.config.gin_eps},
                 {"learn_eps", m.config.learn_eps},
                 {"seed", m.config.seed}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : m.params.items())
    params.push_back({{"name", p.name},
                      {"shape", {p.value.rows(), p.value.cols()}},
                      {"values", p.value.values()}});
  j["parameters"] = std::move(params);
  j["train_log"] = m.train_log;
  j["provenance"] = {{"init_seed", m.provenance.init_seed},
                     {"train_seed", m.provenance.train_seed},
                     {"data_hash", m.provenance.data_hash},
                     {"note", m.provenance.note}};
  return j.dump();
}

TrainedModel checkpoint_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "mtgb-checkpoint") throw ArgumentError("not an mtgb checkpoint");
  if (j.at("version").get<int>() != 1) throw ArgumentError("unsupported checkpoint version");
  TrainedModel m;
  const auto& c = j.at("config");
  m.config.arch = arch_from_string(c.at("arch").get<std::string>());
  m.config.num_layers = c.at("num_layers").get<int>();
  m.config.hidden_dim = c.at("hidden_dim").get<int>();
  m.config.num_classes = c.at("num_classes").get<int>();
  m.config.input_dim = c.at("input_dim").get<int>();
  m.config.gin_eps = c.at("gin_eps").get<double>();
  m.config.learn_eps = c.at("learn_eps").get<bool>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  const TrainedModel layout = init_model(m.config);
  const auto& params = j.at("parameters");
  if (params.size() != layout.params.size()) throw ShapeError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto rows = p.at("shape").at(0).get<std::size_t>();
    const auto cols = p.at("shape").at(1).get<std::size_t>();
    const auto& ref = layout.params.items()[i];
    if (p.at("name").get<std::string>() != ref.name || rows != ref.value.rows() || cols != ref.value.cols())
      throw ShapeError("checkpoint parameter '" + p.at("name").get<std::string>() + "' does not match config");
    m.params.add(ref.name, Matrix(rows, cols, p.at("values").get<std::vector<double>>()));
  }
  m.train_log = j.at("train_log").get<std::vector<double>>();
  const auto& pv = j.at("provenance");
  m.provenance.init_seed = pv.at("init_seed").get<std::uint64_t>();
  m.provenance.train_seed = pv.at("train_seed").get<std::uint64_t>();
  m.provenance.data_hash = pv.at("data_hash").get<std::uint64_t>();
  m.provenance.note = pv.at("note").get<std::string>();
  return m;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model);
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace mtgb
