#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtgb/graph.hpp"
#include "mtgb/matrix.hpp"

namespace mtgb {

enum class Arch { gcn, gin, sage };

const char* to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct ModelConfig {
  Arch arch = Arch::gcn;
  int num_layers = 3;
  int hidden_dim = 64;
  int num_classes = 2;
  int input_dim = 1;
  // GIN self weight is (1 + gin_eps); trained only when learn_eps is set.
  double gin_eps = 0.0;
  bool learn_eps = false;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  // Worker threads for per-graph forward/backward inside a batch. Results are
  // bit-identical for every thread count (per-sample gradients are reduced in
  // sample order).
  int threads = 1;

  bool operator==(const TrainConfig&) const = default;
};

struct Parameter {
  std::string name;
  Matrix value;
  bool operator==(const Parameter&) const = default;
};

// Ordered named tensors. The order is fixed by the model configuration.
class ParameterSet {
 public:
  std::vector<Parameter>& items() noexcept { return items_; }
  const std::vector<Parameter>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  Matrix& operator[](std::size_t i) { return items_[i].value; }
  const Matrix& operator[](std::size_t i) const { return items_[i].value; }

  // Throws ArgumentError for unknown names.
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  void add(std::string name, Matrix value) { items_.push_back({std::move(name), std::move(value)}); }
  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  void set_zero();
  // this += scale * other (same layout required).
  void add_scaled(const ParameterSet& other, double scale);
  std::size_t scalar_count() const;

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<Parameter> items_;
};

struct Provenance {
  std::uint64_t init_seed = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t data_hash = 0;
  std::string note;
  bool operator==(const Provenance&) const = default;
};

struct TrainedModel {
  ModelConfig config;
  ParameterSet params;
  std::vector<double> train_log;  // mean objective per epoch
  Provenance provenance;
  bool operator==(const TrainedModel&) const = default;
};

// Byte-level comparison of every parameter value (distinguishes -0.0 / 0.0).
bool bitwise_equal(const TrainedModel& a, const TrainedModel& b);

// Glorot-uniform weights and zero biases drawn from config.seed.
TrainedModel init_model(const ModelConfig& config);

std::vector<double> logits(const TrainedModel& model, const Graph& g);
// Softmax class probabilities; throws ShapeError on a feature_dim mismatch.
std::vector<double> forward(const TrainedModel& model, const Graph& g);
// Argmax of forward, lowest class index on ties.
int predict(const TrainedModel& model, const Graph& g);
std::vector<int> predict_all(const TrainedModel& model, const GraphDataset& ds);

// Node-mean of the post-ReLU hidden state of `layer` (length hidden_dim).
std::vector<double> activations(const TrainedModel& model, const Graph& g, int layer);
// Graph-mean of activations() over a dataset.
std::vector<double> mean_activations(const TrainedModel& model, const GraphDataset& ds, int layer);

struct Sample {
  const Graph* graph = nullptr;
  int label = 0;
  double weight = 1.0;
};

struct LossGrad {
  double loss = 0.0;
  ParameterSet grads;
};

// loss = (1/B) sum_i weight_i * CE(f(G_i), y_i), gradients analytic.
LossGrad loss_and_grad(const TrainedModel& model, std::span<const Sample> batch);

// Per-sample weights realizing the combined objective: clean samples get
// |D| / |D_clean|, samples poisoned with trigger j get |D| / (m |D_p^(j)|),
// where m counts triggers with at least one poisoned sample. Without poisoned
// samples every weight is 1.
std::vector<double> combined_loss_weights(std::span<const int> origin);

// Minibatch Adam on the combined objective. `origin` is empty (all clean) or
// one tag per graph (kCleanOrigin or trigger index). Throws TrainingError when
// the epoch objective is not finite.
TrainedModel train(const TrainedModel& init, const GraphDataset& data, const TrainConfig& tc,
                   std::span<const int> origin = {});

// Zeroes every weight into and out of hidden unit `unit` of `layer`, so its
// activation is exactly 0 on every input.
void zero_hidden_unit(TrainedModel& model, int layer, std::size_t unit);

std::string checkpoint_to_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const std::string& json);
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mtgb
