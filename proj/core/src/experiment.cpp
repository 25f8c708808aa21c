#include "mtgb/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "mtgb/error.hpp"
#include "mtgb/rng.hpp"

#ifndef MTGB_GIT_DESCRIBE
#define MTGB_GIT_DESCRIBE "unknown"
#endif

namespace mtgb {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

// Strict reader over one JSON object: typed getters record the keys they
// consume and finish() rejects anything left over.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(field(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_number()) throw ConfigError(field(key), "expected a number or null");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) throw ConfigError(field(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  // Sweep values: numbers or strings, kept as text.
  void get(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array");
      out.clear();
      for (const auto& e : *v) {
        if (e.is_string()) out.push_back(e.get<std::string>());
        else if (e.is_number()) out.push_back(e.dump());
        else throw ConfigError(field(key), "expected numbers or strings");
      }
    }
  }

  template <class E, class F>
  void get_enum(const std::string& key, E& out, F&& parse) {
    std::string s;
    if (!find(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const Error& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  std::optional<Reader> child(const std::string& key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    return Reader(*v, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson config_json(const ExperimentConfig& c) {
  ojson ds;
  ds["source"] = c.dataset.source;
  ojson syn;
  syn["classes"] = c.dataset.synthetic.classes;
  syn["per_class"] = c.dataset.synthetic.per_class;
  syn["nodes_mean"] = c.dataset.synthetic.nodes_mean;
  syn["feature_dim"] = c.dataset.synthetic.feature_dim;
  syn["class_sep"] = c.dataset.synthetic.class_sep;
  syn["seed"] = c.dataset.synthetic_seed_set ? ojson(c.dataset.synthetic.seed) : ojson(nullptr);
  ds["synthetic"] = syn;
  ds["tu"] = ojson{{"path", c.dataset.tu_path}, {"name", c.dataset.tu_name}};
  ds["degree_features"] = c.dataset.degree_features;

  ojson model;
  model["arch"] = to_string(c.model.arch);
  model["num_layers"] = c.model.num_layers;
  model["hidden_dim"] = c.model.hidden_dim;
  model["gin_eps"] = c.model.gin_eps;
  model["learn_eps"] = c.model.learn_eps;

  ojson train;
  train["epochs"] = c.train.epochs;
  train["learning_rate"] = c.train.learning_rate;
  train["beta1"] = c.train.beta1;
  train["beta2"] = c.train.beta2;
  train["adam_eps"] = c.train.adam_eps;
  train["batch_size"] = c.train.batch_size;
  train["weight_decay"] = c.train.weight_decay;

  const TriggerConfig& t = c.attack.trigger;
  ojson trig;
  trig["size_fraction"] = opt(t.size_fraction);
  trig["size_fraction_small"] = t.size_fraction_small;
  trig["size_fraction_large"] = t.size_fraction_large;
  trig["size_threshold"] = t.size_threshold;
  trig["edge_density"] = opt(t.edge_density);
  trig["edge_density_intrinsic"] = t.edge_density_intrinsic;
  trig["edge_density_degree"] = t.edge_density_degree;
  trig["x_min"] = opt(t.x_min);
  trig["x_max"] = opt(t.x_max);
  trig["per_column_range"] = t.per_column_range;

  ojson attack;
  attack["n_targets"] = c.attack.n_targets;
  attack["targets"] = c.attack.targets;
  attack["poisoning_ratio"] = c.attack.poisoning_ratio;
  attack["trigger"] = trig;
  attack["strategy"] = to_string(c.attack.strategy);
  attack["k"] = c.attack.k;
  attack["distinct_host_anchors"] = c.attack.distinct_host_anchors;
  attack["mechanism"] = to_string(c.attack.mechanism);
  attack["compare_mechanisms"] = c.attack.compare_mechanisms;
  attack["exclude_target_class"] = c.attack.exclude_target_class;

  ojson rs;
  rs["enabled"] = c.rs.enabled;
  rs["n_samples"] = c.rs.n_samples;
  rs["sigmas"] = c.rs.sigmas;
  ojson fp;
  fp["enabled"] = c.fp.enabled;
  fp["clean_fraction"] = c.fp.clean_fraction;
  fp["ratios"] = c.fp.ratios;
  fp["finetune_epochs"] = c.fp.finetune_epochs;
  fp["finetune_learning_rate"] = opt(c.fp.finetune_learning_rate);
  fp["all_hidden_layers"] = c.fp.all_hidden_layers;

  ojson out;
  out["schema_version"] = c.schema_version;
  out["seed"] = c.seed;
  out["dataset"] = ds;
  out["split"] = ojson{{"train_fraction", c.split.train_fraction}, {"stratified", c.split.stratified}};
  out["model"] = model;
  out["train"] = train;
  out["attack"] = attack;
  out["defenses"] = ojson{{"rs", rs}, {"fp", fp}};
  if (c.sweep)
    out["sweep"] = ojson{{"parameter", c.sweep->parameter},
                         {"values", c.sweep->values},
                         {"second_values", c.sweep->second_values}};
  else
    out["sweep"] = nullptr;
  out["threads"] = c.threads;
  out["output_dir"] = c.output_dir;
  return out;
}

ExperimentConfig parse_config(const json& root) {
  ExperimentConfig c;
  Reader r(root, "");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));
  r.get("seed", c.seed);
  if (auto d = r.child("dataset")) {
    d->get("source", c.dataset.source);
    if (auto s = d->child("synthetic")) {
      s->get("classes", c.dataset.synthetic.classes);
      s->get("per_class", c.dataset.synthetic.per_class);
      s->get("nodes_mean", c.dataset.synthetic.nodes_mean);
      s->get("feature_dim", c.dataset.synthetic.feature_dim);
      s->get("class_sep", c.dataset.synthetic.class_sep);
      if (const json* v = s->find("seed"); v && !v->is_null()) {
        s->get("seed", c.dataset.synthetic.seed);
        c.dataset.synthetic_seed_set = true;
      }
      s->finish();
    }
    if (auto t = d->child("tu")) {
      t->get("path", c.dataset.tu_path);
      t->get("name", c.dataset.tu_name);
      t->finish();
    }
    d->get("degree_features", c.dataset.degree_features);
    d->finish();
  }
  if (auto s = r.child("split")) {
    s->get("train_fraction", c.split.train_fraction);
    s->get("stratified", c.split.stratified);
    s->finish();
  }
  if (auto m = r.child("model")) {
    m->get_enum("arch", c.model.arch, arch_from_string);
    m->get("num_layers", c.model.num_layers);
    m->get("hidden_dim", c.model.hidden_dim);
    m->get("gin_eps", c.model.gin_eps);
    m->get("learn_eps", c.model.learn_eps);
    m->finish();
  }
  if (auto t = r.child("train")) {
    t->get("epochs", c.train.epochs);
    t->get("learning_rate", c.train.learning_rate);
    t->get("beta1", c.train.beta1);
    t->get("beta2", c.train.beta2);
    t->get("adam_eps", c.train.adam_eps);
    t->get("batch_size", c.train.batch_size);
    t->get("weight_decay", c.train.weight_decay);
    t->finish();
  }
  if (auto a = r.child("attack")) {
    a->get("n_targets", c.attack.n_targets);
    a->get("targets", c.attack.targets);
    a->get("poisoning_ratio", c.attack.poisoning_ratio);
    if (auto t = a->child("trigger")) {
      TriggerConfig& tc = c.attack.trigger;
      t->get("size_fraction", tc.size_fraction);
      t->get("size_fraction_small", tc.size_fraction_small);
      t->get("size_fraction_large", tc.size_fraction_large);
      t->get("size_threshold", tc.size_threshold);
      t->get("edge_density", tc.edge_density);
      t->get("edge_density_intrinsic", tc.edge_density_intrinsic);
      t->get("edge_density_degree", tc.edge_density_degree);
      t->get("x_min", tc.x_min);
      t->get("x_max", tc.x_max);
      t->get("per_column_range", tc.per_column_range);
      t->finish();
    }
    a->get_enum("strategy", c.attack.strategy, strategy_from_string);
    a->get("k", c.attack.k);
    a->get("distinct_host_anchors", c.attack.distinct_host_anchors);
    a->get_enum("mechanism", c.attack.mechanism, mechanism_from_string);
    a->get("compare_mechanisms", c.attack.compare_mechanisms);
    a->get("exclude_target_class", c.attack.exclude_target_class);
    a->finish();
  }
  if (auto d = r.child("defenses")) {
    if (auto rs = d->child("rs")) {
      rs->get("enabled", c.rs.enabled);
      rs->get("n_samples", c.rs.n_samples);
      rs->get("sigmas", c.rs.sigmas);
      rs->finish();
    }
    if (auto fp = d->child("fp")) {
      fp->get("enabled", c.fp.enabled);
      fp->get("clean_fraction", c.fp.clean_fraction);
      fp->get("ratios", c.fp.ratios);
      fp->get("finetune_epochs", c.fp.finetune_epochs);
      fp->get("finetune_learning_rate", c.fp.finetune_learning_rate);
      fp->get("all_hidden_layers", c.fp.all_hidden_layers);
      fp->finish();
    }
    d->finish();
  }
  if (auto s = r.child("sweep")) {
    SweepConfig sc;
    s->get("parameter", sc.parameter);
    s->get("values", sc.values);
    s->get("second_values", sc.second_values);
    s->finish();
    c.sweep = std::move(sc);
  }
  r.get("threads", c.threads);
  r.get("output_dir", c.output_dir);
  r.finish();
  return c;
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << h;
  return s.str();
}

void add(std::vector<Diagnostic>& d, std::string field, std::string message) {
  d.push_back({std::move(field), std::move(message)});
}

bool in_open_closed(double v) { return v > 0.0 && v <= 1.0; }

// Checks that need no data.
std::vector<Diagnostic> static_checks(const ExperimentConfig& c) {
  std::vector<Diagnostic> d;
  if (c.dataset.source == "synthetic") {
    const auto& s = c.dataset.synthetic;
    if (s.classes < 2) add(d, "dataset.synthetic.classes", "need at least 2 classes");
    if (s.per_class < 2) add(d, "dataset.synthetic.per_class", "need at least 2 graphs per class");
    if (s.nodes_mean < 1) add(d, "dataset.synthetic.nodes_mean", "must be >= 1");
    if (s.feature_dim < 1) add(d, "dataset.synthetic.feature_dim", "must be >= 1");
    if (!(s.class_sep >= 0.0)) add(d, "dataset.synthetic.class_sep", "must be >= 0");
  } else if (c.dataset.source == "tu") {
    if (c.dataset.tu_path.empty()) add(d, "dataset.tu.path", "required for a TU dataset");
    if (c.dataset.tu_name.empty()) add(d, "dataset.tu.name", "required for a TU dataset");
    if (!c.dataset.tu_path.empty() && !c.dataset.tu_name.empty()) {
      for (const char* suffix : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"}) {
        const auto file = std::filesystem::path(c.dataset.tu_path) / (c.dataset.tu_name + suffix);
        if (!std::filesystem::is_regular_file(file))
          add(d, "dataset.tu.path", "missing file " + file.string());
      }
    }
  } else {
    add(d, "dataset.source", "expected \"synthetic\" or \"tu\"");
  }
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0))
    add(d, "split.train_fraction", "must lie in (0, 1)");
  if (c.model.num_layers < 1) add(d, "model.num_layers", "must be >= 1");
  if (c.model.hidden_dim < 1) add(d, "model.hidden_dim", "must be >= 1");
  if (c.train.epochs < 0) add(d, "train.epochs", "must be >= 0");
  if (!(c.train.learning_rate > 0.0)) add(d, "train.learning_rate", "must be > 0");
  if (!(c.train.beta1 >= 0.0 && c.train.beta1 < 1.0)) add(d, "train.beta1", "must lie in [0, 1)");
  if (!(c.train.beta2 >= 0.0 && c.train.beta2 < 1.0)) add(d, "train.beta2", "must lie in [0, 1)");
  if (!(c.train.adam_eps > 0.0)) add(d, "train.adam_eps", "must be > 0");
  if (c.train.batch_size < 1) add(d, "train.batch_size", "must be >= 1");
  if (!(c.train.weight_decay >= 0.0)) add(d, "train.weight_decay", "must be >= 0");

  const AttackConfig& a = c.attack;
  if (a.targets.empty() && a.n_targets < 1) add(d, "attack.n_targets", "must be >= 1");
  {
    std::set<int> seen;
    for (int t : a.targets) {
      if (t < 0) add(d, "attack.targets", "class " + std::to_string(t) + " is negative");
      if (!seen.insert(t).second) add(d, "attack.targets", "class " + std::to_string(t) + " listed twice");
    }
  }
  if (!in_open_closed(a.poisoning_ratio)) add(d, "attack.poisoning_ratio", "must lie in (0, 1]");
  if (a.k < 1) add(d, "attack.k", "must be >= 1");
  const TriggerConfig& t = a.trigger;
  if (t.size_fraction && !(*t.size_fraction > 0.0))
    add(d, "attack.trigger.size_fraction", "must be > 0");
  if (!(t.size_fraction_small > 0.0)) add(d, "attack.trigger.size_fraction_small", "must be > 0");
  if (!(t.size_fraction_large > 0.0)) add(d, "attack.trigger.size_fraction_large", "must be > 0");
  if (t.edge_density && !in_open_closed(*t.edge_density))
    add(d, "attack.trigger.edge_density", "must lie in (0, 1]");
  if (!in_open_closed(t.edge_density_intrinsic))
    add(d, "attack.trigger.edge_density_intrinsic", "must lie in (0, 1]");
  if (!in_open_closed(t.edge_density_degree))
    add(d, "attack.trigger.edge_density_degree", "must lie in (0, 1]");
  if (t.x_min.has_value() != t.x_max.has_value())
    add(d, "attack.trigger.x_min", "x_min and x_max must be given together");
  if (t.x_min && t.x_max && !(*t.x_min <= *t.x_max)) add(d, "attack.trigger.x_min", "must be <= x_max");

  if (c.rs.enabled) {
    if (c.rs.n_samples < 1) add(d, "defenses.rs.n_samples", "must be >= 1");
    if (c.rs.sigmas.empty()) add(d, "defenses.rs.sigmas", "must not be empty");
    for (double s : c.rs.sigmas)
      if (!(s >= 0.0)) add(d, "defenses.rs.sigmas", "sigma must be >= 0");
  }
  if (c.fp.enabled) {
    if (!in_open_closed(c.fp.clean_fraction)) add(d, "defenses.fp.clean_fraction", "must lie in (0, 1]");
    if (c.fp.ratios.empty()) add(d, "defenses.fp.ratios", "must not be empty");
    for (double r : c.fp.ratios)
      if (!(r >= 0.0 && r <= 1.0)) add(d, "defenses.fp.ratios", "ratio must lie in [0, 1]");
    if (c.fp.finetune_epochs < 0) add(d, "defenses.fp.finetune_epochs", "must be >= 0");
    if (c.fp.finetune_learning_rate && !(*c.fp.finetune_learning_rate > 0.0))
      add(d, "defenses.fp.finetune_learning_rate", "must be > 0");
  }
  if (c.sweep) {
    const auto& known = sweep_parameters();
    if (std::find(known.begin(), known.end(), c.sweep->parameter) == known.end())
      add(d, "sweep.parameter", "unknown parameter '" + c.sweep->parameter + "'");
    if (c.sweep->values.empty()) add(d, "sweep.values", "must not be empty");
    if (c.sweep->parameter == "trigger_size_x_edge_density" && c.sweep->second_values.empty())
      add(d, "sweep.second_values", "required for a 2-D sweep");
  }
  if (c.threads < 1) add(d, "threads", "must be >= 1");
  if (c.output_dir.empty()) add(d, "output_dir", "must not be empty");
  return d;
}

InjectionOptions injection_options(const ExperimentConfig& c) {
  InjectionOptions o;
  o.k = static_cast<std::size_t>(c.attack.k);
  o.strategy = c.attack.strategy;
  o.distinct_host_anchors = c.attack.distinct_host_anchors;
  o.mechanism = c.attack.mechanism;
  return o;
}

TrainConfig train_config(const ExperimentConfig& c, std::string_view purpose, std::uint64_t stream) {
  TrainConfig tc = c.train;
  tc.seed = derive_seed(c.seed, purpose, {stream});
  tc.threads = c.threads;
  return tc;
}

// Checks that need the loaded data: target classes and host feasibility.
std::vector<Diagnostic> data_checks(const ExperimentConfig& resolved, const PreparedData& data) {
  std::vector<Diagnostic> d;
  const int c = data.full.num_classes();
  for (int t : resolved.attack.targets)
    if (t >= c)
      add(d, "attack.targets", "class " + std::to_string(t) + " does not exist (dataset has " +
                                   std::to_string(c) + " classes)");
  if (!d.empty()) return d;
  std::vector<std::size_t> need(static_cast<std::size_t>(c), 0);
  for (int i = 0; i < c; ++i) {
    const std::size_t n = data.train_stats.class_counts[static_cast<std::size_t>(i)];
    for (int t : resolved.attack.targets)
      if (t != i) need[static_cast<std::size_t>(i)] += hosts_per_class(resolved.attack.poisoning_ratio, n);
    if (need[static_cast<std::size_t>(i)] > n)
      add(d, "attack.poisoning_ratio",
          "oversubscribed: class " + std::to_string(i) + " has " + std::to_string(n) +
              " training graphs but " + std::to_string(need[static_cast<std::size_t>(i)]) +
              " hosts are required");
  }
  try {
    generate_trigger_family(trigger_spec_of(resolved), data.train_stats, resolved.attack.targets);
  } catch (const Error& e) {
    add(d, "attack.trigger", e.what());
  }
  return d;
}

template <class F>
auto stage(const char* name, std::map<std::string, double>& timings, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
      auto out = f();
      timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return out;
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

std::vector<GraphDataset> poisoned_tests(const ExperimentConfig& resolved, const PreparedData& data,
                                         const std::vector<Trigger>& triggers) {
  std::vector<GraphDataset> out;
  const auto opts = injection_options(resolved);
  const auto seed = derive_seed(resolved.seed, "test-poison", {0});
  for (const Trigger& t : triggers)
    out.push_back(poison_test_set(data.split.test, t, opts, seed, resolved.attack.exclude_target_class));
  return out;
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::string attack_defaults_json() {
  const AttackConfig a;
  ojson j;
  j["n_targets"] = a.n_targets;
  j["poisoning_ratio"] = a.poisoning_ratio;
  j["strategy"] = to_string(a.strategy);
  j["k"] = a.k;
  j["mechanism"] = to_string(a.mechanism);
  j["trigger_size_fraction"] = ojson{{"avg_nodes_below", a.trigger.size_threshold},
                                     {"below", a.trigger.size_fraction_small},
                                     {"otherwise", a.trigger.size_fraction_large}};
  j["edge_density"] = ojson{{"intrinsic_features", a.trigger.edge_density_intrinsic},
                            {"degree_features", a.trigger.edge_density_degree}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (root.is_object() && root.contains("resolved_config")) {
    try {
      return parse_config(root.at("resolved_config"));
    } catch (const ConfigError& e) {
      throw ConfigError("resolved_config." + e.field(), e.what());
    }
  }
  return parse_config(root);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ojson j = config_json(cfg);
  j.erase("output_dir");
  j.erase("threads");
  return fnv1a(j.dump());
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  GraphDataset full = [&] {
    if (cfg.dataset.source == "tu") return parse_tu(cfg.dataset.tu_path, cfg.dataset.tu_name);
    SyntheticSpec s = cfg.dataset.synthetic;
    if (!cfg.dataset.synthetic_seed_set) s.seed = cfg.seed;
    return generate_synthetic(s);
  }();
  if (cfg.dataset.degree_features) full = relabel_to_degree_features(full);
  SplitSpec ss = cfg.split;
  ss.seed = derive_seed(cfg.seed, "split");
  Split sp = split(full, ss);
  DatasetStats stats = compute_stats(sp.train);
  return PreparedData{std::move(full), std::move(sp), std::move(stats)};
}

std::vector<int> targets_of(const ExperimentConfig& cfg) {
  if (!cfg.attack.targets.empty()) return cfg.attack.targets;
  std::vector<int> t;
  for (int i = 0; i < cfg.attack.n_targets; ++i) t.push_back(i);
  return t;
}

ExperimentConfig resolve(const ExperimentConfig& cfg, const PreparedData& data) {
  ExperimentConfig r = cfg;
  if (r.dataset.source == "synthetic" && !r.dataset.synthetic_seed_set) {
    r.dataset.synthetic.seed = r.seed;
    r.dataset.synthetic_seed_set = true;
  }
  TriggerConfig& t = r.attack.trigger;
  if (!t.size_fraction)
    t.size_fraction = data.train_stats.avg_nodes < t.size_threshold ? t.size_fraction_small
                                                                    : t.size_fraction_large;
  if (!t.edge_density)
    t.edge_density = data.full.feature_kind() == FeatureKind::degree ? t.edge_density_degree
                                                                     : t.edge_density_intrinsic;
  r.attack.targets = targets_of(cfg);
  r.attack.n_targets = static_cast<int>(r.attack.targets.size());
  r.model.num_classes = data.full.num_classes();
  r.model.input_dim = static_cast<int>(data.full.feature_dim());
  r.model.seed = derive_seed(r.seed, "model-init");
  return r;
}

TriggerSpec trigger_spec_of(const ExperimentConfig& resolved, std::uint64_t stream) {
  const TriggerConfig& t = resolved.attack.trigger;
  if (!t.size_fraction || !t.edge_density) throw ArgumentError("trigger settings are not resolved");
  TriggerSpec s;
  s.size_fraction = *t.size_fraction;
  s.edge_density = *t.edge_density;
  s.x_min = t.x_min;
  s.x_max = t.x_max;
  s.per_column_range = t.per_column_range;
  s.seed = derive_seed(resolved.seed, "trigger", {stream});
  return s;
}

std::vector<Diagnostic> validate(const ExperimentConfig& cfg) {
  auto d = static_checks(cfg);
  if (!d.empty()) return d;
  std::optional<PreparedData> data;
  try {
    data.emplace(prepare_data(cfg));
  } catch (const ParseError& e) {
    add(d, "dataset.tu", e.what());
    return d;
  } catch (const Error& e) {
    add(d, "dataset", e.what());
    return d;
  }
  return data_checks(resolve(cfg, *data), *data);
}

std::vector<Diagnostic> validate_file(const std::filesystem::path& path) {
  try {
    return validate(load_config(path));
  } catch (const ConfigError& e) {
    return {{e.field(), e.what()}};
  }
}

TrainedModel train_clean_model(const ExperimentConfig& resolved, const PreparedData& data) {
  return train(init_model(resolved.model), data.split.train, train_config(resolved, "train-clean", 0));
}

AttackOutcome run_attack(const ExperimentConfig& resolved, const PreparedData& data,
                         const TrainedModel& clean_model, std::uint64_t stream) {
  const auto opts = injection_options(resolved);
  auto triggers = generate_trigger_family(trigger_spec_of(resolved, stream), data.train_stats,
                                          resolved.attack.targets);
  PoisonPlan plan = make_plan(data.split.train, std::move(triggers), resolved.attack.poisoning_ratio,
                              opts, derive_seed(resolved.seed, "poison", {stream}));
  const PoisonedDataset poisoned = build_poisoned_dataset(data.split.train, plan);
  TrainedModel backdoored = train(init_model(resolved.model), poisoned.dataset,
                                  train_config(resolved, "train-backdoor", stream), poisoned.origin);
  AttackReport report =
      full_attack_eval(clean_model, backdoored, data.split.test, plan.triggers, opts,
                       derive_seed(resolved.seed, "test-poison", {stream}),
                       resolved.attack.exclude_target_class);
  report.config_hash = config_hash(resolved);
  return {std::move(plan), std::move(backdoored), std::move(report)};
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& resolved, const std::string& parameter,
                                   const std::string& value, const std::string& second_value) {
  ExperimentConfig c = resolved;
  c.sweep.reset();
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ArgumentError("'" + s + "' is not a number");
    return v;
  };
  auto integer = [&](const std::string& s) {
    const double v = num(s);
    if (v != std::floor(v)) throw ArgumentError("'" + s + "' is not an integer");
    return static_cast<int>(v);
  };
  if (parameter == "poisoning_ratio") {
    c.attack.poisoning_ratio = num(value);
  } else if (parameter == "trigger_size") {
    c.attack.trigger.size_fraction = num(value);
  } else if (parameter == "edge_density") {
    c.attack.trigger.edge_density = num(value);
  } else if (parameter == "k") {
    c.attack.k = integer(value);
  } else if (parameter == "n_targets") {
    c.attack.n_targets = integer(value);
    c.attack.targets.clear();
    c.attack.targets = targets_of(c);
  } else if (parameter == "strategy") {
    c.attack.strategy = strategy_from_string(value);
  } else if (parameter == "trigger_size_x_edge_density") {
    c.attack.trigger.size_fraction = num(value);
    c.attack.trigger.edge_density = num(second_value);
  } else {
    throw ArgumentError("unknown sweep parameter '" + parameter + "'");
  }
  return c;
}

SweepGrid run_sweep(const ExperimentConfig& resolved, const SweepConfig& sweep_cfg,
                    const PreparedData& data, const TrainedModel& clean_model) {
  return sweep(sweep_cfg.parameter, sweep_cfg.values, sweep_cfg.second_values,
               [&](const std::string& v, const std::string& w, std::size_t index) {
                 const ExperimentConfig cell = apply_sweep_value(resolved, sweep_cfg.parameter, v, w);
                 const auto d = data_checks(cell, data);
                 if (!d.empty()) throw ConfigError(d.front().field, d.front().message);
                 return run_attack(cell, data, clean_model, index + 1).report;
               });
}

RunResult run(const ExperimentConfig& cfg) {
  if (auto d = static_checks(cfg); !d.empty()) throw ConfigError(d.front().field, d.front().message);
  std::map<std::string, double> timings;
  const auto t_start = std::chrono::steady_clock::now();

  PreparedData data = stage("dataset", timings, [&] {
    try {
      return prepare_data(cfg);
    } catch (const ParseError& e) {
      throw ConfigError("dataset.tu", e.what());
    }
  });
  const ExperimentConfig resolved = resolve(cfg, data);
  if (auto d = data_checks(resolved, data); !d.empty())
    throw ConfigError(d.front().field, d.front().message);

  RunResult result;
  result.output_dir = cfg.output_dir;
  const std::filesystem::path out = cfg.output_dir;

  const TrainedModel clean = stage("clean_train", timings, [&] { return train_clean_model(resolved, data); });
  AttackOutcome attack = stage("attack", timings, [&] { return run_attack(resolved, data, clean, 0); });
  result.report = attack.report;

  std::optional<AttackOutcome> other;
  if (resolved.attack.compare_mechanisms) {
    stage("compare", timings, [&] {
      ExperimentConfig alt = resolved;
      alt.attack.mechanism = resolved.attack.mechanism == Mechanism::injection ? Mechanism::replacement
                                                                                : Mechanism::injection;
      other = run_attack(alt, data, clean, 0);
      result.comparison = {attack.report, other->report};
      if (resolved.attack.mechanism == Mechanism::replacement)
        std::swap(result.comparison[0], result.comparison[1]);
    });
  }

  if (resolved.rs.enabled || resolved.fp.enabled) {
    stage("defenses", timings, [&] {
      const auto tests = poisoned_tests(resolved, data, attack.plan.triggers);
      if (resolved.rs.enabled) {
        SmoothingConfig sc;
        sc.n_samples = resolved.rs.n_samples;
        sc.seed = derive_seed(resolved.seed, "rs");
        result.rs = rs_curve(attack.backdoored, data.split.test, tests, resolved.attack.targets,
                             resolved.rs.sigmas, sc);
      }
      if (resolved.fp.enabled) {
        PruneConfig pc;
        pc.clean_fraction = resolved.fp.clean_fraction;
        pc.finetune = train_config(resolved, "fp-finetune", 0);
        pc.finetune.epochs = resolved.fp.finetune_epochs;
        pc.finetune.learning_rate =
            resolved.fp.finetune_learning_rate.value_or(resolved.train.learning_rate / 10.0);
        pc.all_hidden_layers = resolved.fp.all_hidden_layers;
        pc.seed = derive_seed(resolved.seed, "fp");
        const auto subset = draw_clean_subset(data.split.train, pc.clean_fraction, pc.seed);
        result.fp = fp_curve(attack.backdoored, subset, data.split.test, tests, resolved.attack.targets,
                             resolved.fp.ratios, pc);
      }
    });
  }

  if (resolved.sweep)
    result.sweep = stage("sweep", timings, [&] { return run_sweep(resolved, *resolved.sweep, data, clean); });

  stage("write", timings, [&] {
    const std::string clean_json = checkpoint_to_json(clean);
    const std::string backdoored_json = checkpoint_to_json(attack.backdoored);
    const std::string plan_json = plan_to_json(attack.plan);
    write_file(out / "models" / "clean_model.json", clean_json);
    write_file(out / "models" / "backdoored_model.json", backdoored_json);
    write_file(out / "plans" / "poison_plan.json", plan_json);
    write_file(out / "reports" / "report.json", report_to_json(result.report) + "\n");
    write_file(out / "reports" / "report.csv", report_to_csv(result.report));
    if (other) {
      write_file(out / "models" / (std::string("backdoored_model_") + to_string(other->plan.injection.mechanism) + ".json"),
                 checkpoint_to_json(other->backdoored));
      write_file(out / "plans" / (std::string("poison_plan_") + to_string(other->plan.injection.mechanism) + ".json"),
                 plan_to_json(other->plan));
      write_file(out / "reports" / "comparison.csv", comparison_to_csv(result.comparison));
      ojson cmp = ojson::array();
      for (const auto& r : result.comparison) cmp.push_back(ojson::parse(report_to_json(r)));
      write_file(out / "reports" / "comparison.json", cmp.dump(2) + "\n");
    }
    if (result.rs) write_file(out / "reports" / "rs_curve.csv", curve_to_csv(*result.rs));
    if (result.fp) write_file(out / "reports" / "fp_curve.csv", curve_to_csv(*result.fp));
    if (result.sweep) {
      write_file(out / "reports" / "sweep.json", sweep_to_json(*result.sweep) + "\n");
      write_file(out / "reports" / "sweep.csv", sweep_to_csv(*result.sweep));
      if (!result.sweep->second_values.empty())
        write_file(out / "reports" / "sweep_heatmap.csv", sweep_heatmap_csv(*result.sweep));
    }

    ojson manifest;
    manifest["format"] = "mtgb-manifest";
    manifest["version"] = kVersion;
    manifest["git"] = MTGB_GIT_DESCRIBE;
    manifest["resolved_config"] = config_json(resolved);
    manifest["config_hash"] = hex(config_hash(resolved));
    manifest["hashes"] = ojson{{"dataset", hex(hash_dataset(data.full))},
                               {"train", hex(hash_dataset(data.split.train))},
                               {"test", hex(hash_dataset(data.split.test))},
                               {"poison_plan", hex(fnv1a(plan_json))},
                               {"clean_model", hex(fnv1a(clean_json))},
                               {"backdoored_model", hex(fnv1a(backdoored_json))}};
    manifest["warnings"] = attack.plan.warnings;
    ojson t;
    for (const auto& [k, v] : timings) t[k] = v;
    t["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    manifest["timings_s"] = t;
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
  });
  return result;
}

}  // namespace mtgb
