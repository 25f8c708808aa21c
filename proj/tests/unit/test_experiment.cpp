#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtgb/experiment.hpp"

namespace mtgb {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Defaults, AttackValues) {
  const auto j = nlohmann::json::parse(attack_defaults_json());
  EXPECT_EQ(j.at("n_targets"), 3);
  EXPECT_EQ(j.at("poisoning_ratio"), 0.05);
  EXPECT_EQ(j.at("k"), 1);
  EXPECT_EQ(j.at("strategy"), "random");
  EXPECT_EQ(j.at("mechanism"), "injection");
  const std::string text = attack_defaults_json();
  for (const char* v : {"0.2", "0.1", "150", "0.8"}) EXPECT_NE(text.find(v), std::string::npos) << v;
}

TEST(Defaults, DefaultConfigIsValid) { EXPECT_TRUE(validate(default_config()).empty()); }

TEST(ConfigJson, RoundTrip) {
  ExperimentConfig c = default_config();
  c.seed = 99;
  c.model.arch = Arch::sage;
  c.attack.targets = {2, 0};
  c.attack.trigger.edge_density = 0.4;
  c.rs.enabled = true;
  c.sweep = SweepConfig{"k", {"1", "2"}, {}};
  const std::string once = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(once)), once);
}

void expect_config_error(const std::string& json, const std::string& field) {
  try {
    config_from_json(json);
    FAIL() << "expected ConfigError for " << json;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), field) << e.what();
  }
}

TEST(ConfigJson, StrictParsing) {
  expect_config_error(R"({"schema_version":1,"attack":{"poisoning_ration":0.1}})", "attack.poisoning_ration");
  expect_config_error(R"({"schema_version":1,"model":{"hidden_dim":"64"}})", "model.hidden_dim");
  expect_config_error(R"({"schema_version":1,"model":{"arch":"gat"}})", "model.arch");
  expect_config_error(R"({"schema_version":2})", "schema_version");
  expect_config_error("{not json", "<root>");
}

TEST(ConfigHash, IgnoresOutputDirAndThreads) {
  ExperimentConfig a = default_config();
  ExperimentConfig b = a;
  b.output_dir = "/elsewhere";
  b.threads = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.attack.k = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
}

bool has_field(const std::vector<Diagnostic>& ds, const std::string& prefix) {
  for (const Diagnostic& d : ds)
    if (d.field.rfind(prefix, 0) == 0) return true;
  return false;
}

TEST(Validate, OversubscribedTenTargets) {
  ExperimentConfig c = default_config();
  c.dataset.synthetic = {10, 20, 10, 5, 1.5, 1};
  c.dataset.synthetic_seed_set = true;
  c.attack.n_targets = 10;
  c.attack.poisoning_ratio = 0.3;
  const auto ds = validate(c);
  ASSERT_TRUE(has_field(ds, "attack.poisoning_ratio"));
  bool mentions = false;
  for (const Diagnostic& d : ds) mentions = mentions || d.message.find("oversubscribed") != std::string::npos;
  EXPECT_TRUE(mentions);
}

TEST(Validate, MissingTuFile) {
  ExperimentConfig c = default_config();
  c.dataset.source = "tu";
  c.dataset.tu_path = "/nonexistent/dir";
  c.dataset.tu_name = "NOPE";
  EXPECT_TRUE(has_field(validate(c), "dataset"));
}

TEST(Validate, RangeChecks) {
  ExperimentConfig c = default_config();
  c.attack.poisoning_ratio = 1.5;
  c.attack.k = 0;
  c.model.num_layers = 0;
  const auto ds = validate(c);
  EXPECT_TRUE(has_field(ds, "attack.poisoning_ratio"));
  EXPECT_TRUE(has_field(ds, "attack.k"));
  EXPECT_TRUE(has_field(ds, "model.num_layers"));
  c.attack.targets = {0, 7};
  c.attack.poisoning_ratio = 0.05;
  c.attack.k = 1;
  c.model.num_layers = 2;
  EXPECT_TRUE(has_field(validate(c), "attack.targets"));
}

ExperimentConfig tiny_run(const fs::path& out) {
  ExperimentConfig c = default_config();
  c.seed = 3;
  c.dataset.synthetic = {3, 20, 25, 2, 2.0, 3};
  c.model.arch = Arch::gin;
  c.model.num_layers = 2;
  c.model.hidden_dim = 8;
  c.train.epochs = 2;
  c.attack.n_targets = 2;
  c.attack.poisoning_ratio = 0.2;
  c.attack.compare_mechanisms = true;
  c.rs.enabled = true;
  c.rs.n_samples = 3;
  c.rs.sigmas = {0.0, 0.5};
  c.fp.enabled = true;
  c.fp.finetune_epochs = 1;
  c.fp.ratios = {0.0, 0.5};
  c.sweep = SweepConfig{"poisoning_ratio", {"0.1", "0.2"}, {}};
  c.output_dir = out.string();
  return c;
}

TEST(Run, WritesArtifactsAndReplaysFromManifest) {
  const fs::path base = fs::temp_directory_path() / "mtgb_run_test";
  fs::remove_all(base);
  const RunResult r = run(tiny_run(base / "a"));
  EXPECT_EQ(r.report.targets.size(), 2u);
  ASSERT_EQ(r.comparison.size(), 2u);
  EXPECT_EQ(r.comparison[0].mechanism, "injection");
  EXPECT_EQ(r.comparison[1].mechanism, "replacement");
  ASSERT_TRUE(r.rs && r.fp && r.sweep);
  for (const char* f : {"manifest.json", "models/clean_model.json", "models/backdoored_model.json",
                        "plans/poison_plan.json", "reports/report.json", "reports/report.csv",
                        "reports/comparison.csv", "reports/rs_curve.csv", "reports/fp_curve.csv",
                        "reports/sweep.json", "reports/sweep.csv"})
    EXPECT_TRUE(fs::exists(base / "a" / f)) << f;

  const auto manifest = nlohmann::json::parse(slurp(base / "a" / "manifest.json"));
  for (const char* k : {"version", "git", "resolved_config", "config_hash", "hashes", "timings_s"})
    EXPECT_TRUE(manifest.contains(k)) << k;

  ExperimentConfig replay = config_from_json(manifest.dump());
  replay.output_dir = (base / "b").string();
  run(replay);
  EXPECT_EQ(slurp(base / "a" / "reports/report.json"), slurp(base / "b" / "reports/report.json"));
  fs::remove_all(base);
}

TEST(Run, InvalidConfigRaisesConfigError) {
  ExperimentConfig c = tiny_run(fs::temp_directory_path() / "mtgb_run_bad");
  c.attack.k = 0;
  EXPECT_THROW(run(c), ConfigError);
}

}  // namespace
}  // namespace mtgb
