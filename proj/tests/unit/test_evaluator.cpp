#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "mtgb/error.hpp"
#include "mtgb/evaluator.hpp"

namespace mtgb {
namespace {

// Every parameter zero except the head bias, so the prediction is `cls` on
// every input.
TrainedModel constant_model(int cls, int classes = 3) {
  ModelConfig c;
  c.arch = Arch::sage;
  c.num_layers = 2;
  c.hidden_dim = 4;
  c.num_classes = classes;
  c.input_dim = 3;
  TrainedModel m = init_model(c);
  m.params.set_zero();
  m.params.at("head.bias").values()[static_cast<std::size_t>(cls)] = 1.0;
  return m;
}

GraphDataset graphs(std::uint64_t seed, std::size_t n) {
  return GraphDataset(testing::small_graphs(seed, n, 3, 3), 3, 3, FeatureKind::intrinsic);
}

TEST(Asr, ConstantModel) {
  const GraphDataset ds = graphs(1, 12);
  EXPECT_EQ(attack_success_rate(constant_model(2), ds, 2), 1.0);
  EXPECT_EQ(attack_success_rate(constant_model(2), ds, 0), 0.0);
  EXPECT_THROW(attack_success_rate(constant_model(2), graphs(1, 0), 0), EmptyInputError);
}

TEST(Asr, SevenOfTen) {
  std::vector<int> pred{1, 1, 0, 1, 1, 2, 1, 1, 0, 1};
  EXPECT_DOUBLE_EQ(hit_fraction(pred, 1), 0.7);
}

TEST(CleanAccuracy, MatchesLabels) {
  const GraphDataset ds = graphs(2, 30);
  std::size_t ones = ds.indices_of_class(1).size();
  EXPECT_DOUBLE_EQ(clean_accuracy(constant_model(1), ds), static_cast<double>(ones) / 30.0);
}

Trigger small_trigger(int target) {
  Trigger t;
  t.target_class = target;
  t.trigger_id = target;
  t.graph = Graph(3, {{0, 1}, {1, 2}}, Matrix(3, 3, 0.5), target);
  return t;
}

TEST(FullAttackEval, IdentitiesAndRecount) {
  const GraphDataset test = graphs(3, 40);
  const auto clean = testing::randomized_model(constant_model(0).config, 4);
  const auto back = testing::randomized_model(constant_model(0).config, 5);
  const std::vector<Trigger> ts{small_trigger(0), small_trigger(2)};
  const AttackReport r = full_attack_eval(clean, back, test, ts, {}, 9);
  ASSERT_EQ(r.targets.size(), 2u);
  EXPECT_DOUBLE_EQ(r.cad, r.clean_model_accuracy - r.clean_accuracy);
  EXPECT_DOUBLE_EQ(r.mean_asr, (r.targets[0].asr + r.targets[1].asr) / 2.0);
  EXPECT_DOUBLE_EQ(r.clean_accuracy, accuracy_of(r.clean_predictions, test));
  EXPECT_DOUBLE_EQ(r.clean_model_accuracy, accuracy_of(r.clean_model_predictions, test));
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(r.targets[j].predictions.size(), test.size());
    EXPECT_DOUBLE_EQ(r.targets[j].asr, hit_fraction(r.targets[j].predictions, ts[j].target_class));
  }
  EXPECT_EQ(r.asr(), (std::vector<double>{r.targets[0].asr, r.targets[1].asr}));
}

TEST(FullAttackEval, SameModelHasZeroCad) {
  const GraphDataset test = graphs(6, 25);
  const auto m = testing::randomized_model(constant_model(0).config, 4);
  EXPECT_EQ(full_attack_eval(m, m, test, {small_trigger(1)}, {}, 1).cad, 0.0);
}

TEST(FullAttackEval, ExcludeTargetClassDropsThoseGraphs) {
  const GraphDataset test = graphs(7, 30);
  const auto m = constant_model(1);
  const AttackReport r = full_attack_eval(m, m, test, {small_trigger(1)}, {}, 1, true);
  EXPECT_EQ(r.targets[0].predictions.size(), test.size() - test.indices_of_class(1).size());
}

TEST(Report, JsonRoundTrip) {
  const auto m = testing::randomized_model(constant_model(0).config, 4);
  AttackReport r = full_attack_eval(m, constant_model(2), graphs(8, 10), {small_trigger(2), small_trigger(0)}, {}, 3);
  r.config_hash = 0xfeedfacecafebeefULL;
  const AttackReport back = report_from_json(report_to_json(r));
  EXPECT_EQ(report_to_json(back), report_to_json(r));
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(back.asr(), r.asr());
}

TEST(Report, CsvColumns) {
  const auto m = constant_model(0);
  const AttackReport r = full_attack_eval(m, m, graphs(9, 10), {small_trigger(0), small_trigger(1)}, {}, 3);
  const std::string csv = report_to_csv(r);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 6);
  EXPECT_NE(header.find("ASR_2"), std::string::npos);
  const std::string both = comparison_to_csv({r, r});
  EXPECT_EQ(std::count(both.begin(), both.end(), '\n'), 3);
}

AttackReport stub_report(double asr, double cad) {
  AttackReport r;
  r.targets = {{0, asr, {}}, {1, asr, {}}};
  r.mean_asr = asr;
  r.cad = cad;
  r.clean_accuracy = 1.0 - cad;
  r.clean_model_accuracy = 1.0;
  return r;
}

TEST(Sweep, OneReportPerValue) {
  std::vector<std::size_t> seen;
  const SweepGrid g = sweep("k", {"1", "2", "3", "4", "5"}, {},
                            [&](const std::string& v, const std::string&, std::size_t i) {
                              seen.push_back(i);
                              return stub_report(std::stod(v) / 10.0, 0.0);
                            });
  ASSERT_EQ(g.cells.size(), 5u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(g.cells[4].report.mean_asr, 0.5);
  const std::string csv = sweep_to_csv(g);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Sweep, FailedCellIsRecordedAndSweepContinues) {
  const SweepGrid g = sweep("n_targets", {"2", "10", "3"}, {},
                            [](const std::string& v, const std::string&, std::size_t) {
                              if (v == "10") throw OversubscriptionError("class 0 exhausted", 0);
                              return stub_report(1.0, 0.0);
                            });
  ASSERT_EQ(g.cells.size(), 3u);
  EXPECT_EQ(g.cells[0].status, CellStatus::ok);
  EXPECT_EQ(g.cells[1].status, CellStatus::failed);
  EXPECT_NE(g.cells[1].error.find("exhausted"), std::string::npos);
  EXPECT_EQ(g.cells[2].status, CellStatus::ok);
  EXPECT_NE(sweep_to_json(g).find("failed"), std::string::npos);
}

TEST(Sweep, TwoDimensionalHeatmap) {
  const SweepGrid g = sweep("trigger_size_x_edge_density", {"0.1", "0.2"}, {"0.2", "0.5", "0.8"},
                            [](const std::string& a, const std::string& b, std::size_t) {
                              return stub_report(std::stod(a) * std::stod(b), 0.0);
                            });
  ASSERT_EQ(g.cells.size(), 6u);
  EXPECT_EQ(g.cells[1].value, "0.1");
  EXPECT_EQ(g.cells[1].second_value, "0.5");
  const std::string heat = sweep_heatmap_csv(g);
  EXPECT_EQ(std::count(heat.begin(), heat.end(), '\n'), 3);
}

TEST(Sweep, UnknownParameterThrows) {
  EXPECT_THROW(sweep("learning_rate", {"1"}, {}, [](auto&&...) { return AttackReport{}; }), ArgumentError);
}

}  // namespace
}  // namespace mtgb
