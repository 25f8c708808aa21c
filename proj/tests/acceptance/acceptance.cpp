// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails. Criteria 5, 6, 7, 10 and 11 train full models
// and take several minutes on one core.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "mtgb/experiment.hpp"
#include "trigger_fixtures.hpp"

namespace fs = std::filesystem;
using namespace mtgb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

std::string asr_list(const AttackReport& r) {
  std::string s;
  for (double a : r.asr()) s += (s.empty() ? "" : "/") + fmt(a);
  return s;
}

const fs::path kOut = fs::current_path() / "acceptance_out";

// The desk-scale fixture: 4 classes x 300 graphs, 30 nodes on average, d=3,
// class separation 1.5, GIN with training defaults, attack defaults.
ExperimentConfig fixture(const std::string& name) {
  ExperimentConfig c = default_config();
  c.seed = 7;
  c.dataset.synthetic = {4, 300, 30, 3, 1.5, 7};
  c.dataset.synthetic_seed_set = true;
  c.model.arch = Arch::gin;
  c.threads = 1;
  c.output_dir = (kOut / name).string();
  return c;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto graphs = testing::small_graphs(2024, 20, 3, 3);
  const auto batch = testing::samples_of(graphs);
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0, redraws = 0;
  for (Arch arch : {Arch::gcn, Arch::gin, Arch::sage})
    for (int layers : {2, 3}) {
      ModelConfig c;
      c.arch = arch;
      c.num_layers = layers;
      c.hidden_dim = 8;
      c.num_classes = 3;
      c.input_dim = 3;
      c.learn_eps = arch == Arch::gin;
      // A parameter draw that puts some ReLU input within h of zero is not a
      // differentiable test point; draw again.
      std::uint64_t seed = 31 + static_cast<std::uint64_t>(layers);
      auto r = testing::grad_check(testing::randomized_model(c, seed), batch, 1e-5);
      while (r.kinks > 0 && redraws < 50) {
        ++redraws;
        seed += 1000;
        r = testing::grad_check(testing::randomized_model(c, seed), batch, 1e-5);
      }
      if (r.kinks > 0) return Outcome{false, "no kink-free parameter draw found"};
      checked += r.checked;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = std::string(to_string(arch)) + "/" + std::to_string(layers) + " " + r.worst_param;
      }
    }
  const double s = seconds_since(t0);
  return {worst <= 1e-4 && s < 30.0, std::to_string(checked) + " scalars, max rel error " + fmt(worst * 1e6, 3) +
                                         "e-6 (" + where + "), " + std::to_string(redraws) +
                                         " kinked draws replaced, " + fmt(s, 1) + " s"};
}

Outcome injection_arithmetic() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(99);
  const InjectionStrategy strategies[] = {InjectionStrategy::random, InjectionStrategy::highest_degree,
                                          InjectionStrategy::lowest_degree, InjectionStrategy::highest_similarity,
                                          InjectionStrategy::lowest_similarity};
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + uniform_index(rng, 3);
    const Graph host = testing::random_graph(rng, 1 + uniform_index(rng, 40), 0.2, d);
    Trigger trig;
    trig.graph = testing::random_graph(rng, 2 + uniform_index(rng, 8), 0.6, d);
    InjectionOptions opts;
    opts.k = 1 + uniform_index(rng, trig.num_nodes());
    opts.strategy = strategies[uniform_index(rng, 5)];
    opts.distinct_host_anchors = t % 4 == 0 && opts.k <= host.num_nodes();
    const Graph out = inject(host, trig, opts, rng);
    const bool ok = out.num_nodes() == host.num_nodes() + trig.num_nodes() &&
                    out.num_edges() == host.num_edges() + trig.num_edges() + opts.k &&
                    strip_trigger(out, host.num_nodes()) == host;
    bad += !ok;
  }
  const double s = seconds_since(t0);
  return {bad == 0 && s < 5.0, std::to_string(1000 - bad) + "/1000 cases, " + fmt(s, 2) + " s"};
}

Outcome trigger_density() {
  std::size_t bad = 0, cases = 0;
  for (std::size_t n = 2; n <= 60; ++n)
    for (int k = 1; k <= 10; ++k) {
      // Integer oracle for round-half-up of k n (n - 1) / 20.
      const std::size_t want = (static_cast<std::size_t>(k) * n * (n - 1) + 10) / 20;
      if (want == 0) continue;  // no edges: rejected as degenerate, nothing to count
      ++cases;
      const Trigger t = generate_trigger(testing::spec_for(static_cast<double>(n) / 100.0, k / 10.0, n * 31 + k),
                                         testing::stats_with(100.0), 0, 0);
      bad += t.num_nodes() != n || t.num_edges() != want;
    }
  std::size_t golden_bad = 0;
  for (const auto& [file, actual] : testing::golden_trigger_families())
    golden_bad += testing::read_file(testing::golden_dir() / file) != actual;
  return {bad == 0 && golden_bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) +
                                           " grid points exact, golden mismatches " + std::to_string(golden_bad)};
}

Outcome parser_round_trip() {
  const fs::path tu = testing::fixture_dir() / "tu";
  std::size_t bad = 0;
  Rng rng(41);
  for (int t = 0; t < 50; ++t) {
    const int classes = 2 + static_cast<int>(uniform_index(rng, 4));
    const std::size_t d = 1 + uniform_index(rng, 4);
    GraphDataset ds = testing::random_dataset(rng, 5 + uniform_index(rng, 30), classes, d);
    if (t % 5 == 0) ds = relabel_to_degree_features(ds);
    bad += !(parse_tu(serialize_tu(ds, "R")) == ds);
  }
  for (const char* name : {"TINY", "LABELS", "PLAIN"}) {
    const GraphDataset ds = parse_tu(tu, name);
    bad += !(parse_tu(serialize_tu(ds, name)) == ds);
  }
  struct Case {
    const char* name;
    const char* file;
    std::size_t line;
  };
  const Case malformed[] = {{"DANGLING", "DANGLING_A.txt", 4},
                            {"NONCONTIG", "NONCONTIG_graph_indicator.txt", 3},
                            {"BADLINE", "BADLINE_A.txt", 2},
                            {"LABELCOUNT", "LABELCOUNT_graph_labels.txt", 3},
                            {"BLANK", "BLANK_graph_indicator.txt", 2},
                            {"CROSS", "CROSS_A.txt", 2},
                            {"BADATTR", "BADATTR_node_attributes.txt", 2},
                            {"MISSING", "MISSING_graph_labels.txt", 0}};
  std::size_t wrong_errors = 0;
  for (const Case& c : malformed) {
    try {
      parse_tu(tu, c.name);
      ++wrong_errors;
    } catch (const ParseError& e) {
      wrong_errors += e.file() != c.file || e.line() != c.line;
    }
  }
  return {bad == 0 && wrong_errors == 0, "53 round trips, " + std::to_string(bad) + " mismatches; " +
                                             std::to_string(std::size(malformed) - wrong_errors) + "/" +
                                             std::to_string(std::size(malformed)) + " malformed fixtures located"};
}

Outcome attack_thresholds(const AttackReport& r, double min_asr, double max_cad, double secs, double max_secs) {
  double lo = 1.0;
  for (double a : r.asr()) lo = std::min(lo, a);
  return {lo >= min_asr && r.cad <= max_cad && secs <= max_secs,
          "ASR " + asr_list(r) + " (need >= " + fmt(min_asr, 2) + "), CAD " + fmt(r.cad) + " (need <= " +
              fmt(max_cad, 2) + "), clean CA " + fmt(r.clean_model_accuracy) + ", " + fmt(secs, 0) + " s"};
}

Outcome replacement_comparison() {
  ExperimentConfig c = fixture("c6");
  c.attack.compare_mechanisms = true;
  const RunResult r = run(c);
  const fs::path csv = fs::path(c.output_dir) / "reports" / "comparison.csv";
  const std::string text = testing::read_file(csv);
  const bool shaped = r.comparison.size() == 2 && r.comparison[0].mechanism == "injection" &&
                      r.comparison[1].mechanism == "replacement" &&
                      text.find("replacement") != std::string::npos && text.find("ASR_3") != std::string::npos;
  std::string detail;
  for (const AttackReport& a : r.comparison)
    detail += a.mechanism + " ASR " + asr_list(a) + " CAD " + fmt(a.cad) + "; ";
  return {shaped, detail + "table at " + csv.string()};
}

Outcome smoothing_identity(const ExperimentConfig& resolved, const TrainedModel& model) {
  const PreparedData data = prepare_data(resolved);
  std::size_t mismatches = 0;
  const GraphDataset& test = data.split.test;
  for (std::size_t i = 0; i < test.size(); ++i)
    mismatches += smooth_predict(model, test[i], {10, 0.0, 5}, i) != predict(model, test[i]);
  Rng rng(8);
  std::size_t vote_bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t c = 2 + uniform_index(rng, 9);
    std::vector<int> samples(1 + uniform_index(rng, 100));
    for (int& s : samples) s = static_cast<int>(uniform_index(rng, c));
    std::vector<int> hist(c, 0);
    for (int s : samples) ++hist[static_cast<std::size_t>(s)];
    int best = 0;
    for (std::size_t y = 1; y < c; ++y)
      if (hist[y] > hist[static_cast<std::size_t>(best)]) best = static_cast<int>(y);
    vote_bad += majority_vote(hist) != best;
  }
  return {mismatches == 0 && vote_bad == 0, std::to_string(test.size() - mismatches) + "/" +
                                                std::to_string(test.size()) + " test graphs identical at sigma 0, " +
                                                std::to_string(10000 - vote_bad) + "/10000 vote sets"};
}

Outcome pruning_identity(const ExperimentConfig& resolved, const TrainedModel& model) {
  const PreparedData data = prepare_data(resolved);
  PruneConfig cfg;
  cfg.finetune.epochs = 0;
  const PruneResult same = fine_prune(model, data.split.train, cfg);
  const bool identical = bitwise_equal(same.model, model);
  cfg.prune_ratio = 0.5;
  const PruneResult half = fine_prune(model, data.split.train, cfg);
  const int last = model.config.num_layers - 1;
  const auto& units = half.pruned_units[static_cast<std::size_t>(last)];
  std::size_t nonzero = 0;
  for (const Graph& g : data.split.test.graphs()) {
    const auto a = activations(half.model, g, last);
    for (std::size_t u : units) nonzero += a[u] != 0.0;
  }
  return {identical && units.size() == 32 && model.config.hidden_dim == 64 && nonzero == 0,
          std::string(identical ? "bit-identical" : "CHANGED") + " at ratio 0; ratio 0.5 zeroed " +
              std::to_string(units.size()) + "/" + std::to_string(model.config.hidden_dim) + " units, " +
              std::to_string(nonzero) + " nonzero activations"};
}

Outcome ratio_trend() {
  ExperimentConfig c = fixture("c11");
  c.sweep = SweepConfig{"poisoning_ratio", {"0.01", "0.05", "0.20"}, {}};
  const RunResult r = run(c);
  const auto& cells = r.sweep->cells;
  bool ok = cells.size() == 3;
  std::string detail;
  for (const SweepCell& cell : cells) {
    ok = ok && cell.status == CellStatus::ok;
    detail += "r=" + cell.value + " mean ASR " + fmt(cell.report.mean_asr) + " CAD " + fmt(cell.report.cad) + "; ";
  }
  if (ok) {
    for (std::size_t i = 1; i < cells.size(); ++i)
      ok = ok && cells[i].report.mean_asr >= cells[i - 1].report.mean_asr - 0.02;
    ok = ok && cells[2].report.cad >= cells[0].report.cad;
  }
  return {ok, detail};
}

}  // namespace

int main() {
  fs::remove_all(kOut);
  int failures = 0;
  auto report = [&](int n, const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient oracle", gradients);
  report(2, "injection arithmetic", injection_arithmetic);
  report(3, "trigger density", trigger_density);
  report(4, "parser round trip", parser_round_trip);

  std::optional<RunResult> main_run;
  double main_secs = 0.0;
  report(5, "desk-scale injection attack", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    main_run = run(fixture("c5"));
    main_secs = seconds_since(t0);
    return attack_thresholds(main_run->report, 0.90, 0.05, main_secs, 600.0);
  });
  report(6, "replacement comparison", replacement_comparison);
  report(7, "four targets", [] {
    ExperimentConfig c = fixture("c7");
    c.attack.n_targets = 4;
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run(c);
    return attack_thresholds(r.report, 0.85, 0.08, seconds_since(t0), 1e9);
  });

  const fs::path c5 = kOut / "c5";
  auto resolved = [&] { return load_config(c5 / "manifest.json"); };
  auto backdoored = [&] { return load_checkpoint(c5 / "models" / "backdoored_model.json"); };
  report(8, "smoothing identity", [&] { return smoothing_identity(resolved(), backdoored()); });
  report(9, "fine-pruning identity", [&] { return pruning_identity(resolved(), backdoored()); });
  report(10, "deterministic replay", [&] {
    run(fixture("c10"));
    const std::string a = testing::read_file(c5 / "reports" / "report.json");
    const std::string b = testing::read_file(kOut / "c10" / "reports" / "report.json");
    return Outcome{!a.empty() && a == b, "report.json " + std::to_string(a.size()) + " bytes, " +
                                             (a == b ? "byte-identical" : "DIFFERS")};
  });
  report(11, "poisoning-ratio trend", ratio_trend);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
