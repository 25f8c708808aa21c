#include "mtgb/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "mtgb/error.hpp"

namespace mtgb {

double hit_fraction(const std::vector<int>& predictions, int target) {
  if (predictions.empty()) throw EmptyInputError("hit_fraction: no predictions");
  return static_cast<double>(std::count(predictions.begin(), predictions.end(), target)) /
         static_cast<double>(predictions.size());
}

double accuracy_of(const std::vector<int>& predictions, const GraphDataset& truth) {
  if (predictions.empty()) throw EmptyInputError("accuracy_of: no predictions");
  if (predictions.size() != truth.size()) throw ArgumentError("accuracy_of: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i].label();
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double attack_success_rate(const TrainedModel& model, const GraphDataset& poisoned_test, int target) {
  if (poisoned_test.empty()) throw EmptyInputError("attack_success_rate: empty poisoned test set");
  return hit_fraction(predict_all(model, poisoned_test), target);
}

double clean_accuracy(const TrainedModel& model, const GraphDataset& test) {
  if (test.empty()) throw EmptyInputError("clean_accuracy: empty test set");
  return accuracy_of(predict_all(model, test), test);
}

std::vector<double> AttackReport::asr() const {
  std::vector<double> out;
  for (const auto& t : targets) out.push_back(t.asr);
  return out;
}

AttackReport full_attack_eval(const TrainedModel& clean_model, const TrainedModel& backdoored_model,
                              const GraphDataset& test, const std::vector<Trigger>& triggers,
                              const InjectionOptions& opts, std::uint64_t seed,
                              bool exclude_target_class) {
  if (test.empty()) throw EmptyInputError("full_attack_eval: empty test set");
  AttackReport r;
  r.mechanism = to_string(opts.mechanism);
  for (const Trigger& t : triggers) {
    const GraphDataset poisoned = poison_test_set(test, t, opts, seed, exclude_target_class);
    TargetResult tr;
    tr.target_class = t.target_class;
    tr.predictions = predict_all(backdoored_model, poisoned);
    tr.asr = hit_fraction(tr.predictions, t.target_class);
    r.targets.push_back(std::move(tr));
  }
  r.clean_predictions = predict_all(backdoored_model, test);
  r.clean_model_predictions = predict_all(clean_model, test);
  r.clean_accuracy = accuracy_of(r.clean_predictions, test);
  r.clean_model_accuracy = accuracy_of(r.clean_model_predictions, test);
  r.cad = r.clean_model_accuracy - r.clean_accuracy;
  double sum = 0.0;
  for (const auto& t : r.targets) sum += t.asr;
  r.mean_asr = r.targets.empty() ? 0.0 : sum / static_cast<double>(r.targets.size());
  return r;
}

namespace {

nlohmann::json report_json(const AttackReport& r) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"target_class", t.target_class}, {"asr", t.asr}, {"predictions", t.predictions}});
  return {{"mechanism", r.mechanism},
          {"targets", targets},
          {"clean_accuracy", r.clean_accuracy},
          {"clean_model_accuracy", r.clean_model_accuracy},
          {"cad", r.cad},
          {"mean_asr", r.mean_asr},
          {"clean_predictions", r.clean_predictions},
          {"clean_model_predictions", r.clean_model_predictions},
          {"config_hash", r.config_hash}};
}

AttackReport report_from(const nlohmann::json& j) {
  AttackReport r;
  r.mechanism = j.at("mechanism").get<std::string>();
  for (const auto& t : j.at("targets"))
    r.targets.push_back({t.at("target_class").get<int>(), t.at("asr").get<double>(),
                         t.at("predictions").get<std::vector<int>>()});
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.clean_model_accuracy = j.at("clean_model_accuracy").get<double>();
  r.cad = j.at("cad").get<double>();
  r.mean_asr = j.at("mean_asr").get<double>();
  r.clean_predictions = j.at("clean_predictions").get<std::vector<int>>();
  r.clean_model_predictions = j.at("clean_model_predictions").get<std::vector<int>>();
  r.config_hash = j.at("config_hash").get<std::uint64_t>();
  return r;
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

// Joins rows of cells into columns padded to the widest cell.
std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) out << "," << std::string(width[c] - row[c].size(), ' ');
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::string> report_header(std::size_t m) {
  std::vector<std::string> h{"mechanism", "clean_model_CA"};
  for (std::size_t j = 0; j < m; ++j) h.push_back("ASR_" + std::to_string(j + 1));
  h.insert(h.end(), {"CA", "CAD", "mean_ASR"});
  return h;
}

std::vector<std::string> report_row(const AttackReport& r, std::size_t m) {
  std::vector<std::string> row{r.mechanism, pct(r.clean_model_accuracy)};
  for (std::size_t j = 0; j < m; ++j) row.push_back(j < r.targets.size() ? pct(r.targets[j].asr) : "");
  row.insert(row.end(), {pct(r.clean_accuracy), pct(r.cad), pct(r.mean_asr)});
  return row;
}

}  // namespace

std::string report_to_json(const AttackReport& r) { return report_json(r).dump(2); }

AttackReport report_from_json(const std::string& json) { return report_from(nlohmann::json::parse(json)); }

std::string report_to_csv(const AttackReport& r) {
  return aligned({report_header(r.targets.size()), report_row(r, r.targets.size())});
}

std::string comparison_to_csv(const std::vector<AttackReport>& reports) {
  std::size_t m = 0;
  for (const auto& r : reports) m = std::max(m, r.targets.size());
  std::vector<std::vector<std::string>> rows{report_header(m)};
  for (const auto& r : reports) rows.push_back(report_row(r, m));
  return aligned(rows);
}

SweepGrid sweep(const std::string& parameter, const std::vector<std::string>& values,
                const std::vector<std::string>& second_values, const SweepPipeline& pipeline) {
  const auto& known = sweep_parameters();
  if (std::find(known.begin(), known.end(), parameter) == known.end())
    throw ArgumentError("unknown sweep parameter '" + parameter + "'");
  const bool two_d = parameter == "trigger_size_x_edge_density";
  if (two_d && second_values.empty())
    throw ArgumentError("2-D sweep needs second_values");
  SweepGrid grid;
  grid.parameter = parameter;
  grid.values = values;
  if (two_d) grid.second_values = second_values;
  const std::vector<std::string> cols = two_d ? second_values : std::vector<std::string>{""};
  std::size_t index = 0;
  for (const auto& v : values)
    for (const auto& w : cols) {
      SweepCell cell;
      cell.value = v;
      cell.second_value = w;
      try {
        cell.report = pipeline(v, w, index);
      } catch (const std::exception& e) {
        cell.status = CellStatus::failed;
        cell.error = e.what();
      }
      grid.cells.push_back(std::move(cell));
      ++index;
    }
  return grid;
}

std::string sweep_to_json(const SweepGrid& grid) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : grid.cells) {
    nlohmann::json j = {{"value", c.value},
                        {"status", c.status == CellStatus::ok ? "ok" : "failed"},
                        {"error", c.error}};
    if (!c.second_value.empty()) j["second_value"] = c.second_value;
    if (c.status == CellStatus::ok) j["report"] = report_json(c.report);
    cells.push_back(std::move(j));
  }
  return nlohmann::json{{"parameter", grid.parameter},
                        {"values", grid.values},
                        {"second_values", grid.second_values},
                        {"cells", cells}}
      .dump(2);
}

std::string sweep_to_csv(const SweepGrid& grid) {
  std::size_t m = 0;
  for (const auto& c : grid.cells) m = std::max(m, c.report.targets.size());
  const bool two_d = !grid.second_values.empty();
  std::vector<std::string> header{grid.parameter};
  if (two_d) header.push_back("second_value");
  header.insert(header.end(), {"status", "CA", "CAD", "mean_ASR"});
  for (std::size_t j = 0; j < m; ++j) header.push_back("ASR_" + std::to_string(j + 1));
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& c : grid.cells) {
    std::vector<std::string> row{c.value};
    if (two_d) row.push_back(c.second_value);
    const bool ok = c.status == CellStatus::ok;
    row.push_back(ok ? "ok" : "failed");
    row.push_back(ok ? pct(c.report.clean_accuracy) : "");
    row.push_back(ok ? pct(c.report.cad) : "");
    row.push_back(ok ? pct(c.report.mean_asr) : "");
    for (std::size_t j = 0; j < m; ++j)
      row.push_back(ok && j < c.report.targets.size() ? pct(c.report.targets[j].asr) : "");
    rows.push_back(std::move(row));
  }
  return aligned(rows);
}

std::string sweep_heatmap_csv(const SweepGrid& grid) {
  if (grid.second_values.empty()) throw ArgumentError("heat map needs a 2-D sweep");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{grid.parameter};
  header.insert(header.end(), grid.second_values.begin(), grid.second_values.end());
  rows.push_back(header);
  std::size_t k = 0;
  for (const auto& v : grid.values) {
    std::vector<std::string> row{v};
    for (std::size_t c = 0; c < grid.second_values.size(); ++c, ++k) {
      const auto& cell = grid.cells[k];
      row.push_back(cell.status == CellStatus::ok ? pct(cell.report.mean_asr) : "failed");
    }
    rows.push_back(std::move(row));
  }
  return aligned(rows);
}

}  // namespace mtgb
