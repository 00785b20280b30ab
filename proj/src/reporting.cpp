#include "deeplde/reporting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "deeplde/errors.hpp"
#include "deeplde/io.hpp"

namespace deeplde {

Predictor model_predictor(const Mlp& model, const EqualityCompleter* completer) {
  return [&model, completer](std::span<const double> d, std::size_t) {
    return predict_solution(model, completer, d);
  };
}

Predictor label_predictor(const std::vector<Vector>& labels) {
  return [&labels](std::span<const double>, std::size_t index) {
    if (index >= labels.size()) throw DimensionMismatch("no label for sample " + std::to_string(index));
    return labels[index];
  };
}

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ViolationReport evaluate(const Dataset& dataset, IndexRange range, const Predictor& predictor,
                         const EvaluateOptions& options) {
  const ProblemInstance& inst = dataset.instance;
  if (range.hi > dataset.samples.size() || range.lo > range.hi)
    throw DimensionMismatch("evaluation range outside the dataset");
  if (options.oracle_objectives && options.oracle_objectives->size() != range.size())
    throw DimensionMismatch("oracle objectives must match the evaluated range");

  std::vector<Vector> predictions;
  predictions.reserve(range.size());
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t k = range.lo; k < range.hi; ++k) predictions.push_back(predictor(dataset.samples[k], k));
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ViolationAccumulator acc;
  std::ostringstream dump;
  dump << kDumpHeader << '\n';
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const Vector& y = predictions[k];
    if (y.size() != inst.n) throw DimensionMismatch("prediction must have n entries");
    const Vector& d = dataset.samples[range.lo + k];
    acc.add(inst, d, y);
    if (options.dump_path) {
      double eq_max = 0.0, eq_sum = 0.0, ineq_max = 0.0, ineq_sum = 0.0;
      for (double r : eq_residual(inst, d, y)) {
        eq_max = std::max(eq_max, std::abs(r));
        eq_sum += std::abs(r);
      }
      for (double r : ineq_violation(inst, y)) {
        ineq_max = std::max(ineq_max, r);
        ineq_sum += r;
      }
      dump << range.lo + k << ',' << g17(objective(inst, y)) << ',' << g17(eq_max) << ','
           << g17(eq_sum) << ',' << inst.n_eq << ',' << g17(ineq_max) << ',' << g17(ineq_sum) << ','
           << inst.n_ineq << '\n';
    }
  }
  if (options.dump_path) write_text_atomic(*options.dump_path, dump.str());

  ViolationReport rep;
  rep.max_eq = acc.eq_max;
  rep.mean_eq = acc.eq_mean();
  rep.max_ineq = acc.ineq_max;
  rep.mean_ineq = acc.ineq_mean();
  rep.obj_mean = acc.obj_mean();
  rep.inference_seconds_mean = range.size() ? elapsed / static_cast<double>(range.size()) : 0.0;
  rep.method_tag = options.method_tag;
  rep.seed = options.seed;
  if (options.oracle_objectives && !options.oracle_objectives->empty()) {
    double oracle_mean = 0.0;
    for (double v : *options.oracle_objectives) oracle_mean += v;
    oracle_mean /= static_cast<double>(options.oracle_objectives->size());
    rep.gap_vs_oracle_pct = 100.0 * (rep.obj_mean - oracle_mean) / std::abs(oracle_mean);
  }
  return rep;
}

AggregateReport aggregate_runs(std::span<const ViolationReport> reports) {
  if (reports.empty()) throw Error("aggregate_runs needs at least one report");
  AggregateReport agg;
  agg.method_tag = reports.front().method_tag;
  agg.runs = reports.size();
  for (const auto& r : reports)
    if (r.method_tag != agg.method_tag)
      throw MixedMethods("cannot aggregate '" + agg.method_tag + "' with '" + r.method_tag + "'");

  std::map<std::string, std::vector<double>> columns;
  bool all_gaps = true;
  for (const auto& r : reports) {
    columns["max_eq"].push_back(r.max_eq);
    columns["mean_eq"].push_back(r.mean_eq);
    columns["max_ineq"].push_back(r.max_ineq);
    columns["mean_ineq"].push_back(r.mean_ineq);
    columns["obj_mean"].push_back(r.obj_mean);
    columns["inference_seconds_mean"].push_back(r.inference_seconds_mean);
    if (r.gap_vs_oracle_pct) columns["gap_vs_oracle_pct"].push_back(*r.gap_vs_oracle_pct);
    else all_gaps = false;
  }
  if (!all_gaps) columns.erase("gap_vs_oracle_pct");

  for (auto& [name, values] : columns) {
    // Sorted summation keeps the result independent of report order.
    std::sort(values.begin(), values.end());
    const double count = static_cast<double>(values.size());
    double offset = 0.0;
    for (double v : values) offset += v - values.front();
    const double mean = values.front() + offset / count;
    std::vector<double> sq(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) sq[k] = (values[k] - mean) * (values[k] - mean);
    std::sort(sq.begin(), sq.end());
    double var = 0.0;
    for (double v : sq) var += v;
    agg.mean[name] = mean;
    agg.stddev[name] = std::sqrt(var / count);
  }
  return agg;
}

nlohmann::json to_json(const ViolationReport& r) {
  nlohmann::json j = {{"max_eq", r.max_eq},
                      {"mean_eq", r.mean_eq},
                      {"max_ineq", r.max_ineq},
                      {"mean_ineq", r.mean_ineq},
                      {"obj_mean", r.obj_mean},
                      {"gap_vs_oracle_pct", nullptr},
                      {"inference_seconds_mean", r.inference_seconds_mean},
                      {"method_tag", r.method_tag},
                      {"seed", r.seed}};
  if (r.gap_vs_oracle_pct) j["gap_vs_oracle_pct"] = *r.gap_vs_oracle_pct;
  return j;
}

ViolationReport violation_report_from_json(const nlohmann::json& j) {
  try {
    ViolationReport r;
    r.max_eq = j.at("max_eq").get<double>();
    r.mean_eq = j.at("mean_eq").get<double>();
    r.max_ineq = j.at("max_ineq").get<double>();
    r.mean_ineq = j.at("mean_ineq").get<double>();
    r.obj_mean = j.at("obj_mean").get<double>();
    if (!j.at("gap_vs_oracle_pct").is_null()) r.gap_vs_oracle_pct = j.at("gap_vs_oracle_pct").get<double>();
    r.inference_seconds_mean = j.at("inference_seconds_mean").get<double>();
    r.method_tag = j.at("method_tag").get<std::string>();
    r.seed = j.at("seed").get<std::int64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

nlohmann::json to_json(const AggregateReport& a) {
  return {{"method_tag", a.method_tag}, {"runs", a.runs}, {"mean", a.mean}, {"std", a.stddev}};
}

void save_reports(std::span<const ViolationReport> reports, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  write_json(path, arr, 2);
}

std::vector<ViolationReport> load_reports(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  if (!j.is_array()) throw FormatError("report file must hold a JSON array");
  std::vector<ViolationReport> out;
  for (const auto& item : j) out.push_back(violation_report_from_json(item));
  return out;
}

void write_learning_curve(const RunLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "runlog.csv", log.to_csv());
  write_text_atomic(dir / "learning_curve.tsv", log.to_tsv());
}

}  // namespace deeplde
