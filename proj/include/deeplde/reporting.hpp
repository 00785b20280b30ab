#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "deeplde/completion.hpp"
#include "deeplde/network.hpp"
#include "deeplde/problems.hpp"
#include "deeplde/training.hpp"

namespace deeplde {

struct ViolationReport {
  double max_eq = 0.0;
  double mean_eq = 0.0;
  double max_ineq = 0.0;
  double mean_ineq = 0.0;
  double obj_mean = 0.0;
  std::optional<double> gap_vs_oracle_pct;
  double inference_seconds_mean = 0.0;
  std::string method_tag;
  std::int64_t seed = 0;
};

/// Maps (d, sample index) to a full y.
using Predictor = std::function<Vector(std::span<const double>, std::size_t)>;

/// Eval-mode network, completed when `completer` is non-null.
Predictor model_predictor(const Mlp& model, const EqualityCompleter* completer);
/// Replays stored solutions (e.g. oracle labels) indexed by sample.
Predictor label_predictor(const std::vector<Vector>& labels);

struct EvaluateOptions {
  std::string method_tag;
  std::int64_t seed = 0;
  /// Oracle objective for each sample of `range`, in order.
  std::optional<Vector> oracle_objectives;
  /// Writes one CSV row per sample when set.
  std::optional<std::filesystem::path> dump_path;
};

/// Feasibility and optimality over `range` of the dataset. Only the
/// predictor calls are timed.
ViolationReport evaluate(const Dataset& dataset, IndexRange range, const Predictor& predictor,
                         const EvaluateOptions& options);

/// Header of the per-sample dump.
inline constexpr const char* kDumpHeader =
    "sample,objective,eq_max,eq_abs_sum,eq_rows,ineq_max,ineq_sum,ineq_rows";

struct AggregateReport {
  std::string method_tag;
  std::size_t runs = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // population
};

/// Per-column mean and population standard deviation. Throws MixedMethods
/// when the reports carry different method tags.
AggregateReport aggregate_runs(std::span<const ViolationReport> reports);

nlohmann::json to_json(const ViolationReport& report);
ViolationReport violation_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregateReport& report);

/// JSON array of reports.
void save_reports(std::span<const ViolationReport> reports, const std::filesystem::path& path);
std::vector<ViolationReport> load_reports(const std::filesystem::path& path);

/// `runlog.csv` and `learning_curve.tsv` in `dir`.
void write_learning_curve(const RunLog& log, const std::filesystem::path& dir);

}  // namespace deeplde
