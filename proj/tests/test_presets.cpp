// Slow checks on the small preset (n = 50, n_eq = 30, n_ineq = 20, 2400 samples).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "deeplde/io.hpp"
#include "deeplde/oracle.hpp"
#include "deeplde/reporting.hpp"
#include "deeplde/training.hpp"

using namespace deeplde;
namespace fs = std::filesystem;

namespace {

const Dataset& preset() {
  static const Dataset ds =
      generate_dataset(generate_instance(50, 30, 20, ObjectiveKind::Quadratic, 1), 2400, 2);
  return ds;
}

TrainConfig preset_config(std::uint64_t seed) {
  TrainConfig cfg = TrainConfig::defaults_for(ObjectiveKind::Quadratic);
  cfg.hidden_width = 64;
  cfg.seed = seed;
  return cfg;
}

double test_mse(const Mlp& model, const std::vector<Vector>& labels) {
  const Dataset& ds = preset();
  double sum = 0.0;
  for (std::size_t k = ds.split.test.lo; k < ds.split.test.hi; ++k) {
    const Vector y = predict(model, ds.samples[k]);
    for (std::size_t j = 0; j < y.size(); ++j) sum += (y[j] - labels[k][j]) * (y[j] - labels[k][j]);
  }
  return sum / static_cast<double>(ds.split.test.size() * ds.instance.n);
}

}  // namespace

TEST_CASE("LDF never meets the equalities after warm-up") {
  const TrainConfig cfg = preset_config(1);
  const TrainResult r = train_ldf(preset(), cfg);
  double lowest = INFINITY;
  for (const auto& rec : r.log.records)
    if (rec.phase != Phase::Warmup) lowest = std::min(lowest, rec.eq_max);
  CHECK(lowest >= 0.01);
}

TEST_CASE("supervised training on oracle labels cuts the test MSE tenfold") {
  const Dataset& ds = preset();
  std::vector<Vector> labels;
  for (const Vector& d : ds.samples) labels.push_back(solve_reference(ds.instance, d).y_star);
  const TrainConfig cfg = preset_config(1);
  Rng rng(cfg.seed);
  const Mlp initial = TrainingContext(ds, Method::Supervised, cfg, &labels).make_model(rng);
  const TrainResult r = train_supervised(ds, labels, cfg);
  const double before = test_mse(initial, labels);
  const double after = test_mse(r.model, labels);
  CAPTURE(before);
  CAPTURE(after);
  CHECK(after * 10.0 <= before);
}

TEST_CASE("five seeds: equality violation spread is negligible and dumps reproduce the report") {
  const Dataset& ds = preset();
  const EqualityCompleter completer(ds.instance);
  Vector oracle;
  for (std::size_t k = ds.split.test.lo; k < ds.split.test.hi; ++k)
    oracle.push_back(solve_reference(ds.instance, ds.samples[k]).objective_value);

  const fs::path dir = fs::temp_directory_path() / "deeplde_presets";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<ViolationReport> reports;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrainResult r = train_deeplde(ds, preset_config(seed));
    EvaluateOptions opt{"deeplde", static_cast<std::int64_t>(seed), oracle, dir / "dump.csv"};
    reports.push_back(evaluate(ds, ds.split.test, model_predictor(r.model, &completer), opt));
    const ViolationReport& rep = reports.back();

    std::stringstream dump(read_text(dir / "dump.csv"));
    std::string line;
    std::getline(dump, line);
    double obj = 0, eq_max = 0, eq_sum = 0, ineq_max = 0, ineq_sum = 0, rows = 0, eq_rows = 0, ineq_rows = 0;
    while (std::getline(dump, line)) {
      std::vector<double> c;
      std::stringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) c.push_back(std::stod(cell));
      REQUIRE(c.size() == 8);
      obj += c[1];
      eq_max = std::max(eq_max, c[2]);
      eq_sum += c[3];
      eq_rows += c[4];
      ineq_max = std::max(ineq_max, c[5]);
      ineq_sum += c[6];
      ineq_rows += c[7];
      ++rows;
    }
    CHECK(rows == ds.split.test.size());
    CHECK(rep.max_eq == eq_max);
    CHECK(rep.max_ineq == ineq_max);
    CHECK(rep.mean_eq == doctest::Approx(eq_sum / eq_rows).epsilon(1e-12));
    CHECK(rep.mean_ineq == doctest::Approx(ineq_sum / ineq_rows).epsilon(1e-12));
    CHECK(rep.obj_mean == doctest::Approx(obj / rows).epsilon(1e-12));
  }
  fs::remove_all(dir);

  const AggregateReport agg = aggregate_runs(reports);
  CHECK(agg.runs == 5);
  CHECK(agg.mean.at("max_eq") <= 1e-6);
  CHECK(agg.stddev.at("max_eq") <= 1e-6);
  CHECK(agg.mean.contains("gap_vs_oracle_pct"));
}
