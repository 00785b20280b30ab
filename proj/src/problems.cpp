#include "deeplde/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deeplde/errors.hpp"
#include "deeplde/io.hpp"

namespace deeplde {

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Quadratic:
      return "quadratic";
    case ObjectiveKind::SinNonconvex:
      return "sin_nonconvex";
    case ObjectiveKind::NonlinearEq:
      return "nonlinear_eq";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "quadratic" || s == "qp") return ObjectiveKind::Quadratic;
  if (s == "sin_nonconvex" || s == "sinqp") return ObjectiveKind::SinNonconvex;
  if (s == "nonlinear_eq" || s == "nonlineq") return ObjectiveKind::NonlinearEq;
  throw FormatError("unknown objective kind '" + s + "'");
}

std::vector<std::size_t> ProblemInstance::partition_x() const {
  std::vector<bool> is_z(n, false);
  for (std::size_t j : partition_z) is_z.at(j) = true;
  std::vector<std::size_t> xs;
  xs.reserve(n - partition_z.size());
  for (std::size_t j = 0; j < n; ++j)
    if (!is_z[j]) xs.push_back(j);
  return xs;
}

void ProblemInstance::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw DimensionMismatch("instance: " + what);
  };
  require(n >= n_eq, "n must be at least n_eq");
  require(Q.rows() == n && Q.cols() == n, "Q must be n x n");
  require(p.size() == n, "p must have n entries");
  require(A.rows() == n_eq && A.cols() == n, "A must be n_eq x n");
  require(G.rows() == n_ineq && G.cols() == n, "G must be n_ineq x n");
  require(h_ub.size() == n_ineq, "h_ub must have n_ineq entries");
  require(partition_z.size() == n_eq, "partition_z must have n_eq entries");
  std::vector<std::size_t> sorted = partition_z;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          "partition_z entries must be distinct");
  require(sorted.empty() || sorted.back() < n, "partition_z index out of range");
  if (has_nonlinear_equalities()) {
    require(nonlinear_c.size() == n, "nonlinear_c must have n entries");
  }
  auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  require(all_finite(Q.values()) && all_finite(p) && all_finite(A.values()) &&
              all_finite(G.values()) && all_finite(h_ub) && all_finite(nonlinear_c),
          "entries must be finite");
}

std::vector<std::size_t> select_partition(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m > n) throw PartitionNotFound("more equality rows than variables");
  Matrix u = a;
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t best_col = k;
    double best = -1.0;
    for (std::size_t j = k; j < n; ++j) {
      const double v = std::abs(u(k, cols[j]));
      if (v > best) {
        best = v;
        best_col = j;
      }
    }
    if (best < LuFactorization::kPivotTolerance)
      throw PartitionNotFound("equality matrix is rank deficient at row " + std::to_string(k));
    std::swap(cols[k], cols[best_col]);
    const std::size_t pc = cols[k];
    for (std::size_t i = k + 1; i < m; ++i) {
      const double f = u(i, pc) / u(k, pc);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) u(i, j) -= f * u(k, j);
    }
  }
  cols.resize(m);
  // Confirm the selected block factors cleanly.
  try {
    LuFactorization check(a.select_columns(cols));
  } catch (const SingularMatrix& e) {
    throw PartitionNotFound(std::string("selected block is singular: ") + e.what());
  }
  return cols;
}

ProblemInstance generate_instance(std::size_t n, std::size_t n_eq, std::size_t n_ineq,
                                  ObjectiveKind kind, std::uint64_t seed) {
  if (n == 0) throw DimensionMismatch("instance needs at least one variable");
  if (n < n_eq) throw DimensionMismatch("equality constraints would be overdetermined (n < n_eq)");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  ProblemInstance inst;
  inst.n = n;
  inst.n_eq = n_eq;
  inst.n_ineq = n_ineq;
  inst.objective_kind = kind;

  inst.A = Matrix(n_eq, n);
  for (double& v : inst.A.values()) v = normal(rng);
  inst.G = Matrix(n_ineq, n);
  for (double& v : inst.G.values()) v = normal(rng);

  Matrix l(n, n);
  const double l_scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : l.values()) v = normal(rng) * l_scale;
  inst.Q = gram_rows(l);
  for (std::size_t i = 0; i < n; ++i) inst.Q(i, i) += 0.1;

  inst.p.resize(n);
  for (double& v : inst.p) v = normal(rng);

  if (kind == ObjectiveKind::NonlinearEq) {
    std::uniform_real_distribution<double> unif(0.0, 0.5);
    inst.nonlinear_c.resize(n);
    for (double& v : inst.nonlinear_c) v = unif(rng);
  }

  const Matrix ga = matmul(inst.G, pseudo_inverse(inst.A));
  inst.h_ub.assign(n_ineq, 0.0);
  for (std::size_t i = 0; i < n_ineq; ++i)
    for (double v : ga.row(i)) inst.h_ub[i] += std::abs(v);

  inst.partition_z = select_partition(inst.A);
  inst.validate();
  return inst;
}

DatasetSplit split_counts(std::size_t count) {
  const std::size_t held_out = count / 12;
  const std::size_t train = count - 2 * held_out;
  return {{0, train}, {train, train + held_out}, {train + held_out, count}};
}

Dataset generate_dataset(const ProblemInstance& instance, std::size_t count, std::uint64_t seed) {
  if (count < 12) throw DimensionMismatch("dataset needs at least 12 samples for a 10:1:1 split");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Dataset ds;
  ds.instance = instance;
  ds.samples.resize(count, Vector(instance.n_eq));
  for (auto& d : ds.samples)
    for (double& v : d) v = unif(rng);
  ds.split = split_counts(count);
  return ds;
}

namespace {

void check_y(const ProblemInstance& inst, std::span<const double> y) {
  if (y.size() != inst.n)
    throw DimensionMismatch("y has " + std::to_string(y.size()) + " entries, expected " +
                            std::to_string(inst.n));
}

}  // namespace

double objective(const ProblemInstance& instance, std::span<const double> y) {
  check_y(instance, y);
  const Vector qy = matvec(instance.Q, y);
  double value = 0.5 * dot(y, qy);
  if (instance.objective_kind == ObjectiveKind::SinNonconvex) {
    for (std::size_t i = 0; i < y.size(); ++i) value += instance.p[i] * std::sin(y[i]);
  } else {
    value += dot(instance.p, y);
  }
  return value;
}

Vector objective_gradient(const ProblemInstance& instance, std::span<const double> y) {
  check_y(instance, y);
  Vector g = matvec(instance.Q, y);
  if (instance.objective_kind == ObjectiveKind::SinNonconvex) {
    for (std::size_t i = 0; i < y.size(); ++i) g[i] += instance.p[i] * std::cos(y[i]);
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) g[i] += instance.p[i];
  }
  return g;
}

Vector ineq_violation(const ProblemInstance& instance, std::span<const double> y) {
  check_y(instance, y);
  Vector r = matvec(instance.G, y);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::max(r[i] - instance.h_ub[i], 0.0);
  return r;
}

Vector eq_residual(const ProblemInstance& instance, std::span<const double> d,
                   std::span<const double> y) {
  check_y(instance, y);
  if (d.size() != instance.n_eq) throw DimensionMismatch("d must have n_eq entries");
  Vector r = matvec(instance.A, y);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= d[i];
  if (instance.has_nonlinear_equalities()) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::size_t j = instance.partition_z[i];
      r[i] += instance.nonlinear_c[j] * std::sin(y[j]);
    }
  }
  return r;
}

Matrix eq_jacobian(const ProblemInstance& instance, std::span<const double> y) {
  check_y(instance, y);
  Matrix j = instance.A;
  if (instance.has_nonlinear_equalities()) {
    for (std::size_t i = 0; i < instance.n_eq; ++i) {
      const std::size_t col = instance.partition_z[i];
      j(i, col) += instance.nonlinear_c[col] * std::cos(y[col]);
    }
  }
  return j;
}

void ViolationAccumulator::add(const ProblemInstance& instance, std::span<const double> d,
                               std::span<const double> y) {
  for (double r : eq_residual(instance, d, y)) {
    const double s = std::abs(r);
    eq_max = std::max(eq_max, s);
    eq_sum += s;
    ++eq_count;
  }
  for (double r : ineq_violation(instance, y)) {
    ineq_max = std::max(ineq_max, r);
    ineq_sum += r;
    ++ineq_count;
  }
  obj_sum += objective(instance, y);
  ++samples;
}

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_rows(const nlohmann::json& rows, std::size_t expected_cols) {
  Matrix m(rows.size(), expected_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i].get<std::vector<double>>();
    if (r.size() != expected_cols) throw DimensionMismatch("matrix row has wrong length");
    std::copy(r.begin(), r.end(), m.row(i).begin());
  }
  return m;
}

nlohmann::json range_json(IndexRange r) { return nlohmann::json::array({r.lo, r.hi}); }

IndexRange range_from_json(const nlohmann::json& j) {
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

}  // namespace

nlohmann::json to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["n"] = inst.n;
  j["n_eq"] = inst.n_eq;
  j["n_ineq"] = inst.n_ineq;
  j["objective_kind"] = to_string(inst.objective_kind);
  j["Q"] = matrix_rows(inst.Q);
  j["p"] = inst.p;
  j["A"] = matrix_rows(inst.A);
  j["G"] = matrix_rows(inst.G);
  j["h_ub"] = inst.h_ub;
  j["partition_z"] = inst.partition_z;
  j["nonlinear_c"] = inst.has_nonlinear_equalities() ? nlohmann::json(inst.nonlinear_c)
                                                     : nlohmann::json(nullptr);
  return j;
}

ProblemInstance instance_from_json(const nlohmann::json& j) {
  try {
    ProblemInstance inst;
    inst.n = j.at("n").get<std::size_t>();
    inst.n_eq = j.at("n_eq").get<std::size_t>();
    inst.n_ineq = j.at("n_ineq").get<std::size_t>();
    inst.objective_kind = parse_objective_kind(j.at("objective_kind").get<std::string>());
    inst.Q = matrix_from_rows(j.at("Q"), inst.n);
    inst.p = j.at("p").get<Vector>();
    inst.A = matrix_from_rows(j.at("A"), inst.n);
    inst.G = matrix_from_rows(j.at("G"), inst.n);
    inst.h_ub = j.at("h_ub").get<Vector>();
    inst.partition_z = j.at("partition_z").get<std::vector<std::size_t>>();
    if (j.contains("nonlinear_c") && !j.at("nonlinear_c").is_null())
      inst.nonlinear_c = j.at("nonlinear_c").get<Vector>();
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance: ") + e.what());
  }
}

nlohmann::json to_json(const Dataset& ds) {
  nlohmann::json j = to_json(ds.instance);
  j["samples"] = ds.samples;
  j["split"] = {{"train", range_json(ds.split.train)},
                {"validation", range_json(ds.split.validation)},
                {"test", range_json(ds.split.test)}};
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    Dataset ds;
    ds.instance = instance_from_json(j);
    ds.samples = j.at("samples").get<std::vector<Vector>>();
    for (const auto& d : ds.samples)
      if (d.size() != ds.instance.n_eq) throw DimensionMismatch("sample has wrong dimension");
    const auto& s = j.at("split");
    ds.split = {range_from_json(s.at("train")), range_from_json(s.at("validation")),
                range_from_json(s.at("test"))};
    for (IndexRange r : {ds.split.train, ds.split.validation, ds.split.test})
      if (r.lo > r.hi || r.hi > ds.samples.size()) throw DimensionMismatch("split range out of bounds");
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_json(path, to_json(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_json(path)); }

}  // namespace deeplde
