#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "deeplde/numerics.hpp"

namespace deeplde {

enum class ObjectiveKind { Quadratic, SinNonconvex, NonlinearEq };

std::string to_string(ObjectiveKind kind);
/// Accepts the file spellings ("quadratic", "sin_nonconvex", "nonlinear_eq")
/// and the CLI spellings ("qp", "sinqp", "nonlineq").
ObjectiveKind parse_objective_kind(const std::string& s);

/// One member of the program family
///   min f(y)  s.t.  h(y) = A y [+ c∘sin] - d = 0,   G y <= h_ub.
///
/// For NonlinearEq the equality row i carries the extra term
/// c[z_i]·sin(y[z_i]) where z_i = partition_z[i], so its Jacobian with respect
/// to the completed block is A_z + diag(c_z ∘ cos(y_z)).
struct ProblemInstance {
  std::size_t n = 0;
  std::size_t n_eq = 0;
  std::size_t n_ineq = 0;
  Matrix Q;  // n x n, symmetric PSD
  Vector p;
  Matrix A;  // n_eq x n
  Matrix G;  // n_ineq x n
  Vector h_ub;
  ObjectiveKind objective_kind = ObjectiveKind::Quadratic;
  std::vector<std::size_t> partition_z;  // n_eq column indices completed from the equalities
  Vector nonlinear_c;                    // size n for NonlinearEq, empty otherwise

  /// Complement of partition_z, ascending.
  std::vector<std::size_t> partition_x() const;
  bool has_nonlinear_equalities() const { return objective_kind == ObjectiveKind::NonlinearEq; }
  /// Throws DimensionMismatch / PartitionNotFound on a malformed instance.
  void validate() const;
};

/// Draws A, G ~ N(0,1), Q = LLᵀ + 0.1 I with L ~ N(0,1/n), p ~ N(0,1),
/// h_ub = row sums of |G A⁺| and (NonlinearEq) c ~ U[0, 0.5].
ProblemInstance generate_instance(std::size_t n, std::size_t n_eq, std::size_t n_ineq,
                                  ObjectiveKind kind, std::uint64_t seed);

/// n_eq columns of A chosen by Gaussian elimination with column pivoting.
/// Throws PartitionNotFound when a pivot vanishes.
std::vector<std::size_t> select_partition(const Matrix& a);

struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo; }
  bool operator==(const IndexRange&) const = default;
};

struct DatasetSplit {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
  bool operator==(const DatasetSplit&) const = default;
};

/// 10:1:1 split: validation = test = floor(count/12), the rest trains.
DatasetSplit split_counts(std::size_t count);

struct Dataset {
  ProblemInstance instance;
  std::vector<Vector> samples;
  DatasetSplit split;

  std::span<const Vector> range(IndexRange r) const {
    return std::span<const Vector>(samples).subspan(r.lo, r.size());
  }
};

/// `count` samples d ~ U[-1,1]^{n_eq}; requires count >= 12.
Dataset generate_dataset(const ProblemInstance& instance, std::size_t count, std::uint64_t seed);

double objective(const ProblemInstance& instance, std::span<const double> y);
Vector objective_gradient(const ProblemInstance& instance, std::span<const double> y);

/// max(G y - h_ub, 0) elementwise.
Vector ineq_violation(const ProblemInstance& instance, std::span<const double> y);
/// Signed equality residual h(y).
Vector eq_residual(const ProblemInstance& instance, std::span<const double> d,
                   std::span<const double> y);
/// ∂h/∂y, n_eq x n.
Matrix eq_jacobian(const ProblemInstance& instance, std::span<const double> y);

/// Running max/mean of S(h) and R(g) over samples and constraint rows.
struct ViolationAccumulator {
  double eq_max = 0.0;
  double eq_sum = 0.0;
  std::size_t eq_count = 0;
  double ineq_max = 0.0;
  double ineq_sum = 0.0;
  std::size_t ineq_count = 0;
  double obj_sum = 0.0;
  std::size_t samples = 0;

  void add(const ProblemInstance& instance, std::span<const double> d, std::span<const double> y);
  double eq_mean() const { return eq_count ? eq_sum / static_cast<double>(eq_count) : 0.0; }
  double ineq_mean() const { return ineq_count ? ineq_sum / static_cast<double>(ineq_count) : 0.0; }
  double obj_mean() const { return samples ? obj_sum / static_cast<double>(samples) : 0.0; }
};

nlohmann::json to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace deeplde
