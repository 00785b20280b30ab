#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "deeplde/numerics.hpp"
#include "deeplde/problems.hpp"

namespace deeplde {

struct OracleSolution {
  Vector y_star;
  double objective_value = 0.0;
  double kkt_residual = 0.0;
  std::size_t solver_iterations = 0;
};

struct OracleOptions {
  // Non-convex kinds.
  std::size_t starts = 16;
  std::uint64_t seed = 0;
  double stationarity_tol = 1e-4;
  double feasibility_tol = 1e-7;
  // Interior point.
  double ipm_tol = 1e-10;
  std::size_t ipm_max_iter = 200;
};

/// Quadratic kind: Mehrotra predictor-corrector interior point on the KKT
/// system. Other kinds: multi-start augmented Lagrangian with L-BFGS inner
/// solves in the reduced coordinates x (z completed from the equalities).
/// Throws OracleFailed when no start is stationary and feasible.
OracleSolution solve_reference(const ProblemInstance& instance, std::span<const double> d,
                               const OracleOptions& options = {});

/// max of stationarity, equality and inequality violation and
/// complementarity at (y, ν, λ) for the Quadratic kind.
double qp_kkt_residual(const ProblemInstance& instance, std::span<const double> d,
                       std::span<const double> y, std::span<const double> nu,
                       std::span<const double> lambda);

struct Prop2Report {
  double sigma = 0.0;
  double mc_estimate = 0.0;
  double closed_form_diag = 0.0;
  double closed_form_nuclear = 0.0;
  std::size_t sample_count = 0;
  double relative_gap = 0.0;
  double standard_error = 0.0;  // of mc_estimate; not serialized
};

/// √(2/π)σ Σ_i √((JJᵀ)_ii) and √(2/π)σ tr(√(JJᵀ)).
std::pair<double, double> prop2_closed_forms(const Matrix& jacobian, double sigma);

/// Monte Carlo of 1ᵀ|h(y* + ε)|, ε ~ N(0, σ²I), around the given point.
Prop2Report verify_prop2_at(const ProblemInstance& instance, std::span<const double> d,
                            std::span<const double> y_star, double sigma, std::size_t sample_count,
                            std::uint64_t seed, std::size_t threads = 1);

/// As verify_prop2_at with y* from solve_reference.
Prop2Report verify_prop2(const ProblemInstance& instance, std::span<const double> d, double sigma,
                         std::size_t sample_count, std::uint64_t seed, std::size_t threads = 1);

nlohmann::json to_json(const Prop2Report& report);

/// One row per dataset sample, as written by the `oracle` command.
struct OracleTable {
  std::vector<Vector> y_star;
  Vector objective;
  Vector kkt_residual;
};

nlohmann::json to_json(const OracleTable& table);
OracleTable oracle_table_from_json(const nlohmann::json& j);
void save_oracle_table(const OracleTable& table, const std::filesystem::path& path);
OracleTable load_oracle_table(const std::filesystem::path& path);

}  // namespace deeplde
