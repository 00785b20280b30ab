#pragma once

#include <optional>
#include <span>
#include <vector>

#include "deeplde/numerics.hpp"
#include "deeplde/problems.hpp"

namespace deeplde {

struct CompletionOutput {
  Vector z;       // completed block, ordered like partition_z
  Vector y_full;  // x and z scattered back into original coordinates
  Matrix dz_dx;   // n_eq x (n - n_eq)
  std::optional<NewtonReport> newton;  // empty for the linear case
};

struct CompletionOptions {
  double tol = 1e-8;
  std::size_t max_iter = 50;
};

/// y with y[partition_x] = x and y[partition_z] = z.
Vector assemble_full(const ProblemInstance& instance, std::span<const double> x,
                     std::span<const double> z);

/// z = A_z⁻¹(d - A_x x), dz/dx = -A_z⁻¹ A_x.
CompletionOutput complete_linear(const ProblemInstance& instance, std::span<const double> d,
                                 std::span<const double> x);

/// Newton solve of h([x; z]) = 0 for z, then dz/dx = -(∂h/∂z)⁻¹ ∂h/∂x at the
/// converged point. Throws NewtonDiverged when Newton does not converge.
CompletionOutput complete_newton(const ProblemInstance& instance, std::span<const double> d,
                                 std::span<const double> x, std::span<const double> z_init,
                                 CompletionOptions options = {});

/// dL/dx_direct + (dz/dx)ᵀ dL/dz.
Vector chain_gradient(std::span<const double> dL_dx_direct, std::span<const double> dL_dz,
                      const CompletionOutput& completion);

/// Per-instance completion with the equality block factored once. Used on
/// the training path: instead of forming dz/dx it applies its transpose
/// through an adjoint solve.
class EqualityCompleter {
 public:
  struct Result {
    Vector z;
    Vector y;
    std::optional<NewtonReport> newton;
    std::optional<LuFactorization> jacobian_z;  // converged ∂h/∂z, nonlinear case only
  };

  explicit EqualityCompleter(const ProblemInstance& instance, CompletionOptions options = {});

  const ProblemInstance& instance() const { return *instance_; }
  bool nonlinear() const { return instance_->has_nonlinear_equalities(); }
  std::size_t x_dim() const { return x_cols_.size(); }

  /// Throws NewtonDiverged on failure unless `throw_on_failure` is false, in
  /// which case the last Newton iterate is returned with converged == false.
  /// `z_init` may be empty (zero start).
  Result complete(std::span<const double> d, std::span<const double> x,
                  std::span<const double> z_init = {}, bool throw_on_failure = true) const;

  /// (dz/dx)ᵀ·dL_dz at the point described by `result`.
  Vector pullback(const Result& result, std::span<const double> dL_dz) const;

  /// Split of a full-space gradient into (x-block, z-block).
  std::pair<Vector, Vector> split(std::span<const double> full) const;

  const std::vector<std::size_t>& x_columns() const { return x_cols_; }

 private:
  Matrix newton_jacobian(std::span<const double> z) const;

  const ProblemInstance* instance_;
  CompletionOptions options_;
  std::vector<std::size_t> x_cols_;
  Matrix a_x_;
  Matrix a_z_;
  std::optional<LuFactorization> a_z_lu_;
  Matrix a_z_inv_;
  Matrix dz_dx_linear_;  // -A_z⁻¹ A_x
  Vector c_z_;
};

}  // namespace deeplde
