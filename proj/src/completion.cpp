#include "deeplde/completion.hpp"

#include <cmath>
#include <string>

#include "deeplde/errors.hpp"

namespace deeplde {

Vector assemble_full(const ProblemInstance& instance, std::span<const double> x,
                     std::span<const double> z) {
  const auto xs = instance.partition_x();
  if (x.size() != xs.size() || z.size() != instance.n_eq)
    throw DimensionMismatch("assemble_full: block sizes do not match the partition");
  Vector y(instance.n);
  for (std::size_t k = 0; k < xs.size(); ++k) y[xs[k]] = x[k];
  for (std::size_t k = 0; k < z.size(); ++k) y[instance.partition_z[k]] = z[k];
  return y;
}

EqualityCompleter::EqualityCompleter(const ProblemInstance& instance, CompletionOptions options)
    : instance_(&instance), options_(options), x_cols_(instance.partition_x()) {
  a_x_ = instance.A.select_columns(x_cols_);
  a_z_ = instance.A.select_columns(instance.partition_z);
  if (instance.n_eq > 0) {
    a_z_lu_.emplace(a_z_);
    a_z_inv_ = a_z_lu_->inverse();
    dz_dx_linear_ = -1.0 * a_z_lu_->solve(a_x_);
  } else {
    dz_dx_linear_ = Matrix(0, x_cols_.size());
  }
  if (nonlinear()) {
    c_z_.resize(instance.n_eq);
    for (std::size_t i = 0; i < instance.n_eq; ++i) c_z_[i] = instance.nonlinear_c[instance.partition_z[i]];
  }
}

Matrix EqualityCompleter::newton_jacobian(std::span<const double> z) const {
  Matrix j = a_z_;
  for (std::size_t i = 0; i < z.size(); ++i) j(i, i) += c_z_[i] * std::cos(z[i]);
  return j;
}

EqualityCompleter::Result EqualityCompleter::complete(std::span<const double> d,
                                                      std::span<const double> x,
                                                      std::span<const double> z_init,
                                                      bool throw_on_failure) const {
  const std::size_t m = instance_->n_eq;
  if (d.size() != m) throw DimensionMismatch("completion: d must have n_eq entries");
  if (x.size() != x_cols_.size()) throw DimensionMismatch("completion: x must have n - n_eq entries");
  Result out;
  if (!nonlinear()) {
    // z = A_z⁻¹ d + (−A_z⁻¹ A_x) x
    out.z.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) out.z[i] = dot(a_z_inv_.row(i), d) + dot(dz_dx_linear_.row(i), x);
    out.y = assemble_full(*instance_, x, out.z);
    return out;
  }

  Vector rhs = matvec(a_x_, x);  // A_x x - d
  for (std::size_t i = 0; i < m; ++i) rhs[i] -= d[i];
  auto residual = [&](std::span<const double> z) {
    Vector r = matvec(a_z_, z);
    for (std::size_t i = 0; i < m; ++i) r[i] += rhs[i] + c_z_[i] * std::sin(z[i]);
    return r;
  };
  auto jacobian = [&](std::span<const double> z) { return newton_jacobian(z); };
  Vector z0 = z_init.empty() ? Vector(m, 0.0) : Vector(z_init.begin(), z_init.end());
  if (z0.size() != m) throw DimensionMismatch("completion: z_init must have n_eq entries");
  auto [z, report] = newton_solve(residual, jacobian, z0, {options_.tol, options_.max_iter});
  if (!report.converged && !throw_on_failure) {
    out.z = std::move(z);
    out.newton = report;
    out.y = assemble_full(*instance_, x, out.z);
    return out;
  }
  if (!report.converged) {
    throw NewtonDiverged("Newton completion did not converge: residual " +
                         std::to_string(report.final_residual_inf_norm) + " after " +
                         std::to_string(report.iterations) + " iterations");
  }
  try {
    out.jacobian_z.emplace(newton_jacobian(z));
  } catch (const SingularMatrix& e) {
    throw NewtonDiverged(std::string("singular completion Jacobian at solution: ") + e.what());
  }
  out.z = std::move(z);
  out.newton = report;
  out.y = assemble_full(*instance_, x, out.z);
  return out;
}

Vector EqualityCompleter::pullback(const Result& result, std::span<const double> dL_dz) const {
  if (dL_dz.size() != instance_->n_eq) throw DimensionMismatch("pullback: dL_dz has wrong size");
  if (!result.jacobian_z) return matvec_transposed(dz_dx_linear_, dL_dz);
  // (dz/dx)ᵀ g = −A_xᵀ (∂h/∂z)⁻ᵀ g
  const Vector u = result.jacobian_z->solve_transposed(dL_dz);
  Vector out = matvec_transposed(a_x_, u);
  for (double& v : out) v = -v;
  return out;
}

std::pair<Vector, Vector> EqualityCompleter::split(std::span<const double> full) const {
  if (full.size() != instance_->n) throw DimensionMismatch("split: vector must have n entries");
  Vector gx(x_cols_.size());
  Vector gz(instance_->n_eq);
  for (std::size_t k = 0; k < x_cols_.size(); ++k) gx[k] = full[x_cols_[k]];
  for (std::size_t k = 0; k < gz.size(); ++k) gz[k] = full[instance_->partition_z[k]];
  return {std::move(gx), std::move(gz)};
}

CompletionOutput complete_linear(const ProblemInstance& instance, std::span<const double> d,
                                 std::span<const double> x) {
  const auto xs = instance.partition_x();
  if (d.size() != instance.n_eq) throw DimensionMismatch("complete_linear: d must have n_eq entries");
  if (x.size() != xs.size()) throw DimensionMismatch("complete_linear: x must have n - n_eq entries");
  CompletionOutput out;
  if (instance.n_eq == 0) {
    out.y_full = assemble_full(instance, x, {});
    out.dz_dx = Matrix(0, xs.size());
    return out;
  }
  const Matrix a_x = instance.A.select_columns(xs);
  const LuFactorization a_z(instance.A.select_columns(instance.partition_z));
  Vector rhs(d.begin(), d.end());
  const Vector ax = matvec(a_x, x);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= ax[i];
  out.z = a_z.solve(rhs);
  out.dz_dx = -1.0 * a_z.solve(a_x);
  out.y_full = assemble_full(instance, x, out.z);
  return out;
}

CompletionOutput complete_newton(const ProblemInstance& instance, std::span<const double> d,
                                 std::span<const double> x, std::span<const double> z_init,
                                 CompletionOptions options) {
  // Treat any instance as h(y) = A y + c_z∘sin(y_z) − d with c = 0 unless the
  // instance carries nonlinear equalities.
  ProblemInstance view = instance;
  if (!view.has_nonlinear_equalities()) {
    view.objective_kind = ObjectiveKind::NonlinearEq;
    view.nonlinear_c.assign(view.n, 0.0);
  }
  const EqualityCompleter completer(view, options);
  auto res = completer.complete(d, x, z_init);
  CompletionOutput out;
  out.newton = res.newton;
  const Matrix a_x = view.A.select_columns(completer.x_columns());
  out.dz_dx = res.jacobian_z ? -1.0 * res.jacobian_z->solve(a_x) : Matrix(0, a_x.cols());
  out.z = std::move(res.z);
  out.y_full = std::move(res.y);
  return out;
}

Vector chain_gradient(std::span<const double> dL_dx_direct, std::span<const double> dL_dz,
                      const CompletionOutput& completion) {
  const Matrix& j = completion.dz_dx;
  if (dL_dx_direct.size() != j.cols() || dL_dz.size() != j.rows())
    throw DimensionMismatch("chain_gradient: gradient sizes do not match dz/dx");
  Vector out(dL_dx_direct.begin(), dL_dx_direct.end());
  const Vector extra = matvec_transposed(j, dL_dz);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += extra[i];
  return out;
}

}  // namespace deeplde
