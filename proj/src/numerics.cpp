#include "deeplde/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deeplde/errors.hpp"

namespace deeplde {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("matrix data has " + std::to_string(data_.size()) +
                            " entries, expected " + std::to_string(rows_ * cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::select_columns(std::span<const std::size_t> cols) const {
  Matrix out(rows_, cols.size());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] >= cols_) throw DimensionMismatch("column index out of range");
      out(i, k) = (*this)(i, cols[k]);
    }
  return out;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) {
    throw DimensionMismatch("matvec: " + shape(m) + " times vector of size " +
                            std::to_string(x.size()));
  }
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), x);
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) {
    throw DimensionMismatch("matvec_transposed: " + shape(m) + " with vector of size " +
                            std::to_string(x.size()));
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += xi * r[j];
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix gram_rows(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dot(a.row(i), a.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("matrix sum: " + shape(a) + " + " + shape(b));
  Matrix c = a;
  for (std::size_t k = 0; k < c.values().size(); ++k) c.values()[k] += b.values()[k];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) { return a + (-1.0) * b; }

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double max_abs_entry(const Matrix& m) { return norm_inf(m.values()); }

Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("axpy: size mismatch");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  return out;
}

LuFactorization::LuFactorization(Matrix m) : lu_(std::move(m)) {
  if (lu_.rows() != lu_.cols()) throw DimensionMismatch("LU of non-square " + shape(lu_));
  const std::size_t n = lu_.rows();
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (!(best >= kPivotTolerance)) {
      throw SingularMatrix("pivot " + std::to_string(best) + " below tolerance at column " +
                           std::to_string(k));
    }
    if (piv != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(piv).begin());
      std::swap(perm_[k], perm_[piv]);
    }
    const double inv = 1.0 / lu_(k, k);
    auto rk = lu_.row(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      auto ri = lu_.row(i);
      const double f = ri[k] * inv;
      ri[k] = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
    }
  }
}

Vector LuFactorization::solve(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw DimensionMismatch("LU solve: rhs size mismatch");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    auto r = lu_.row(i);
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= r[j] * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    auto r = lu_.row(i);
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= r[j] * x[j];
    x[i] = s / r[i];
  }
  return x;
}

Vector LuFactorization::solve_transposed(std::span<const double> b) const {
  // PM = LU, so Mᵀ = Uᵀ Lᵀ P.
  const std::size_t n = size();
  if (b.size() != n) throw DimensionMismatch("LU solve: rhs size mismatch");
  Vector w(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * w[j];
    w[i] = s / lu_(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = w[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(j, i) * w[j];
    w[i] = s;
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = w[i];
  return x;
}

Matrix LuFactorization::solve(const Matrix& b) const {
  if (b.rows() != size()) throw DimensionMismatch("LU solve: rhs rows mismatch");
  Matrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    const Vector sol = solve(col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Matrix LuFactorization::inverse() const { return solve(Matrix::identity(size())); }

Vector solve_linear(const Matrix& m, std::span<const double> b) {
  return LuFactorization(m).solve(b);
}

Matrix pseudo_inverse(const Matrix& m) {
  if (m.rows() == 0) return Matrix(m.cols(), 0);
  try {
    const LuFactorization gram(gram_rows(m));
    // M⁺ = Mᵀ (MMᵀ)⁻¹; (MMᵀ)⁻¹ is symmetric so M⁺ᵀ = (MMᵀ)⁻¹ M.
    return gram.solve(m).transpose();
  } catch (const SingularMatrix& e) {
    throw RankDeficient(std::string("pseudo_inverse: ") + e.what());
  }
}

std::pair<Vector, NewtonReport> newton_solve(const VectorFunction& residual,
                                             const MatrixFunction& jacobian,
                                             std::span<const double> z0,
                                             NewtonOptions options) {
  Vector z(z0.begin(), z0.end());
  NewtonReport report;
  Vector r = residual(z);
  if (r.size() != z.size()) throw DimensionMismatch("newton_solve: residual is not square");
  report.final_residual_inf_norm = norm_inf(r);
  while (std::isfinite(report.final_residual_inf_norm) &&
         report.final_residual_inf_norm > options.tol && report.iterations < options.max_iter) {
    Vector step;
    try {
      step = LuFactorization(jacobian(z)).solve(r);
    } catch (const SingularMatrix&) {
      return {std::move(z), report};
    }
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= step[i];
    ++report.iterations;
    r = residual(z);
    report.final_residual_inf_norm = norm_inf(r);
  }
  report.converged = report.final_residual_inf_norm <= options.tol;
  return {std::move(z), report};
}

std::optional<Matrix> cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("cholesky of non-square " + shape(m));
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

Vector symmetric_eigenvalues(const Matrix& m, double tol, std::size_t max_sweeps) {
  if (m.rows() != m.cols()) throw DimensionMismatch("eigenvalues of non-square " + shape(m));
  const std::size_t n = m.rows();
  Matrix a = m;
  const double scale = std::max(max_abs_entry(a), 1e-300);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= tol * scale) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace deeplde
