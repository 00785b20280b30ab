#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace deeplde {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  Matrix transpose() const;
  /// Columns `cols` of this matrix, in the given order.
  Matrix select_columns(std::span<const std::size_t> cols) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Basic dense kernels. All throw DimensionMismatch on inconsistent shapes.
Vector matvec(const Matrix& m, std::span<const double> x);
/// mᵀ·x without forming the transpose.
Vector matvec_transposed(const Matrix& m, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
/// a·aᵀ
Matrix gram_rows(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> v);
double norm2(std::span<const double> v);
double max_abs_entry(const Matrix& m);
Vector axpy(double alpha, std::span<const double> x, std::span<const double> y);  // alpha*x + y

/// LU factorization with partial (row) pivoting of a square matrix.
class LuFactorization {
 public:
  static constexpr double kPivotTolerance = 1e-12;

  /// Throws SingularMatrix when a pivot magnitude falls below kPivotTolerance.
  explicit LuFactorization(Matrix m);

  std::size_t size() const { return lu_.rows(); }
  Vector solve(std::span<const double> b) const;
  /// Solves Mᵀ v = b.
  Vector solve_transposed(std::span<const double> b) const;
  /// Solves M X = B column by column.
  Matrix solve(const Matrix& b) const;
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

Vector solve_linear(const Matrix& m, std::span<const double> b);

/// Moore–Penrose pseudo-inverse of a full-row-rank matrix, Mᵀ(MMᵀ)⁻¹.
/// Throws RankDeficient when MMᵀ is singular.
Matrix pseudo_inverse(const Matrix& m);

struct NewtonReport {
  bool converged = false;
  std::size_t iterations = 0;
  double final_residual_inf_norm = std::numeric_limits<double>::infinity();
};

struct NewtonOptions {
  double tol = 1e-8;
  std::size_t max_iter = 50;
};

using VectorFunction = std::function<Vector(std::span<const double>)>;
using MatrixFunction = std::function<Matrix(std::span<const double>)>;

/// Full-step Newton iteration for a square system residual(z) = 0.
/// Never throws on failure to converge; a singular Jacobian ends the
/// iteration with converged == false.
std::pair<Vector, NewtonReport> newton_solve(const VectorFunction& residual,
                                             const MatrixFunction& jacobian,
                                             std::span<const double> z0,
                                             NewtonOptions options = {});

/// Lower Cholesky factor, or nullopt when the matrix is not positive definite.
std::optional<Matrix> cholesky(const Matrix& m);

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
Vector symmetric_eigenvalues(const Matrix& m, double tol = 1e-14, std::size_t max_sweeps = 100);

/// SplitMix64; small-state generator for per-sample streams.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

using Rng = std::mt19937_64;

}  // namespace deeplde
