#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "deeplde/errors.hpp"
#include "deeplde/numerics.hpp"

using namespace deeplde;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

double bisect(double (*f)(double), double lo, double hi, double tol) {
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) < 0.0) == (f(mid) < 0.0)) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("solve_linear examples") {
  const Vector a = solve_linear(Matrix{{2, 0}, {0, 4}}, Vector{2, 4});
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == doctest::Approx(1.0));

  const Vector b = solve_linear(Matrix::identity(3), Vector{0.5, -2.0, 7.0});
  CHECK(b == Vector{0.5, -2.0, 7.0});

  const Vector c = solve_linear(Matrix{{1, 2}, {3, 4}}, Vector{5, 6});
  CHECK(c[0] == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(4.5).epsilon(1e-14));
}

TEST_CASE("solve_linear rejects singular systems") {
  CHECK_THROWS_AS(solve_linear(Matrix{{1, 2}, {2, 4}}, Vector{1, 1}), SingularMatrix);
  CHECK_THROWS_AS(solve_linear(Matrix{{1, 2, 3}}, Vector{1}), DimensionMismatch);
}

TEST_CASE("solve_linear residual on random well-conditioned systems") {
  Rng rng(11);
  for (std::size_t n : {1u, 5u, 50u, 200u}) {
    // Diagonal shift keeps the condition number small.
    Matrix m = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 3.0 * std::sqrt(static_cast<double>(n));
    const Vector b = random_matrix(n, 1, rng).values();
    const Vector x = solve_linear(m, b);
    const Vector mx = matvec(m, x);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(mx[i] - b[i]));
    CHECK(res <= 1e-9 * std::max(1.0, norm_inf(b)));
  }
}

TEST_CASE("LU transposed and matrix solves") {
  const Matrix m{{4, 1, 0}, {2, 5, 1}, {0, 3, 6}};
  const LuFactorization lu(m);
  const Vector b{1, 2, 3};
  const Vector xt = lu.solve_transposed(b);
  const Vector back = matvec_transposed(m, xt);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-13));
  const Matrix inv = lu.inverse();
  const Matrix id = matmul(m, inv);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(id(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
}

TEST_CASE("pseudo_inverse examples") {
  const Matrix a = pseudo_inverse(Matrix{{2}});
  CHECK(a(0, 0) == doctest::Approx(0.5));

  const Matrix id = pseudo_inverse(Matrix::identity(4));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(id(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));

  const Matrix r = pseudo_inverse(Matrix{{1, 1}});
  REQUIRE(r.rows() == 2);
  REQUIRE(r.cols() == 1);
  CHECK(r(0, 0) == doctest::Approx(0.5));
  CHECK(r(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("pseudo_inverse rank deficiency") {
  CHECK_THROWS_AS(pseudo_inverse(Matrix{{1, 1}, {2, 2}}), RankDeficient);
}

TEST_CASE("pseudo_inverse satisfies the Moore-Penrose identities") {
  Rng rng(3);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{1, 3}, {7, 10}, {30, 50}, {70, 100}}) {
    const Matrix m = random_matrix(r, c, rng);
    const Matrix p = pseudo_inverse(m);
    const Matrix mpm = matmul(matmul(m, p), m);
    const Matrix pmp = matmul(matmul(p, m), p);
    const Matrix mp = matmul(m, p);
    const Matrix pm = matmul(p, m);
    CHECK(max_abs_entry(mpm - m) <= 1e-7);
    CHECK(max_abs_entry(pmp - p) <= 1e-7);
    CHECK(max_abs_entry(mp - mp.transpose()) <= 1e-7);
    CHECK(max_abs_entry(pm - pm.transpose()) <= 1e-7);
  }
}

TEST_CASE("newton_solve on an affine scalar residual takes one step") {
  auto [z, rep] = newton_solve([](std::span<const double> v) { return Vector{v[0] - 1.0}; },
                               [](std::span<const double>) { return Matrix{{1.0}}; }, Vector{0.0});
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(z[0] == 1.0);
  CHECK(rep.final_residual_inf_norm <= 1e-8);
}

TEST_CASE("newton_solve reproduces solve_linear on linear systems") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m = random_matrix(8, 8, rng);
    for (std::size_t i = 0; i < 8; ++i) m(i, i) += 6.0;
    const Vector b = random_matrix(8, 1, rng).values();
    const Vector direct = solve_linear(m, b);
    auto [z, rep] = newton_solve(
        [&](std::span<const double> v) {
          Vector r = matvec(m, v);
          for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
          return r;
        },
        [&](std::span<const double>) { return m; }, Vector(8, 0.0), NewtonOptions{1e-8, 50});
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(z[i] - direct[i]) <= 1e-10);
  }
}

TEST_CASE("newton_solve on z + 0.5 sin z = 1 agrees with bisection") {
  auto f = [](double z) { return z + 0.5 * std::sin(z) - 1.0; };
  const double root = bisect(+f, 0.0, 1.0, 1e-12);
  CHECK(root == doctest::Approx(0.6840366566778294).epsilon(1e-10));
  auto [z, rep] = newton_solve([&](std::span<const double> v) { return Vector{f(v[0])}; },
                               [](std::span<const double> v) { return Matrix{{1.0 + 0.5 * std::cos(v[0])}}; },
                               Vector{0.0}, NewtonOptions{1e-12, 50});
  CHECK(rep.converged);
  CHECK(std::abs(f(z[0])) <= 1e-12);
  CHECK(std::abs(z[0] - root) <= 1e-10);
}

TEST_CASE("newton_solve reports failure instead of throwing") {
  // No real root.
  auto [z, rep] = newton_solve([](std::span<const double> v) { return Vector{v[0] * v[0] + 1.0}; },
                               [](std::span<const double> v) { return Matrix{{2.0 * v[0]}}; }, Vector{0.5},
                               NewtonOptions{1e-8, 20});
  CHECK_FALSE(rep.converged);
  // Singular Jacobian at the start.
  auto [z2, rep2] = newton_solve([](std::span<const double> v) { return Vector{v[0] * v[0] + 1.0}; },
                                 [](std::span<const double> v) { return Matrix{{2.0 * v[0]}}; },
                                 Vector{0.0});
  CHECK_FALSE(rep2.converged);
}

TEST_CASE("cholesky and symmetric eigenvalues") {
  const Matrix spd{{4, 2}, {2, 3}};
  const auto l = cholesky(spd);
  REQUIRE(l.has_value());
  const Matrix back = matmul(*l, l->transpose());
  CHECK(max_abs_entry(back - spd) <= 1e-14);
  CHECK_FALSE(cholesky(Matrix{{1, 2}, {2, 1}}).has_value());

  const Vector ev = symmetric_eigenvalues(Matrix{{2, 1}, {1, 2}});
  CHECK(ev[0] == doctest::Approx(1.0));
  CHECK(ev[1] == doctest::Approx(3.0));
}

TEST_CASE("matrix kernels") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  CHECK(matvec(a, Vector{1, 0, -1}) == Vector{-2, -2});
  CHECK(matvec_transposed(a, Vector{1, 1}) == Vector{5, 7, 9});
  const Matrix g = gram_rows(a);
  CHECK(g(0, 1) == 32.0);
  CHECK(g(1, 1) == 77.0);
  CHECK(a.select_columns(std::vector<std::size_t>{2, 0}) == Matrix{{3, 1}, {6, 4}});
  CHECK_THROWS_AS(matmul(a, a), DimensionMismatch);
}

TEST_CASE("SplitMix64 uniform stays in [0, 1)") {
  SplitMix64 s(42);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}
