#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deeplde/completion.hpp"
#include "deeplde/errors.hpp"
#include "fixtures.hpp"

using namespace deeplde;

namespace {

Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("complete_linear examples") {
  const auto a = fixtures::make_instance(Matrix{{1, 2}}, Matrix(0, 2), {}, {1});
  const CompletionOutput c = complete_linear(a, Vector{1.0}, Vector{1.0});
  CHECK(c.z[0] == doctest::Approx(0.0));
  CHECK(c.dz_dx(0, 0) == doctest::Approx(-0.5));
  CHECK(c.y_full == Vector{1.0, 0.0});
  CHECK_FALSE(c.newton.has_value());

  const auto b = fixtures::make_instance(Matrix{{1, 1}}, Matrix(0, 2), {}, {1});
  CHECK(complete_linear(b, Vector{1.0}, Vector{0.3}).z[0] == doctest::Approx(0.7));
}

TEST_CASE("complete_linear on random instances") {
  Rng rng(1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ProblemInstance inst = generate_instance(15, 6, 4, ObjectiveKind::Quadratic, seed);
    const Vector d = random_vector(6, rng);
    const Vector x = random_vector(9, rng);
    const CompletionOutput c = complete_linear(inst, d, x);
    CHECK(norm_inf(eq_residual(inst, d, c.y_full)) <= 1e-9);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 9; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vector zp = complete_linear(inst, d, xp).z;
      const Vector zm = complete_linear(inst, d, xm).z;
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs((zp[i] - zm[i]) / (2 * h) - c.dz_dx(i, j)) <= 1e-6);
    }
  }
}

TEST_CASE("complete_newton scalar example") {
  auto inst = fixtures::make_instance(Matrix{{0, 1}}, Matrix(0, 2), {}, {1}, ObjectiveKind::NonlinearEq);
  inst.nonlinear_c = {0.0, 0.5};
  for (double x : {-3.0, 0.0, 2.5}) {
    const CompletionOutput c = complete_newton(inst, Vector{1.0}, Vector{x}, {});
    REQUIRE(c.newton.has_value());
    CHECK(c.newton->converged);
    // Root of z + 0.5 sin z = 1, located by bisection.
    CHECK(c.z[0] == doctest::Approx(0.6840366566778294).epsilon(1e-8));
    CHECK(std::abs(eq_residual(inst, Vector{1.0}, c.y_full)[0]) <= 1e-8);
  }
}

TEST_CASE("complete_newton with zero nonlinearity matches complete_linear") {
  Rng rng(2);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ProblemInstance inst = generate_instance(10, 4, 3, ObjectiveKind::NonlinearEq, seed);
    std::fill(inst.nonlinear_c.begin(), inst.nonlinear_c.end(), 0.0);
    const Vector d = random_vector(4, rng);
    const Vector x = random_vector(6, rng);
    const CompletionOutput n = complete_newton(inst, d, x, {});
    ProblemInstance lin = inst;
    lin.objective_kind = ObjectiveKind::Quadratic;
    lin.nonlinear_c.clear();
    const CompletionOutput l = complete_linear(lin, d, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(n.z[i] - l.z[i]) <= 1e-12);
    CHECK(max_abs_entry(n.dz_dx - l.dz_dx) <= 1e-12);
  }
}

TEST_CASE("complete_newton derivative matches finite differences") {
  Rng rng(3);
  const ProblemInstance inst = generate_instance(8, 3, 2, ObjectiveKind::NonlinearEq, 6);
  const Vector d = random_vector(3, rng);
  const Vector x = random_vector(5, rng);
  const CompletionOptions tight{1e-13, 100};
  const CompletionOutput c = complete_newton(inst, d, x, {}, tight);
  CHECK(norm_inf(eq_residual(inst, d, c.y_full)) <= 1e-13);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Vector zp = complete_newton(inst, d, xp, c.z, tight).z;
    const Vector zm = complete_newton(inst, d, xm, c.z, tight).z;
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = (zp[i] - zm[i]) / (2 * h);
      worst = std::max(worst, std::abs(fd - c.dz_dx(i, j)) / std::max(std::abs(fd), 1e-3));
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("implicit-function consistency under small perturbations") {
  Rng rng(4);
  const ProblemInstance inst = generate_instance(9, 4, 2, ObjectiveKind::NonlinearEq, 12);
  const CompletionOptions tight{1e-13, 100};
  const Vector d = random_vector(4, rng);
  const Vector x = random_vector(5, rng);
  const CompletionOutput c = complete_newton(inst, d, x, {}, tight);
  Vector delta = random_vector(5, rng);
  const double scale = 1e-5 / norm2(delta);
  for (double& v : delta) v *= scale;
  Vector xp = x;
  for (std::size_t j = 0; j < 5; ++j) xp[j] += delta[j];
  const Vector zp = complete_newton(inst, d, xp, c.z, tight).z;
  const Vector predicted = matvec(c.dz_dx, delta);
  Vector actual(4), err(4);
  for (std::size_t i = 0; i < 4; ++i) {
    actual[i] = zp[i] - c.z[i];
    err[i] = actual[i] - predicted[i];
  }
  CHECK(norm2(err) <= 1e-3 * norm2(actual));
}

TEST_CASE("complete_newton reports divergence") {
  auto inst = fixtures::make_instance(Matrix{{0, 1}}, Matrix(0, 2), {}, {1}, ObjectiveKind::NonlinearEq);
  inst.nonlinear_c = {0.0, 0.5};
  CHECK_THROWS_AS(complete_newton(inst, Vector{1.0}, Vector{0.0}, {}, CompletionOptions{1e-8, 1}), NewtonDiverged);
}

TEST_CASE("chain_gradient") {
  const auto inst = fixtures::make_instance(Matrix{{1, 2, 1}}, Matrix(0, 3), {}, {1});
  const CompletionOutput c = complete_linear(inst, Vector{0.5}, Vector{0.1, 0.2});
  CHECK(chain_gradient(Vector{1.0, -1.0}, Vector{0.0}, c) == Vector{1.0, -1.0});
  CompletionOutput zero = c;
  zero.dz_dx = Matrix(1, 2, 0.0);
  CHECK(chain_gradient(Vector{1.0, -1.0}, Vector{3.0}, zero) == Vector{1.0, -1.0});
  CHECK_THROWS_AS(chain_gradient(Vector{1.0}, Vector{3.0}, c), DimensionMismatch);

  // Total gradient of the objective along the completion manifold.
  Rng rng(8);
  const ProblemInstance r = generate_instance(10, 4, 2, ObjectiveKind::Quadratic, 30);
  const Vector d = random_vector(4, rng);
  const Vector x = random_vector(6, rng);
  const CompletionOutput cr = complete_linear(r, d, x);
  const Vector gy = objective_gradient(r, cr.y_full);
  const auto px = r.partition_x();
  Vector gx(6), gz(4);
  for (std::size_t j = 0; j < 6; ++j) gx[j] = gy[px[j]];
  for (std::size_t i = 0; i < 4; ++i) gz[i] = gy[r.partition_z[i]];
  const Vector total = chain_gradient(gx, gz, cr);
  for (std::size_t j = 0; j < 6; ++j) {
    Vector xp = x, xm = x;
    xp[j] += 1e-6;
    xm[j] -= 1e-6;
    const double fd = (objective(r, complete_linear(r, d, xp).y_full) -
                       objective(r, complete_linear(r, d, xm).y_full)) / 2e-6;
    CHECK(std::abs(fd - total[j]) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("EqualityCompleter agrees with the standalone completions") {
  Rng rng(10);
  for (auto kind : {ObjectiveKind::Quadratic, ObjectiveKind::NonlinearEq}) {
    const ProblemInstance inst = generate_instance(12, 5, 3, kind, 14);
    const EqualityCompleter comp(inst);
    const Vector d = random_vector(5, rng);
    const Vector x = random_vector(7, rng);
    const auto res = comp.complete(d, x);
    const CompletionOutput ref =
        kind == ObjectiveKind::Quadratic ? complete_linear(inst, d, x) : complete_newton(inst, d, x, {});
    for (std::size_t i = 0; i < 5; ++i) CHECK(res.z[i] == doctest::Approx(ref.z[i]).epsilon(1e-9));
    const Vector g = random_vector(5, rng);
    const Vector pb = comp.pullback(res, g);
    const Vector expect = matvec_transposed(ref.dz_dx, g);
    for (std::size_t j = 0; j < 7; ++j) CHECK(pb[j] == doctest::Approx(expect[j]).epsilon(1e-8));
    auto [sx, sz] = comp.split(res.y);
    CHECK(sx == x);
    CHECK(sz == res.z);
  }
}
