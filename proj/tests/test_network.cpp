#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "deeplde/errors.hpp"
#include "deeplde/network.hpp"

using namespace deeplde;

namespace {

Mlp identity_layer() {
  Mlp m;
  m.layer_dims = {2, 2};
  m.weights = {Matrix::identity(2)};
  m.biases = {Vector{0, 0}};
  m.dropout_rate = 0.0;
  return m;
}

double linear_functional(const Mlp& m, std::span<const double> d, std::span<const double> c) {
  return dot(predict(m, d), c);
}

}  // namespace

TEST_CASE("elu examples") {
  CHECK(elu(Vector{0.0}) == Vector{0.0});
  CHECK(elu(Vector{1.0, 2.0}) == Vector{1.0, 2.0});
  CHECK(elu(Vector{-1.0})[0] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(Vector{-1.0})[0] == doctest::Approx(-0.6321).epsilon(1e-4));
}

TEST_CASE("identity network") {
  const Mlp m = identity_layer();
  CHECK(predict(m, Vector{1, 2}) == Vector{1, 2});
  CHECK_THROWS_AS(forward(m, Vector{1, 2, 3}, Mode::Eval), DimensionMismatch);
}

TEST_CASE("default predictor shape and initialization") {
  Rng rng(1);
  const Mlp m = make_predictor(30, 200, 20, 0.1, rng);
  CHECK(m.layer_dims == std::vector<std::size_t>{30, 200, 200, 20});
  CHECK(m.dropout_rate == 0.1);
  CHECK(m.parameter_count() == 30 * 200 + 200 + 200 * 200 + 200 + 200 * 20 + 20);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.layer_dims[l] + m.layer_dims[l + 1]));
    CHECK(max_abs_entry(m.weights[l]) <= limit);
    CHECK(norm_inf(m.biases[l]) == 0.0);
  }
}

TEST_CASE("Eval forward is deterministic and matches a straight-line evaluation") {
  Rng rng(7);
  const Mlp m = make_predictor(3, 5, 2, 0.1, rng);
  const Vector d{0.3, -0.7, 1.1};
  const Vector a = predict(m, d);
  CHECK(a == predict(m, d));

  Vector h = d;
  for (std::size_t l = 0; l < 3; ++l) {
    Vector z(m.layer_dims[l + 1]);
    for (std::size_t i = 0; i < z.size(); ++i) {
      double s = m.biases[l][i];
      for (std::size_t j = 0; j < h.size(); ++j) s += m.weights[l](i, j) * h[j];
      z[i] = l < 2 ? (s > 0 ? s : std::exp(s) - 1.0) : s;
    }
    h = z;
  }
  for (std::size_t i = 0; i < 2; ++i) CHECK(a[i] == doctest::Approx(h[i]).epsilon(1e-14));
}

TEST_CASE("tape masks exist only in Train mode") {
  Rng rng(2);
  const Mlp m = make_predictor(3, 4, 2, 0.5, rng);
  SplitMix64 s(1);
  const auto train = forward(m, Vector{1, 2, 3}, Mode::Train, &s);
  CHECK(train.tape.masks.size() == 2);
  for (const auto& mask : train.tape.masks)
    for (double v : mask) CHECK((v == 0.0 || v == doctest::Approx(2.0)));
  const auto eval = forward(m, Vector{1, 2, 3}, Mode::Eval);
  CHECK(eval.tape.masks.empty());
  CHECK_THROWS_AS(forward(m, Vector{1, 2, 3}, Mode::Train), Error);
}

TEST_CASE("backward closed forms") {
  const Mlp m = identity_layer();
  const Vector d{1.5, -2.0};
  const auto fw = forward(m, d, Mode::Eval);
  const MlpGradients zero = backward(m, fw.tape, Vector{0, 0});
  CHECK(zero.max_abs() == 0.0);

  const Vector up{3.0, 0.5};
  const MlpGradients g = backward(m, fw.tape, up);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(g.biases[0][i] == up[i]);
    for (std::size_t j = 0; j < 2; ++j) CHECK(g.weights[0](i, j) == up[i] * d[j]);
  }
  CHECK_THROWS_AS(backward(m, fw.tape, Vector{1}), DimensionMismatch);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(9);
  Mlp m = make_predictor(4, 6, 3, 0.1, rng);
  // Non-zero biases so every ELU branch is exercised.
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto& b : m.biases)
    for (double& v : b) v = nd(rng);
  const Vector d{0.4, -1.2, 0.9, 0.1};
  const Vector c{1.0, -2.0, 0.5};
  const auto fw = forward(m, d, Mode::Eval);
  const MlpGradients g = backward(m, fw.tape, c);

  const double h = 1e-6;
  double worst = 0.0;
  auto check_param = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + h;
    const double fp = linear_functional(m, d, c);
    p = saved - h;
    const double fm = linear_functional(m, d, c);
    p = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(fd - analytic) / std::max(std::abs(fd), 1e-3);
    worst = std::max(worst, rel);
  };
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    for (std::size_t k = 0; k < m.weights[l].values().size(); ++k)
      check_param(m.weights[l].values()[k], g.weights[l].values()[k]);
    for (std::size_t k = 0; k < m.biases[l].size(); ++k) check_param(m.biases[l][k], g.biases[l][k]);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("backward reuses the recorded masks") {
  Rng rng(4);
  const Mlp m = make_predictor(3, 8, 2, 0.3, rng);
  SplitMix64 s(99);
  const auto fw = forward(m, Vector{0.1, 0.2, 0.3}, Mode::Train, &s);
  const MlpGradients a = backward(m, fw.tape, Vector{1, 1});
  const MlpGradients b = backward(m, fw.tape, Vector{1, 1});
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l] == b.biases[l]);
  }
  // Units dropped in the first hidden layer receive no gradient from above.
  const auto& mask = fw.tape.masks[0];
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == 0.0) CHECK(a.biases[0][i] == 0.0);
}

TEST_CASE("dropout expectation matches Eval output") {
  // One hidden layer: the output is linear in the mask, so the Train-mode
  // mean equals the Eval-mode output exactly in expectation.
  Rng rng(12);
  const Mlp m = make_mlp({3, 16, 4}, 0.3, rng);
  const Vector d{0.5, -0.25, 1.0};
  const Vector eval = predict(m, d);
  const std::size_t draws = 20000;
  Vector sum(4, 0.0), sq(4, 0.0);
  SplitMix64 s(2024);
  for (std::size_t k = 0; k < draws; ++k) {
    const Vector y = forward(m, d, Mode::Train, &s).output;
    for (std::size_t i = 0; i < 4; ++i) {
      sum[i] += y[i];
      sq[i] += y[i] * y[i];
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const double mean = sum[i] / draws;
    const double var = sq[i] / draws - mean * mean;
    const double se = std::sqrt(var / draws);
    CHECK(std::abs(mean - eval[i]) <= 3.0 * se);
  }
}

TEST_CASE("adam_step examples") {
  Mlp m;
  m.layer_dims = {1, 1};
  m.weights = {Matrix{{0.0}}};
  m.biases = {Vector{0.0}};
  m.dropout_rate = 0.0;

  AdamState st = AdamState::for_model(m);
  MlpGradients g = MlpGradients::zeros_like(m);
  adam_step(m, st, g, 1e-3);
  CHECK(st.step_count == 1);
  CHECK(m.weights[0](0, 0) == 0.0);

  st = AdamState::for_model(m);
  g.weights[0](0, 0) = 2.0;
  adam_step(m, st, g, 1e-3);
  CHECK(m.weights[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));

  // f(w) = w² from w = 1 against the textbook recurrence.
  m.weights[0](0, 0) = 1.0;
  st = AdamState::for_model(m);
  double w = 1.0, mo = 0.0, ve = 0.0;
  for (int t = 1; t <= 100; ++t) {
    g.weights[0](0, 0) = 2.0 * m.weights[0](0, 0);
    adam_step(m, st, g, 0.01);
    const double gr = 2.0 * w;
    mo = 0.9 * mo + 0.1 * gr;
    ve = 0.999 * ve + 0.001 * gr * gr;
    const double mh = mo / (1.0 - std::pow(0.9, t));
    const double vh = ve / (1.0 - std::pow(0.999, t));
    w -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(std::abs(m.weights[0](0, 0)) < 0.5);
  CHECK(m.weights[0](0, 0) == doctest::Approx(w).epsilon(1e-9));
}

TEST_CASE("checkpoint round trip and field names") {
  Rng rng(5);
  const Mlp m = make_predictor(3, 4, 2, 0.1, rng);
  const nlohmann::json j = to_json(m);
  CHECK(j.size() == 4);
  CHECK(j.contains("layer_dims"));
  CHECK(j.contains("weights"));
  CHECK(j.contains("biases"));
  CHECK(j.contains("dropout_rate"));
  CHECK(j["weights"][0].size() == 12);

  const auto path = std::filesystem::temp_directory_path() / "deeplde_test_ckpt.json";
  save_checkpoint(m, path);
  const Mlp back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.layer_dims == m.layer_dims);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    CHECK(back.weights[l] == m.weights[l]);
    CHECK(back.biases[l] == m.biases[l]);
  }

  nlohmann::json bad = j;
  bad["layer_dims"] = {3, 5, 4, 2};
  CHECK_THROWS_AS(mlp_from_json(bad), Error);
}
