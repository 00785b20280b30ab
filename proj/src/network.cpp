#include "deeplde/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deeplde/errors.hpp"
#include "deeplde/io.hpp"

namespace deeplde {

namespace {

inline double elu_scalar(double v) { return v > 0.0 ? v : std::expm1(v); }
inline double elu_derivative(double v) { return v > 0.0 ? 1.0 : std::exp(v); }

}  // namespace

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    count += weights[l].values().size() + biases[l].size();
  return count;
}

void Mlp::validate() const {
  if (layer_dims.size() < 2) throw DimensionMismatch("network needs at least input and output");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
    throw DimensionMismatch("network has inconsistent layer count");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
        biases[l].size() != layer_dims[l + 1]) {
      throw DimensionMismatch("layer " + std::to_string(l) + " shape does not match layer_dims");
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw DimensionMismatch("dropout_rate must lie in [0, 1)");
}

Mlp make_mlp(std::vector<std::size_t> layer_dims, double dropout_rate, Rng& rng) {
  Mlp m;
  m.layer_dims = std::move(layer_dims);
  m.dropout_rate = dropout_rate;
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const std::size_t fan_in = m.layer_dims[l];
    const std::size_t fan_out = m.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_out, fan_in);
    for (double& v : w.values()) v = dist(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  m.validate();
  return m;
}

Mlp make_predictor(std::size_t input_dim, std::size_t hidden_width, std::size_t output_dim,
                   double dropout_rate, Rng& rng) {
  return make_mlp({input_dim, hidden_width, hidden_width, output_dim}, dropout_rate, rng);
}

Vector elu(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), elu_scalar);
  return out;
}

ForwardResult forward(const Mlp& model, std::span<const double> input, Mode mode,
                      SplitMix64* rng) {
  if (input.size() != model.input_dim()) {
    throw DimensionMismatch("forward: input has size " + std::to_string(input.size()) +
                            ", network expects " + std::to_string(model.input_dim()));
  }
  const bool dropout = mode == Mode::Train && model.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw Error("forward: Train mode with dropout needs a random stream");
  const double keep = 1.0 - model.dropout_rate;
  const double scale = 1.0 / keep;

  ForwardResult result;
  ForwardTape& tape = result.tape;
  tape.mode = mode;
  const std::size_t layers = model.num_layers();
  tape.activations.reserve(layers);
  tape.pre_activations.reserve(layers);
  tape.activations.emplace_back(input.begin(), input.end());

  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = model.weights[l];
    const Vector& a = tape.activations.back();
    Vector z(model.biases[l]);
    for (std::size_t i = 0; i < w.rows(); ++i) z[i] += dot(w.row(i), a);
    const bool hidden = l + 1 < layers;
    if (!hidden) {
      tape.pre_activations.push_back(z);
      result.output = std::move(z);
      break;
    }
    Vector h(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) h[i] = elu_scalar(z[i]);
    if (mode == Mode::Train) {
      Vector mask(z.size(), 1.0);
      if (dropout) {
        for (std::size_t i = 0; i < z.size(); ++i) {
          mask[i] = rng->uniform() < keep ? scale : 0.0;
          h[i] *= mask[i];
        }
      }
      tape.masks.push_back(std::move(mask));
    }
    tape.pre_activations.push_back(std::move(z));
    tape.activations.push_back(std::move(h));
  }
  return result;
}

Vector predict(const Mlp& model, std::span<const double> input) {
  return forward(model, input, Mode::Eval).output;
}

MlpGradients MlpGradients::zeros_like(const Mlp& model) {
  MlpGradients g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return g;
}

void MlpGradients::set_zero() {
  for (auto& w : weights) std::fill(w.values().begin(), w.values().end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void MlpGradients::add(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l].values();
    const auto& ow = other.weights[l].values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += ow[k];
    for (std::size_t k = 0; k < biases[l].size(); ++k) biases[l][k] += other.biases[l][k];
  }
}

void MlpGradients::scale(double s) {
  for (auto& w : weights)
    for (double& v : w.values()) v *= s;
  for (auto& b : biases)
    for (double& v : b) v *= s;
}

double MlpGradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, max_abs_entry(w));
  for (const auto& b : biases) m = std::max(m, norm_inf(b));
  return m;
}

void backward_accumulate(const Mlp& model, const ForwardTape& tape,
                         std::span<const double> grad_output, MlpGradients& into) {
  const std::size_t layers = model.num_layers();
  if (grad_output.size() != model.output_dim())
    throw DimensionMismatch("backward: upstream gradient has wrong size");
  if (tape.activations.size() != layers || tape.pre_activations.size() != layers)
    throw DimensionMismatch("backward: tape does not belong to this network");
  if (tape.mode == Mode::Train && tape.masks.size() + 1 != layers)
    throw DimensionMismatch("backward: tape is missing dropout masks");

  Vector delta(grad_output.begin(), grad_output.end());
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& w = model.weights[l];
    const Vector& a = tape.activations[l];
    Matrix& gw = into.weights[l];
    Vector& gb = into.biases[l];
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double di = delta[i];
      gb[i] += di;
      if (di == 0.0) continue;
      auto row = gw.row(i);
      for (std::size_t j = 0; j < a.size(); ++j) row[j] += di * a[j];
    }
    if (l == 0) break;
    Vector upstream = matvec_transposed(w, delta);
    const Vector& pre = tape.pre_activations[l - 1];
    if (tape.mode == Mode::Train) {
      const Vector& mask = tape.masks[l - 1];
      for (std::size_t i = 0; i < upstream.size(); ++i)
        upstream[i] *= mask[i] * elu_derivative(pre[i]);
    } else {
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= elu_derivative(pre[i]);
    }
    delta = std::move(upstream);
  }
}

MlpGradients backward(const Mlp& model, const ForwardTape& tape,
                      std::span<const double> grad_output) {
  MlpGradients g = MlpGradients::zeros_like(model);
  backward_accumulate(model, tape, grad_output, g);
  return g;
}

AdamState AdamState::for_model(const Mlp& model) {
  AdamState s;
  s.first_moment = MlpGradients::zeros_like(model);
  s.second_moment = MlpGradients::zeros_like(model);
  return s;
}

namespace {

void adam_update(std::span<double> param, std::span<double> m, std::span<double> v,
                 std::span<const double> g, double b1, double b2, double step_size,
                 double eps_hat) {
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
    param[k] -= step_size * m[k] / (std::sqrt(v[k]) + eps_hat);
  }
}

}  // namespace

void adam_step(Mlp& model, AdamState& state, const MlpGradients& gradients, double learning_rate) {
  if (gradients.weights.size() != model.num_layers() ||
      state.first_moment.weights.size() != model.num_layers()) {
    throw DimensionMismatch("adam_step: gradient/state shapes do not match the network");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double corr1 = 1.0 - std::pow(state.beta1, t);
  const double corr2 = 1.0 - std::pow(state.beta2, t);
  // Folded bias correction: θ -= η·m̂/(√v̂+ε) with m̂ = m/c1, v̂ = v/c2.
  const double step_size = learning_rate * std::sqrt(corr2) / corr1;
  const double eps_hat = state.epsilon * std::sqrt(corr2);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    adam_update(model.weights[l].values(), state.first_moment.weights[l].values(),
                state.second_moment.weights[l].values(), gradients.weights[l].values(),
                state.beta1, state.beta2, step_size, eps_hat);
    adam_update(model.biases[l], state.first_moment.biases[l], state.second_moment.biases[l],
                gradients.biases[l], state.beta1, state.beta2, step_size, eps_hat);
  }
}

nlohmann::json to_json(const Mlp& model) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    weights.push_back(model.weights[l].values());
    biases.push_back(model.biases[l]);
  }
  return {{"layer_dims", model.layer_dims},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)},
          {"dropout_rate", model.dropout_rate}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    Mlp m;
    m.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    m.dropout_rate = j.at("dropout_rate").get<double>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (m.layer_dims.size() < 2 || weights.size() + 1 != m.layer_dims.size())
      throw DimensionMismatch("checkpoint layer count does not match layer_dims");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      m.weights.emplace_back(m.layer_dims[l + 1], m.layer_dims[l],
                             weights[l].get<std::vector<double>>());
      m.biases.push_back(biases.at(l).get<Vector>());
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  write_json(path, to_json(model));
}

Mlp load_checkpoint(const std::filesystem::path& path) { return mlp_from_json(read_json(path)); }

}  // namespace deeplde
