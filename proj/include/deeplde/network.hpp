#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "deeplde/numerics.hpp"

namespace deeplde {

enum class Mode { Train, Eval };

/// Fully connected network: ELU hidden layers followed by a linear output
/// layer. Dropout (inverted) is applied after every hidden activation.
struct Mlp {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;  // weights[l] is layer_dims[l+1] x layer_dims[l]
  std::vector<Vector> biases;
  double dropout_rate = 0.1;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Throws DimensionMismatch if shapes do not chain.
  void validate() const;
};

/// Glorot-uniform weights, zero biases.
Mlp make_mlp(std::vector<std::size_t> layer_dims, double dropout_rate, Rng& rng);

/// input -> hidden -> hidden -> output, the default predictor shape.
Mlp make_predictor(std::size_t input_dim, std::size_t hidden_width, std::size_t output_dim,
                   double dropout_rate, Rng& rng);

struct ForwardTape {
  Mode mode = Mode::Eval;
  std::vector<Vector> activations;      // activations[0] is the input
  std::vector<Vector> pre_activations;  // one per layer
  std::vector<Vector> masks;            // scaled keep-masks per hidden layer, Train only
};

Vector elu(std::span<const double> v);

struct ForwardResult {
  Vector output;
  ForwardTape tape;
};

/// `rng` is only drawn from in Train mode with a positive dropout rate.
ForwardResult forward(const Mlp& model, std::span<const double> input, Mode mode,
                      SplitMix64* rng = nullptr);

/// Eval-mode output without keeping a tape.
Vector predict(const Mlp& model, std::span<const double> input);

/// Parameter-shaped container for gradients and optimizer moments.
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpGradients zeros_like(const Mlp& model);
  void set_zero();
  void add(const MlpGradients& other);
  void scale(double s);
  double max_abs() const;
};

/// Reverse pass through the masks recorded in `tape`; gradients are added
/// into `into`.
void backward_accumulate(const Mlp& model, const ForwardTape& tape,
                         std::span<const double> grad_output, MlpGradients& into);

MlpGradients backward(const Mlp& model, const ForwardTape& tape,
                      std::span<const double> grad_output);

struct AdamState {
  MlpGradients first_moment;
  MlpGradients second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_model(const Mlp& model);
};

void adam_step(Mlp& model, AdamState& state, const MlpGradients& gradients, double learning_rate);

// Checkpoint format:
// {"layer_dims":[...], "weights":[[row-major]...], "biases":[[...]], "dropout_rate":r}
nlohmann::json to_json(const Mlp& model);
Mlp mlp_from_json(const nlohmann::json& j);
void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace deeplde
