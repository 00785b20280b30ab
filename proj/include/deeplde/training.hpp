#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deeplde/completion.hpp"
#include "deeplde/network.hpp"
#include "deeplde/numerics.hpp"
#include "deeplde/problems.hpp"

namespace deeplde {

enum class Method { DeepLDE, LDF, Supervised };
std::string to_string(Method method);
Method parse_method(const std::string& s);

enum class MonitorSplit { Validation, Test, Train };

/// Loop and schedule hyperparameters. Field names double as config-file keys.
struct TrainConfig {
  std::size_t T = 15;      // outer iterations
  std::size_t I = 25;      // initial inner iterations per outer iteration
  std::size_t I_w = 100;   // warm-up epochs before the first multiplier update
  std::size_t beta = 5;    // inner-iteration increment per outer iteration
  double gamma = 0.01;     // step-size decay
  double eta = 1e-3;       // Adam learning rate
  double rho0 = 0.1;       // λ step size
  double s0 = 0.5;         // μ step size (LDF)
  double lambda0 = 0.1;
  double mu0 = 0.1;        // LDF
  std::size_t batch_size = 200;
  std::uint64_t seed = 0;

  std::size_t hidden_width = 200;
  double dropout_rate = 0.1;
  MonitorSplit monitor = MonitorSplit::Validation;
  std::size_t threads = 1;
  CompletionOptions completion{};

  /// Defaults for the given objective family (non-convex uses the smaller
  /// multiplier step sizes).
  static TrainConfig defaults_for(ObjectiveKind kind);

  /// I_w + Σ_{t=1..T} (I + β(t−1)).
  std::size_t total_inner_epochs() const;

  /// Throws Error on an unusable config; returns non-fatal warnings.
  std::vector<std::string> validate() const;

  /// Sets one field from its config-file key. Throws FormatError.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
};

struct LagrangeState {
  Vector lambda;
  Vector mu;  // LDF only
  double rho = 0.0;
  double s = 0.0;  // LDF only
  std::size_t t = 0;
  std::size_t inner_iterations = 0;

  static LagrangeState initial(const TrainConfig& cfg, const ProblemInstance& instance, Method method);
};

/// I ← I + β, t ← t + 1, ρ ← ρ0/(1+γt), s ← s0/(1+γt).
LagrangeState schedule_update(const TrainConfig& cfg, LagrangeState state);

/// r_t = η·|D|·I_t/ρ_t with I_t = I + βt and ρ_t = ρ0/(1+γt).
double convergence_ratio(const TrainConfig& cfg, std::size_t dataset_size, std::size_t t);

struct LagrangianValue {
  double value = 0.0;
  Vector dL_dx;
  Vector dL_dz;
};

/// f(y) + λᵀ max(Gy − h, 0) at y = [x; Ψ(x)], with its partials with respect
/// to the x and z blocks of y.
LagrangianValue lagrangian_e(const ProblemInstance& instance, std::span<const double> d,
                             std::span<const double> x, std::span<const double> lambda);

struct FullGradient {
  double value = 0.0;
  Vector grad_y;
};

/// f(y) + λᵀ max(Gy − h, 0), gradient in y. Subgradient 0 at the kink.
FullGradient embedded_loss(const ProblemInstance& instance, std::span<const double> y,
                           std::span<const double> lambda);

/// f(y) + λᵀ max(Gy − h, 0) + μᵀ|h(y)|, gradient in y.
FullGradient full_lagrangian(const ProblemInstance& instance, std::span<const double> d,
                             std::span<const double> y, std::span<const double> lambda,
                             std::span<const double> mu);

/// Eval-mode prediction mapped to a full y. `completer` is null for methods
/// that predict y directly.
Vector predict_solution(const Mlp& model, const EqualityCompleter* completer,
                        std::span<const double> d);

/// λ + ρ Σ_d max(Gy(d) − h, 0), with the network in Eval mode.
Vector dual_update(const ProblemInstance& instance, std::span<const Vector> train_samples,
                   const Mlp& model, std::span<const double> lambda, double rho);

/// LDF update: λ as above and μ + s Σ_d |h(y(d))|, y predicted directly.
std::pair<Vector, Vector> dual_update_ldf(const ProblemInstance& instance,
                                          std::span<const Vector> train_samples, const Mlp& model,
                                          std::span<const double> lambda, std::span<const double> mu,
                                          double rho, double s);

enum class Phase { Warmup, Inner, Outer };
std::string to_string(Phase phase);

struct EpochRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::Inner;
  double obj_mean = 0.0;
  double eq_max = 0.0;
  double eq_mean = 0.0;
  double ineq_max = 0.0;
  double ineq_mean = 0.0;
  double lambda_l1 = 0.0;
  double rho = 0.0;
  double seconds = 0.0;
  // Not part of the CSV.
  double train_loss = 0.0;
  double mu_l1 = 0.0;
};

struct RunLog {
  Method method = Method::DeepLDE;
  std::vector<EpochRecord> records;
  std::size_t inner_epochs = 0;
  std::size_t completion_failures = 0;
  std::vector<std::string> warnings;

  static constexpr const char* kCsvHeader =
      "epoch,phase,obj_mean,eq_max,eq_mean,ineq_max,ineq_mean,lambda_l1,rho,seconds";

  std::string to_csv(bool include_seconds = true) const;
  /// epoch, obj_mean, eq_max, ineq_max (tab separated, inner epochs only).
  std::string to_tsv() const;
};

struct EpochStats {
  double loss_mean = 0.0;
  double obj_mean = 0.0;
  double eq_max = 0.0;
  double ineq_max = 0.0;
  double mean_abs_y = 0.0;
  std::size_t steps = 0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
};

/// Per-run data shared by the inner epochs: the dataset, the completion
/// machinery, labels (supervised) and the Newton warm-start cache.
class TrainingContext {
 public:
  TrainingContext(const Dataset& dataset, Method method, const TrainConfig& cfg,
                  const std::vector<Vector>* labels = nullptr);
  ~TrainingContext();
  TrainingContext(const TrainingContext&) = delete;
  TrainingContext& operator=(const TrainingContext&) = delete;

  const Dataset& dataset() const { return *dataset_; }
  Method method() const { return method_; }
  const TrainConfig& config() const { return cfg_; }
  /// Null for LDF and supervised training.
  const EqualityCompleter* completer() const { return completer_.get(); }
  std::size_t output_dim() const;

  Mlp make_model(Rng& rng) const;

  /// Eval-mode feasibility/objective summary over `range`.
  ViolationAccumulator measure(const Mlp& model, IndexRange range) const;

  struct Workspace;
  Workspace& workspace() { return *workspace_; }
  std::vector<Vector>& warm_start() { return warm_start_; }
  const std::vector<Vector>* labels() const { return labels_; }

 private:
  const Dataset* dataset_;
  Method method_;
  TrainConfig cfg_;
  const std::vector<Vector>* labels_;
  std::unique_ptr<EqualityCompleter> completer_;
  std::vector<Vector> warm_start_;
  std::unique_ptr<Workspace> workspace_;
};

struct SampleOutcome {
  bool skipped = false;  // completion failed; nothing accumulated
  double loss = 0.0;
  Vector y;
};

/// Train-mode forward (dropout drawn from a stream seeded with `seed`),
/// completion, loss and reverse pass for one sample; adds the parameter
/// gradient of the method's per-sample loss into `grads`.
SampleOutcome accumulate_sample_gradient(TrainingContext& ctx, const Mlp& model,
                                         const LagrangeState& state, std::size_t index,
                                         std::uint64_t seed, MlpGradients& grads);

/// One pass over the training split in shuffled minibatches; each minibatch
/// takes one Adam step on the mean per-sample gradient. Throws Diverged on a
/// non-finite loss, on |y| blow-up, or when more than 1% of Newton
/// completions fail.
EpochStats inner_epoch(TrainingContext& ctx, Mlp& model, AdamState& adam,
                       const LagrangeState& state, double eta, Rng& rng);

struct TrainResult {
  Mlp model;
  RunLog log;
  LagrangeState state;
};

TrainResult train_deeplde(const Dataset& dataset, const TrainConfig& cfg);
TrainResult train_ldf(const Dataset& dataset, const TrainConfig& cfg);
/// MSE regression onto `labels` (one full y per sample) for the same total
/// epoch budget.
TrainResult train_supervised(const Dataset& dataset, const std::vector<Vector>& labels,
                             const TrainConfig& cfg);
TrainResult train(const Dataset& dataset, Method method, const TrainConfig& cfg,
                  const std::vector<Vector>* labels = nullptr);

}  // namespace deeplde
