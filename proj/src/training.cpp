#include "deeplde/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "deeplde/errors.hpp"

namespace deeplde {

std::string to_string(Method method) {
  switch (method) {
    case Method::DeepLDE:
      return "deeplde";
    case Method::LDF:
      return "ldf";
    case Method::Supervised:
      return "sl";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "deeplde") return Method::DeepLDE;
  if (s == "ldf") return Method::LDF;
  if (s == "sl") return Method::Supervised;
  throw FormatError("unknown method '" + s + "' (expected deeplde, ldf or sl)");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Warmup:
      return "warmup";
    case Phase::Inner:
      return "inner";
    case Phase::Outer:
      return "outer";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// TrainConfig

TrainConfig TrainConfig::defaults_for(ObjectiveKind kind) {
  TrainConfig cfg;
  if (kind == ObjectiveKind::SinNonconvex) {
    cfg.rho0 = 1e-4;
    cfg.s0 = 5e-4;
  }
  return cfg;
}

std::size_t TrainConfig::total_inner_epochs() const {
  std::size_t total = I_w;
  for (std::size_t t = 1; t <= T; ++t) total += I + beta * (t - 1);
  return total;
}

std::vector<std::string> TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invalid training config: " + what);
  };
  require(batch_size >= 1, "batch_size must be at least 1");
  require(eta >= 0.0 && std::isfinite(eta), "eta must be finite and non-negative");
  require(rho0 > 0.0, "rho0 must be positive");
  require(s0 > 0.0, "s0 must be positive");
  require(lambda0 >= 0.0, "lambda0 must be non-negative");
  require(gamma >= 0.0, "gamma must be non-negative");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(hidden_width >= 1, "hidden_width must be at least 1");
  require(threads >= 1, "threads must be at least 1");
  std::vector<std::string> warnings;
  if (beta == 0 && gamma == 0.0) {
    warnings.emplace_back(
        "beta = 0 and gamma = 0: the weight/multiplier update ratio stays bounded, so "
        "convergence of the primal-dual loop is not guaranteed");
  }
  return warnings;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* begin = value.data();
  const char* end = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    // std::from_chars for double is unavailable on some toolchains.
    char* stop = nullptr;
    out = std::strtod(value.c_str(), &stop);
    if (value.empty() || stop != value.c_str() + value.size())
      throw FormatError("config key '" + key + "': '" + value + "' is not a number");
  } else {
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
      throw FormatError("config key '" + key + "': '" + value + "' is not a non-negative integer");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MonitorSplit parse_monitor(const std::string& s) {
  if (s == "validation") return MonitorSplit::Validation;
  if (s == "test") return MonitorSplit::Test;
  if (s == "train") return MonitorSplit::Train;
  throw FormatError("monitor must be validation, test or train");
}

std::string monitor_name(MonitorSplit m) {
  switch (m) {
    case MonitorSplit::Validation:
      return "validation";
    case MonitorSplit::Test:
      return "test";
    case MonitorSplit::Train:
      return "train";
  }
  return "validation";
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "T") T = parse_number<std::size_t>(key, value);
  else if (key == "I") I = parse_number<std::size_t>(key, value);
  else if (key == "I_w") I_w = parse_number<std::size_t>(key, value);
  else if (key == "beta" || key == "β") beta = parse_number<std::size_t>(key, value);
  else if (key == "gamma" || key == "γ") gamma = parse_number<double>(key, value);
  else if (key == "eta" || key == "η") eta = parse_number<double>(key, value);
  else if (key == "rho0" || key == "ρ0" || key == "ρ₀") rho0 = parse_number<double>(key, value);
  else if (key == "s0" || key == "s₀") s0 = parse_number<double>(key, value);
  else if (key == "lambda0" || key == "λ0" || key == "λ₀") lambda0 = parse_number<double>(key, value);
  else if (key == "mu0" || key == "μ0" || key == "μ₀") mu0 = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "hidden_width") hidden_width = parse_number<std::size_t>(key, value);
  else if (key == "dropout_rate") dropout_rate = parse_number<double>(key, value);
  else if (key == "monitor") monitor = parse_monitor(value);
  else if (key == "threads") threads = parse_number<std::size_t>(key, value);
  else if (key == "completion_tol") completion.tol = parse_number<double>(key, value);
  else if (key == "completion_max_iter") completion.max_iter = parse_number<std::size_t>(key, value);
  else throw FormatError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {{"T", std::to_string(T)},
          {"I", std::to_string(I)},
          {"I_w", std::to_string(I_w)},
          {"beta", std::to_string(beta)},
          {"gamma", format_double(gamma)},
          {"eta", format_double(eta)},
          {"rho0", format_double(rho0)},
          {"s0", format_double(s0)},
          {"lambda0", format_double(lambda0)},
          {"mu0", format_double(mu0)},
          {"batch_size", std::to_string(batch_size)},
          {"seed", std::to_string(seed)},
          {"hidden_width", std::to_string(hidden_width)},
          {"dropout_rate", format_double(dropout_rate)},
          {"monitor", monitor_name(monitor)},
          {"threads", std::to_string(threads)},
          {"completion_tol", format_double(completion.tol)},
          {"completion_max_iter", std::to_string(completion.max_iter)}};
}

// ---------------------------------------------------------------------------
// Multiplier state and schedules

LagrangeState LagrangeState::initial(const TrainConfig& cfg, const ProblemInstance& instance,
                                     Method method) {
  LagrangeState st;
  st.lambda.assign(instance.n_ineq, cfg.lambda0);
  if (method == Method::LDF) st.mu.assign(instance.n_eq, cfg.mu0);
  st.rho = cfg.rho0;
  st.s = cfg.s0;
  st.t = 0;
  st.inner_iterations = cfg.I;
  return st;
}

LagrangeState schedule_update(const TrainConfig& cfg, LagrangeState state) {
  state.t += 1;
  state.inner_iterations += cfg.beta;
  const double decay = 1.0 + cfg.gamma * static_cast<double>(state.t);
  state.rho = cfg.rho0 / decay;
  state.s = cfg.s0 / decay;
  return state;
}

double convergence_ratio(const TrainConfig& cfg, std::size_t dataset_size, std::size_t t) {
  const double td = static_cast<double>(t);
  const double inner = static_cast<double>(cfg.I) + static_cast<double>(cfg.beta) * td;
  const double sgd_steps = static_cast<double>(dataset_size) * inner;
  const double rho_t = cfg.rho0 / (1.0 + cfg.gamma * td);
  return cfg.eta * sgd_steps / rho_t;
}

// ---------------------------------------------------------------------------
// Losses

FullGradient embedded_loss(const ProblemInstance& instance, std::span<const double> y,
                           std::span<const double> lambda) {
  if (lambda.size() != instance.n_ineq) throw DimensionMismatch("lambda must have n_ineq entries");
  FullGradient out;
  out.value = objective(instance, y);
  out.grad_y = objective_gradient(instance, y);
  for (std::size_t i = 0; i < instance.n_ineq; ++i) {
    auto g = instance.G.row(i);
    const double slack = dot(g, y) - instance.h_ub[i];
    if (slack > 0.0) {
      out.value += lambda[i] * slack;
      for (std::size_t j = 0; j < g.size(); ++j) out.grad_y[j] += lambda[i] * g[j];
    }
  }
  return out;
}

FullGradient full_lagrangian(const ProblemInstance& instance, std::span<const double> d,
                             std::span<const double> y, std::span<const double> lambda,
                             std::span<const double> mu) {
  if (mu.size() != instance.n_eq) throw DimensionMismatch("mu must have n_eq entries");
  FullGradient out = embedded_loss(instance, y, lambda);
  const Vector r = eq_residual(instance, d, y);
  Vector weights(instance.n_eq, 0.0);
  bool any = false;
  for (std::size_t i = 0; i < r.size(); ++i) {
    out.value += mu[i] * std::abs(r[i]);
    if (r[i] != 0.0) {
      weights[i] = r[i] > 0.0 ? mu[i] : -mu[i];
      any = true;
    }
  }
  if (any) {
    const Vector extra = matvec_transposed(eq_jacobian(instance, y), weights);
    for (std::size_t j = 0; j < extra.size(); ++j) out.grad_y[j] += extra[j];
  }
  return out;
}

LagrangianValue lagrangian_e(const ProblemInstance& instance, std::span<const double> d,
                             std::span<const double> x, std::span<const double> lambda) {
  for (double l : lambda)
    if (l < 0.0) throw Error("lagrangian_e: multipliers must be non-negative");
  const EqualityCompleter completer(instance);
  const auto res = completer.complete(d, x);
  const FullGradient loss = embedded_loss(instance, res.y, lambda);
  auto [gx, gz] = completer.split(loss.grad_y);
  return {loss.value, std::move(gx), std::move(gz)};
}

Vector predict_solution(const Mlp& model, const EqualityCompleter* completer,
                        std::span<const double> d) {
  Vector out = predict(model, d);
  if (completer == nullptr) return out;
  return completer->complete(d, out, {}, /*throw_on_failure=*/false).y;
}

namespace {

struct ViolationSums {
  Vector ineq;
  Vector eq;
};

ViolationSums sum_violations(const ProblemInstance& instance, const EqualityCompleter* completer,
                             std::span<const Vector> samples, const Mlp& model, bool with_eq) {
  ViolationSums sums{Vector(instance.n_ineq, 0.0), Vector(with_eq ? instance.n_eq : 0, 0.0)};
  for (const Vector& d : samples) {
    const Vector y = predict_solution(model, completer, d);
    const Vector r = ineq_violation(instance, y);
    for (std::size_t i = 0; i < r.size(); ++i) sums.ineq[i] += r[i];
    if (with_eq) {
      const Vector h = eq_residual(instance, d, y);
      for (std::size_t i = 0; i < h.size(); ++i) sums.eq[i] += std::abs(h[i]);
    }
  }
  return sums;
}

}  // namespace

Vector dual_update(const ProblemInstance& instance, std::span<const Vector> train_samples,
                   const Mlp& model, std::span<const double> lambda, double rho) {
  if (lambda.size() != instance.n_ineq) throw DimensionMismatch("lambda must have n_ineq entries");
  const EqualityCompleter completer(instance);
  const ViolationSums sums = sum_violations(instance, &completer, train_samples, model, false);
  Vector out(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rho * sums.ineq[i];
  return out;
}

std::pair<Vector, Vector> dual_update_ldf(const ProblemInstance& instance,
                                          std::span<const Vector> train_samples, const Mlp& model,
                                          std::span<const double> lambda, std::span<const double> mu,
                                          double rho, double s) {
  if (lambda.size() != instance.n_ineq || mu.size() != instance.n_eq)
    throw DimensionMismatch("multiplier sizes do not match the instance");
  const ViolationSums sums = sum_violations(instance, nullptr, train_samples, model, true);
  Vector new_lambda(lambda.begin(), lambda.end());
  Vector new_mu(mu.begin(), mu.end());
  for (std::size_t i = 0; i < new_lambda.size(); ++i) new_lambda[i] += rho * sums.ineq[i];
  for (std::size_t i = 0; i < new_mu.size(); ++i) new_mu[i] += s * sums.eq[i];
  return {std::move(new_lambda), std::move(new_mu)};
}

// ---------------------------------------------------------------------------
// RunLog

std::string RunLog::to_csv(bool include_seconds) const {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << to_string(r.phase) << ',' << format_double(r.obj_mean) << ','
        << format_double(r.eq_max) << ',' << format_double(r.eq_mean) << ','
        << format_double(r.ineq_max) << ',' << format_double(r.ineq_mean) << ','
        << format_double(r.lambda_l1) << ',' << format_double(r.rho) << ','
        << (include_seconds ? format_double(r.seconds) : std::string("0")) << '\n';
  }
  return out.str();
}

std::string RunLog::to_tsv() const {
  std::ostringstream out;
  out << "epoch\tobj_mean\teq_max\tineq_max\n";
  for (const auto& r : records) {
    if (r.phase == Phase::Outer) continue;
    out << r.epoch << '\t' << format_double(r.obj_mean) << '\t' << format_double(r.eq_max) << '\t'
        << format_double(r.ineq_max) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Training context and the inner epoch

namespace {

// Minibatches are reduced over a fixed number of contiguous chunks so that
// results do not depend on the worker count.
constexpr std::size_t kChunks = 8;

struct ChunkStats {
  double loss_sum = 0.0;
  double obj_sum = 0.0;
  double eq_max = 0.0;
  double ineq_max = 0.0;
  double abs_y_sum = 0.0;
  std::size_t count = 0;
  std::size_t skipped = 0;
  bool non_finite = false;
};

}  // namespace

struct TrainingContext::Workspace {
  std::vector<MlpGradients> chunk_grads;
  MlpGradients total;
};

TrainingContext::TrainingContext(const Dataset& dataset, Method method, const TrainConfig& cfg,
                                 const std::vector<Vector>* labels)
    : dataset_(&dataset), method_(method), cfg_(cfg), labels_(labels),
      workspace_(std::make_unique<Workspace>()) {
  dataset.instance.validate();
  if (method == Method::DeepLDE) {
    completer_ = std::make_unique<EqualityCompleter>(dataset.instance, cfg.completion);
    if (completer_->nonlinear()) warm_start_.resize(dataset.samples.size());
  }
  if (method == Method::Supervised) {
    if (labels == nullptr) throw Error("supervised training requires labels");
    if (labels->size() != dataset.samples.size())
      throw DimensionMismatch("labels must align with the dataset samples");
    for (const auto& y : *labels)
      if (y.size() != dataset.instance.n) throw DimensionMismatch("label must have n entries");
  }
}

TrainingContext::~TrainingContext() = default;

std::size_t TrainingContext::output_dim() const {
  const auto& inst = dataset_->instance;
  return method_ == Method::DeepLDE ? inst.n - inst.n_eq : inst.n;
}

Mlp TrainingContext::make_model(Rng& rng) const {
  return make_predictor(dataset_->instance.n_eq, cfg_.hidden_width, output_dim(), cfg_.dropout_rate,
                        rng);
}

ViolationAccumulator TrainingContext::measure(const Mlp& model, IndexRange range) const {
  ViolationAccumulator acc;
  for (const Vector& d : dataset_->range(range))
    acc.add(dataset_->instance, d, predict_solution(model, completer_.get(), d));
  return acc;
}

SampleOutcome accumulate_sample_gradient(TrainingContext& ctx, const Mlp& model,
                                         const LagrangeState& state, std::size_t index,
                                         std::uint64_t seed, MlpGradients& grads) {
  const Dataset& ds = ctx.dataset();
  const ProblemInstance& inst = ds.instance;
  const Vector& d = ds.samples[index];
  SplitMix64 stream(seed);
  ForwardResult fw = forward(model, d, Mode::Train, &stream);

  SampleOutcome out;
  Vector grad_out;
  switch (ctx.method()) {
    case Method::DeepLDE: {
      const EqualityCompleter& completer = *ctx.completer();
      std::span<const double> z_init;
      if (completer.nonlinear() && !ctx.warm_start()[index].empty()) z_init = ctx.warm_start()[index];
      EqualityCompleter::Result res;
      try {
        res = completer.complete(d, fw.output, z_init);
      } catch (const NewtonDiverged&) {
        out.skipped = true;
        return out;
      }
      if (completer.nonlinear()) ctx.warm_start()[index] = res.z;
      const FullGradient l = embedded_loss(inst, res.y, state.lambda);
      auto [gx, gz] = completer.split(l.grad_y);
      const Vector extra = completer.pullback(res, gz);
      for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += extra[k];
      grad_out = std::move(gx);
      out.loss = l.value;
      out.y = std::move(res.y);
      break;
    }
    case Method::LDF: {
      const FullGradient l = full_lagrangian(inst, d, fw.output, state.lambda, state.mu);
      grad_out = l.grad_y;
      out.loss = l.value;
      out.y = fw.output;
      break;
    }
    case Method::Supervised: {
      const Vector& label = (*ctx.labels())[index];
      const double inv_n = 1.0 / static_cast<double>(inst.n);
      grad_out.resize(inst.n);
      for (std::size_t j = 0; j < inst.n; ++j) {
        const double e = fw.output[j] - label[j];
        out.loss += e * e * inv_n;
        grad_out[j] = 2.0 * e * inv_n;
      }
      out.y = fw.output;
      break;
    }
  }
  if (std::isfinite(out.loss)) backward_accumulate(model, fw.tape, grad_out, grads);
  return out;
}

namespace {

void process_sample(TrainingContext& ctx, const Mlp& model, const LagrangeState& state,
                    std::size_t index, std::uint64_t seed, MlpGradients& grads, ChunkStats& stats) {
  const ProblemInstance& inst = ctx.dataset().instance;
  const SampleOutcome out = accumulate_sample_gradient(ctx, model, state, index, seed, grads);
  if (out.skipped) {
    ++stats.skipped;
    return;
  }
  if (!std::isfinite(out.loss)) {
    stats.non_finite = true;
    return;
  }
  const Vector& d = ctx.dataset().samples[index];
  stats.loss_sum += out.loss;
  stats.obj_sum += objective(inst, out.y);
  for (double v : out.y) stats.abs_y_sum += std::abs(v);
  for (double r : ineq_violation(inst, out.y)) stats.ineq_max = std::max(stats.ineq_max, r);
  for (double r : eq_residual(inst, d, out.y)) stats.eq_max = std::max(stats.eq_max, std::abs(r));
  ++stats.count;
}

}  // namespace

EpochStats inner_epoch(TrainingContext& ctx, Mlp& model, AdamState& adam,
                       const LagrangeState& state, double eta, Rng& rng) {
  const Dataset& ds = ctx.dataset();
  const IndexRange train = ds.split.train;
  const std::size_t batch = ctx.config().batch_size;
  const std::size_t workers = std::max<std::size_t>(1, ctx.config().threads);

  auto& ws = ctx.workspace();
  if (ws.chunk_grads.size() != kChunks) {
    ws.chunk_grads.assign(kChunks, MlpGradients::zeros_like(model));
    ws.total = MlpGradients::zeros_like(model);
  }

  std::vector<std::size_t> order(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = train.lo + k;
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats epoch;
  double loss_sum = 0.0;
  double obj_sum = 0.0;
  double abs_y_sum = 0.0;

  for (std::size_t b = 0; b < order.size(); b += batch) {
    const std::size_t e = std::min(order.size(), b + batch);
    const std::size_t count = e - b;
    std::vector<std::uint64_t> seeds(count);
    for (auto& s : seeds) s = rng();

    const std::size_t chunks = std::min(kChunks, count);
    std::vector<ChunkStats> chunk_stats(chunks);
    auto run_chunk = [&](std::size_t c) {
      ws.chunk_grads[c].set_zero();
      const std::size_t lo = c * count / chunks;
      const std::size_t hi = (c + 1) * count / chunks;
      for (std::size_t k = lo; k < hi; ++k)
        process_sample(ctx, model, state, order[b + k], seeds[k], ws.chunk_grads[c], chunk_stats[c]);
    };
    if (workers == 1 || chunks == 1) {
      for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
      std::vector<std::thread> pool;
      const std::size_t n_threads = std::min(workers, chunks);
      for (std::size_t w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t c = w; c < chunks; c += n_threads) run_chunk(c);
        });
      }
      for (auto& t : pool) t.join();
    }

    ws.total.set_zero();
    std::size_t used = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
      const ChunkStats& s = chunk_stats[c];
      if (s.non_finite) throw Diverged("non-finite loss during training");
      ws.total.add(ws.chunk_grads[c]);
      used += s.count;
      epoch.skipped += s.skipped;
      loss_sum += s.loss_sum;
      obj_sum += s.obj_sum;
      abs_y_sum += s.abs_y_sum;
      epoch.eq_max = std::max(epoch.eq_max, s.eq_max);
      epoch.ineq_max = std::max(epoch.ineq_max, s.ineq_max);
    }
    if (used == 0) continue;
    ws.total.scale(1.0 / static_cast<double>(used));
    adam_step(model, adam, ws.total, eta);
    epoch.samples += used;
    ++epoch.steps;
  }

  if (epoch.skipped * 100 > train.size()) {
    throw Diverged("more than 1% of completions failed in one epoch (" +
                   std::to_string(epoch.skipped) + " of " + std::to_string(train.size()) + ")");
  }
  if (epoch.samples > 0) {
    const double denom = static_cast<double>(epoch.samples);
    epoch.loss_mean = loss_sum / denom;
    epoch.obj_mean = obj_sum / denom;
    epoch.mean_abs_y = abs_y_sum / (denom * static_cast<double>(ds.instance.n));
    if (!(epoch.mean_abs_y <= 1e6)) throw Diverged("predictions blew up (mean |y| above 1e6)");
  }
  return epoch;
}

// ---------------------------------------------------------------------------
// Training drivers

namespace {

IndexRange monitor_range(const Dataset& ds, MonitorSplit m) {
  switch (m) {
    case MonitorSplit::Validation:
      return ds.split.validation;
    case MonitorSplit::Test:
      return ds.split.test;
    case MonitorSplit::Train:
      return ds.split.train;
  }
  return ds.split.validation;
}

double l1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

class Recorder {
 public:
  Recorder(const TrainingContext& ctx, RunLog& log)
      : ctx_(ctx), log_(log), start_(std::chrono::steady_clock::now()) {}

  void epoch(Phase phase, const Mlp& model, const LagrangeState& st, const EpochStats& stats) {
    last_ = ctx_.measure(model, monitor_range(ctx_.dataset(), ctx_.config().monitor));
    ++log_.inner_epochs;
    log_.completion_failures += stats.skipped;
    push(phase, st, stats.loss_mean);
  }

  void outer(const LagrangeState& st) { push(Phase::Outer, st, log_.records.empty() ? 0.0 : log_.records.back().train_loss); }

 private:
  void push(Phase phase, const LagrangeState& st, double train_loss) {
    EpochRecord r;
    r.epoch = log_.inner_epochs;
    r.phase = phase;
    r.obj_mean = last_.obj_mean();
    r.eq_max = last_.eq_max;
    r.eq_mean = last_.eq_mean();
    r.ineq_max = last_.ineq_max;
    r.ineq_mean = last_.ineq_mean();
    r.lambda_l1 = l1(st.lambda);
    r.mu_l1 = l1(st.mu);
    r.rho = st.rho;
    r.train_loss = train_loss;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_.records.push_back(r);
  }

  const TrainingContext& ctx_;
  RunLog& log_;
  std::chrono::steady_clock::time_point start_;
  ViolationAccumulator last_;
};

TrainResult run_primal_dual(const Dataset& dataset, Method method, const TrainConfig& cfg) {
  TrainResult result;
  result.log.method = method;
  result.log.warnings = cfg.validate();
  TrainingContext ctx(dataset, method, cfg);
  Rng rng(cfg.seed);
  result.model = ctx.make_model(rng);
  AdamState adam = AdamState::for_model(result.model);
  LagrangeState& st = result.state;
  st = LagrangeState::initial(cfg, dataset.instance, method);
  Recorder rec(ctx, result.log);

  for (std::size_t e = 0; e < cfg.I_w; ++e) {
    const EpochStats stats = inner_epoch(ctx, result.model, adam, st, cfg.eta, rng);
    rec.epoch(Phase::Warmup, result.model, st, stats);
  }
  const auto train_samples = dataset.range(dataset.split.train);
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    for (std::size_t i = 0; i < st.inner_iterations; ++i) {
      const EpochStats stats = inner_epoch(ctx, result.model, adam, st, cfg.eta, rng);
      rec.epoch(Phase::Inner, result.model, st, stats);
    }
    if (method == Method::DeepLDE) {
      const ViolationSums sums =
          sum_violations(dataset.instance, ctx.completer(), train_samples, result.model, false);
      for (std::size_t i = 0; i < st.lambda.size(); ++i) st.lambda[i] += st.rho * sums.ineq[i];
    } else {
      auto [lambda, mu] =
          dual_update_ldf(dataset.instance, train_samples, result.model, st.lambda, st.mu, st.rho, st.s);
      st.lambda = std::move(lambda);
      st.mu = std::move(mu);
    }
    st = schedule_update(cfg, st);
    rec.outer(st);
  }
  return result;
}

}  // namespace

TrainResult train_deeplde(const Dataset& dataset, const TrainConfig& cfg) {
  return run_primal_dual(dataset, Method::DeepLDE, cfg);
}

TrainResult train_ldf(const Dataset& dataset, const TrainConfig& cfg) {
  return run_primal_dual(dataset, Method::LDF, cfg);
}

TrainResult train_supervised(const Dataset& dataset, const std::vector<Vector>& labels,
                             const TrainConfig& cfg) {
  TrainResult result;
  result.log.method = Method::Supervised;
  result.log.warnings = cfg.validate();
  TrainingContext ctx(dataset, Method::Supervised, cfg, &labels);
  Rng rng(cfg.seed);
  result.model = ctx.make_model(rng);
  AdamState adam = AdamState::for_model(result.model);
  result.state.rho = 0.0;
  Recorder rec(ctx, result.log);
  const std::size_t epochs = cfg.total_inner_epochs();
  for (std::size_t e = 0; e < epochs; ++e) {
    const EpochStats stats = inner_epoch(ctx, result.model, adam, result.state, cfg.eta, rng);
    rec.epoch(Phase::Inner, result.model, result.state, stats);
  }
  return result;
}

TrainResult train(const Dataset& dataset, Method method, const TrainConfig& cfg,
                  const std::vector<Vector>* labels) {
  switch (method) {
    case Method::DeepLDE:
      return train_deeplde(dataset, cfg);
    case Method::LDF:
      return train_ldf(dataset, cfg);
    case Method::Supervised:
      if (labels == nullptr) throw Error("supervised training requires labels");
      return train_supervised(dataset, *labels, cfg);
  }
  throw Error("unknown method");
}

}  // namespace deeplde
