#include "deeplde/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "deeplde/completion.hpp"
#include "deeplde/errors.hpp"
#include "deeplde/io.hpp"
#include "deeplde/network.hpp"
#include "deeplde/oracle.hpp"
#include "deeplde/problems.hpp"
#include "deeplde/reporting.hpp"

#ifndef DEEPLDE_GIT_DESCRIBE
#define DEEPLDE_GIT_DESCRIBE "unknown"
#endif

namespace deeplde {

namespace {


std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string version_string() { return DEEPLDE_GIT_DESCRIBE; }

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      base.set(key, value);
    } catch (const FormatError& e) {
      throw FormatError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  return parse_config_text(read_text(path), std::move(base));
}

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag) {
    if (*flag == 0) throw UsageError("--threads must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("DEEPLDE_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) throw UsageError("DEEPLDE_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return 1;
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"args", m.args},
          {"config", m.config},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"version", m.version},
          {"started_at", iso_utc(m.started)},
          {"finished_at", iso_utc(m.finished)}};
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  write_json(path, to_json(manifest), 2);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return std::filesystem::path(artifact.string() + ".manifest.json");
}

namespace {

struct GenerateArgs {
  std::size_t n = 0, n_eq = 0, n_ineq = 0, count = 0;
  std::string kind;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string method, data, config, out, labels;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;
};

struct EvalArgs {
  std::string data, checkpoint, method_tag, oracle, labels, out, dump;
  std::string split = "test";
  std::int64_t seed = 0;
};

struct OracleArgs {
  std::string data, out;
  std::optional<std::size_t> threads;
};

struct VerifyArgs {
  std::string data, out;
  double sigma = 1e-3;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::optional<std::size_t> sample_index;
  std::optional<std::size_t> threads;
};

IndexRange split_range(const Dataset& ds, const std::string& name) {
  if (name == "test") return ds.split.test;
  if (name == "validation") return ds.split.validation;
  if (name == "train") return ds.split.train;
  throw UsageError("--split must be test, validation or train");
}

RunManifest start_manifest(const std::string& command, int argc, const char* const* argv) {
  RunManifest m;
  m.command = command;
  for (int i = 0; i < argc; ++i) m.args.emplace_back(argv[i]);
  m.version = version_string();
  m.started = std::chrono::system_clock::now();
  return m;
}

int cmd_generate(const GenerateArgs& a, RunManifest manifest) {
  const ObjectiveKind kind = parse_objective_kind(a.kind);
  if (a.n == 0) throw UsageError("--n must be positive");
  if (a.n_eq == 0 || a.n_eq >= a.n) throw UsageError("--n-eq must satisfy 0 < n_eq < n");
  if (a.count < 12) throw UsageError("--count must be at least 12");
  const ProblemInstance inst = generate_instance(a.n, a.n_eq, a.n_ineq, kind, a.seed);
  const Dataset ds = generate_dataset(inst, a.count, a.seed + 1);
  save_dataset(ds, a.out);

  manifest.config = {{"n", std::to_string(a.n)},         {"n_eq", std::to_string(a.n_eq)},
                     {"n_ineq", std::to_string(a.n_ineq)}, {"kind", to_string(kind)},
                     {"count", std::to_string(a.count)},   {"seed", std::to_string(a.seed)}};
  manifest.outputs = {{"dataset", a.out}};
  manifest.finished = std::chrono::system_clock::now();
  write_manifest(manifest, manifest_path_for(a.out));
  return kExitSuccess;
}

std::vector<Vector> labels_for(const Dataset& ds, const std::string& path) {
  OracleTable table = load_oracle_table(path);
  if (table.y_star.size() != ds.samples.size())
    throw DimensionMismatch("labels file has " + std::to_string(table.y_star.size()) +
                            " rows, dataset has " + std::to_string(ds.samples.size()));
  for (const auto& y : table.y_star)
    if (y.size() != ds.instance.n) throw DimensionMismatch("label rows must have n entries");
  return std::move(table.y_star);
}

int cmd_train(const TrainArgs& a, RunManifest manifest) {
  const Method method = parse_method(a.method);
  if (method == Method::Supervised && a.labels.empty())
    throw UsageError("--method sl requires --labels (the output of `deeplde oracle`)");
  const Dataset ds = load_dataset(a.data);

  TrainConfig cfg = TrainConfig::defaults_for(ds.instance.objective_kind);
  if (!a.config.empty()) cfg = load_config_file(a.config, cfg);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.threads = resolve_threads(a.threads);

  std::vector<Vector> labels;
  if (method == Method::Supervised) labels = labels_for(ds, a.labels);

  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
  TrainResult result = train(ds, method, cfg, method == Method::Supervised ? &labels : nullptr);

  const std::filesystem::path dir(a.out);
  std::filesystem::create_directories(dir);
  save_checkpoint(result.model, dir / "checkpoint.json");
  write_learning_curve(result.log, dir);
  write_json(dir / "multipliers.json",
             {{"lambda", result.state.lambda}, {"mu", result.state.mu}, {"rho", result.state.rho},
              {"s", result.state.s}, {"t", result.state.t},
              {"inner_epochs", result.log.inner_epochs},
              {"completion_failures", result.log.completion_failures}},
             2);

  manifest.config = cfg.to_map();
  manifest.config["method"] = to_string(method);
  manifest.inputs = {{"data", a.data}};
  if (!a.config.empty()) manifest.inputs["config"] = a.config;
  if (!a.labels.empty()) manifest.inputs["labels"] = a.labels;
  manifest.outputs = {{"checkpoint", (dir / "checkpoint.json").string()},
                      {"runlog", (dir / "runlog.csv").string()},
                      {"learning_curve", (dir / "learning_curve.tsv").string()},
                      {"multipliers", (dir / "multipliers.json").string()}};
  manifest.finished = std::chrono::system_clock::now();
  write_manifest(manifest, dir / "manifest.json");
  std::cout << "trained " << to_string(method) << " for " << result.log.inner_epochs
            << " inner epochs; outputs in " << dir.string() << '\n';
  return kExitSuccess;
}

int cmd_eval(const EvalArgs& a, RunManifest manifest) {
  if (a.checkpoint.empty() == a.labels.empty())
    throw UsageError("eval needs exactly one of --checkpoint or --labels");
  const Dataset ds = load_dataset(a.data);
  const IndexRange range = split_range(ds, a.split);

  EvaluateOptions opts;
  opts.method_tag = a.method_tag;
  opts.seed = a.seed;
  if (!a.dump.empty()) opts.dump_path = a.dump;
  if (!a.oracle.empty()) {
    const OracleTable table = load_oracle_table(a.oracle);
    if (table.objective.size() != ds.samples.size())
      throw DimensionMismatch("oracle file does not match the dataset size");
    opts.oracle_objectives = Vector(table.objective.begin() + static_cast<std::ptrdiff_t>(range.lo),
                                    table.objective.begin() + static_cast<std::ptrdiff_t>(range.hi));
  }

  ViolationReport report;
  if (!a.labels.empty()) {
    const std::vector<Vector> labels = labels_for(ds, a.labels);
    report = evaluate(ds, range, label_predictor(labels), opts);
  } else {
    const Mlp model = load_checkpoint(a.checkpoint);
    const ProblemInstance& inst = ds.instance;
    if (model.input_dim() != inst.n_eq)
      throw DimensionMismatch("checkpoint input size does not match the dataset");
    std::optional<EqualityCompleter> completer;
    if (model.output_dim() == inst.n - inst.n_eq) completer.emplace(inst);
    else if (model.output_dim() != inst.n)
      throw DimensionMismatch("checkpoint output size matches neither n nor n - n_eq");
    report = evaluate(ds, range, model_predictor(model, completer ? &*completer : nullptr), opts);
  }

  const std::vector<ViolationReport> reports{report};
  nlohmann::json arr = nlohmann::json::array({to_json(report)});
  std::cout << arr.dump(2) << '\n';
  if (!a.out.empty()) {
    save_reports(reports, a.out);
    manifest.config = {{"method_tag", a.method_tag}, {"split", a.split}, {"seed", std::to_string(a.seed)}};
    manifest.inputs = {{"data", a.data}};
    if (!a.checkpoint.empty()) manifest.inputs["checkpoint"] = a.checkpoint;
    if (!a.labels.empty()) manifest.inputs["labels"] = a.labels;
    if (!a.oracle.empty()) manifest.inputs["oracle"] = a.oracle;
    manifest.outputs = {{"report", a.out}};
    if (!a.dump.empty()) manifest.outputs["dump"] = a.dump;
    manifest.finished = std::chrono::system_clock::now();
    write_manifest(manifest, manifest_path_for(a.out));
  }
  return kExitSuccess;
}

int cmd_oracle(const OracleArgs& a, RunManifest manifest) {
  const Dataset ds = load_dataset(a.data);
  const std::size_t count = ds.samples.size();
  const std::size_t workers = std::min(resolve_threads(a.threads), std::max<std::size_t>(count, 1));
  std::vector<OracleSolution> sols(count);
  std::vector<std::string> failures(count);
  auto run = [&](std::size_t w) {
    for (std::size_t k = w; k < count; k += workers) {
      try {
        sols[k] = solve_reference(ds.instance, ds.samples[k]);
      } catch (const OracleFailed& e) {
        failures[k] = e.what();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < count; ++k)
    if (!failures[k].empty()) throw OracleFailed("sample " + std::to_string(k) + ": " + failures[k]);

  OracleTable table;
  for (auto& s : sols) {
    table.y_star.push_back(std::move(s.y_star));
    table.objective.push_back(s.objective_value);
    table.kkt_residual.push_back(s.kkt_residual);
  }
  save_oracle_table(table, a.out);
  manifest.inputs = {{"data", a.data}};
  manifest.outputs = {{"oracle", a.out}};
  manifest.finished = std::chrono::system_clock::now();
  write_manifest(manifest, manifest_path_for(a.out));
  return kExitSuccess;
}

int cmd_verify(const VerifyArgs& a, RunManifest manifest) {
  if (!(a.sigma > 0.0)) throw UsageError("--sigma must be positive");
  if (a.samples < 2) throw UsageError("--samples must be at least 2");
  const Dataset ds = load_dataset(a.data);
  const std::size_t index = a.sample_index.value_or(ds.split.test.lo);
  if (index >= ds.samples.size()) throw UsageError("--sample-index outside the dataset");
  const Prop2Report rep = verify_prop2(ds.instance, ds.samples[index], a.sigma, a.samples, a.seed,
                                       resolve_threads(a.threads));
  const nlohmann::json j = to_json(rep);
  std::cout << j.dump(2) << '\n';
  if (!a.out.empty()) {
    write_json(a.out, j, 2);
    manifest.config = {{"sigma", std::to_string(a.sigma)},
                       {"samples", std::to_string(a.samples)},
                       {"seed", std::to_string(a.seed)},
                       {"sample_index", std::to_string(index)}};
    manifest.inputs = {{"data", a.data}};
    manifest.outputs = {{"report", a.out}};
    manifest.finished = std::chrono::system_clock::now();
    write_manifest(manifest, manifest_path_for(a.out));
  }
  return kExitSuccess;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Learning constrained optimization solutions with equality embedding"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a problem instance and dataset");
  g->add_option("--n", gen.n, "Number of variables")->required();
  g->add_option("--n-eq", gen.n_eq, "Number of equality constraints")->required();
  g->add_option("--n-ineq", gen.n_ineq, "Number of inequality constraints")->required();
  g->add_option("--kind", gen.kind, "qp | sinqp | nonlineq")->required();
  g->add_option("--count", gen.count, "Number of samples")->required();
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Dataset JSON path")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a predictor");
  t->add_option("--method", tr.method, "deeplde | ldf | sl")->required();
  t->add_option("--data", tr.data, "Dataset JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--config", tr.config, "Flat key = value config file")->check(CLI::ExistingFile);
  t->add_option("--set", tr.overrides, "Config override key=value (repeatable)");
  t->add_option("--seed", tr.seed, "Random seed (overrides config)");
  t->add_option("--threads", tr.threads, "Worker threads");
  t->add_option("--labels", tr.labels, "Oracle output used as labels (sl)")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate feasibility and optimality on a split");
  e->add_option("--data", ev.data, "Dataset JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--checkpoint", ev.checkpoint, "Network checkpoint")->check(CLI::ExistingFile);
  e->add_option("--labels", ev.labels, "Replay stored solutions instead of a network")
      ->check(CLI::ExistingFile);
  e->add_option("--method-tag", ev.method_tag, "Tag stored in the report")->required();
  e->add_option("--oracle", ev.oracle, "Oracle output for the optimality gap")->check(CLI::ExistingFile);
  e->add_option("--split", ev.split, "test | validation | train");
  e->add_option("--seed", ev.seed, "Seed recorded in the report");
  e->add_option("--out", ev.out, "Report JSON path");
  e->add_option("--dump", ev.dump, "Per-sample CSV path");

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "Solve every sample with the reference solver");
  o->add_option("--data", orc.data, "Dataset JSON")->required()->check(CLI::ExistingFile);
  o->add_option("--out", orc.out, "Output JSON path")->required();
  o->add_option("--threads", orc.threads, "Worker threads");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Monte-Carlo check of the expected equality violation");
  v->add_option("--data", ver.data, "Dataset JSON")->required()->check(CLI::ExistingFile);
  v->add_option("--sigma", ver.sigma, "Noise standard deviation");
  v->add_option("--samples", ver.samples, "Monte-Carlo sample count");
  v->add_option("--seed", ver.seed, "Random seed");
  v->add_option("--sample-index", ver.sample_index, "Dataset sample (default: first test sample)");
  v->add_option("--threads", ver.threads, "Worker threads");
  v->add_option("--out", ver.out, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, start_manifest("generate", argc, argv));
    if (t->parsed()) return cmd_train(tr, start_manifest("train", argc, argv));
    if (e->parsed()) return cmd_eval(ev, start_manifest("eval", argc, argv));
    if (o->parsed()) return cmd_oracle(orc, start_manifest("oracle", argc, argv));
    if (v->parsed()) return cmd_verify(ver, start_manifest("verify", argc, argv));
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const Diverged& err) {
    std::cerr << "diverged: " << err.what() << '\n';
    return kExitDiverged;
  } catch (const OracleFailed& err) {
    std::cerr << "oracle failed: " << err.what() << '\n';
    return kExitOracleFailed;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace deeplde
