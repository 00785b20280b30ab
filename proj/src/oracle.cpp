#include "deeplde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "deeplde/completion.hpp"
#include "deeplde/errors.hpp"
#include "deeplde/io.hpp"

namespace deeplde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Interior point for the Quadratic kind

struct IpmResult {
  Vector y;
  Vector nu;
  Vector lambda;
  std::size_t iterations = 0;
};

double max_step(std::span<const double> v, std::span<const double> dv) {
  double alpha = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

IpmResult solve_qp_ipm(const ProblemInstance& inst, std::span<const double> d,
                       const OracleOptions& opt) {
  const std::size_t n = inst.n;
  const std::size_t me = inst.n_eq;
  const std::size_t mi = inst.n_ineq;
  const Matrix& Q = inst.Q;
  const Matrix& A = inst.A;
  const Matrix& G = inst.G;

  IpmResult r;
  r.y = me > 0 ? matvec(pseudo_inverse(A), d) : Vector(n, 0.0);
  r.nu.assign(me, 0.0);
  r.lambda.assign(mi, 1.0);
  Vector s(mi);
  {
    const Vector gy = matvec(G, r.y);
    for (std::size_t i = 0; i < mi; ++i) s[i] = std::max(inst.h_ub[i] - gy[i], 1.0);
  }

  double scale = 1.0;
  scale = std::max(scale, norm_inf(inst.p));
  scale = std::max(scale, norm_inf(inst.h_ub));
  scale = std::max(scale, norm_inf(d));
  const double tol = opt.ipm_tol * scale;

  for (std::size_t it = 0; it < opt.ipm_max_iter; ++it) {
    // Residuals.
    Vector rd = matvec(Q, r.y);
    for (std::size_t j = 0; j < n; ++j) rd[j] += inst.p[j];
    if (me > 0) {
      const Vector at = matvec_transposed(A, r.nu);
      for (std::size_t j = 0; j < n; ++j) rd[j] += at[j];
    }
    if (mi > 0) {
      const Vector gt = matvec_transposed(G, r.lambda);
      for (std::size_t j = 0; j < n; ++j) rd[j] += gt[j];
    }
    Vector rp = me > 0 ? matvec(A, r.y) : Vector{};
    for (std::size_t i = 0; i < me; ++i) rp[i] -= d[i];
    Vector ri = mi > 0 ? matvec(G, r.y) : Vector{};
    for (std::size_t i = 0; i < mi; ++i) ri[i] += s[i] - inst.h_ub[i];
    const double mu = mi > 0 ? dot(s, r.lambda) / static_cast<double>(mi) : 0.0;

    r.iterations = it;
    if (norm_inf(rd) <= tol && norm_inf(rp) <= tol && norm_inf(ri) <= tol && mu <= opt.ipm_tol)
      return r;

    // Reduced KKT matrix [[Q + GᵀWG, Aᵀ], [A, 0]], W = Λ S⁻¹.
    Matrix K(n + me, n + me, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) K(a, b) = Q(a, b);
    for (std::size_t k = 0; k < mi; ++k) {
      const double w = r.lambda[k] / s[k];
      auto g = G.row(k);
      for (std::size_t a = 0; a < n; ++a) {
        if (g[a] == 0.0) continue;
        const double wa = w * g[a];
        for (std::size_t b = 0; b < n; ++b) K(a, b) += wa * g[b];
      }
    }
    for (std::size_t i = 0; i < me; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        K(n + i, j) = A(i, j);
        K(j, n + i) = A(i, j);
      }
    }
    const LuFactorization lu(std::move(K));

    struct Step {
      Vector dy, dnu, ds, dlambda;
    };
    auto solve_step = [&](std::span<const double> rc) {
      // rhs_y = −r_d − Gᵀ S⁻¹(−r_c + Λ r_i)
      Vector tmp(mi);
      for (std::size_t k = 0; k < mi; ++k) tmp[k] = (-rc[k] + r.lambda[k] * ri[k]) / s[k];
      Vector rhs(n + me);
      const Vector gt = mi > 0 ? matvec_transposed(G, tmp) : Vector(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) rhs[j] = -rd[j] - gt[j];
      for (std::size_t i = 0; i < me; ++i) rhs[n + i] = -rp[i];
      const Vector sol = lu.solve(rhs);
      Step st;
      st.dy.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n));
      st.dnu.assign(sol.begin() + static_cast<std::ptrdiff_t>(n), sol.end());
      const Vector gdy = mi > 0 ? matvec(G, st.dy) : Vector{};
      st.ds.resize(mi);
      st.dlambda.resize(mi);
      for (std::size_t k = 0; k < mi; ++k) {
        st.ds[k] = -ri[k] - gdy[k];
        st.dlambda[k] = (-rc[k] - r.lambda[k] * st.ds[k]) / s[k];
      }
      return st;
    };

    Vector rc(mi);
    for (std::size_t k = 0; k < mi; ++k) rc[k] = s[k] * r.lambda[k];
    Step step = solve_step(rc);
    if (mi > 0) {
      const double a_aff = std::min(max_step(s, step.ds), max_step(r.lambda, step.dlambda));
      double mu_aff = 0.0;
      for (std::size_t k = 0; k < mi; ++k)
        mu_aff += (s[k] + a_aff * step.ds[k]) * (r.lambda[k] + a_aff * step.dlambda[k]);
      mu_aff /= static_cast<double>(mi);
      const double sigma = std::pow(mu_aff / mu, 3.0);
      for (std::size_t k = 0; k < mi; ++k)
        rc[k] = s[k] * r.lambda[k] + step.ds[k] * step.dlambda[k] - sigma * mu;
      step = solve_step(rc);
    }
    double alpha = 1.0;
    if (mi > 0)
      alpha = std::min(1.0, 0.99 * std::min(max_step(s, step.ds), max_step(r.lambda, step.dlambda)));
    for (std::size_t j = 0; j < n; ++j) r.y[j] += alpha * step.dy[j];
    for (std::size_t i = 0; i < me; ++i) r.nu[i] += alpha * step.dnu[i];
    for (std::size_t k = 0; k < mi; ++k) {
      s[k] += alpha * step.ds[k];
      r.lambda[k] += alpha * step.dlambda[k];
    }
  }
  r.iterations = opt.ipm_max_iter;
  return r;
}

// ---------------------------------------------------------------------------
// L-BFGS with Armijo backtracking

// Returns false when the point cannot be evaluated (failed completion).
using SmoothFunction = std::function<bool(std::span<const double>, double&, Vector&)>;

struct LbfgsResult {
  Vector v;
  double f = kInf;
  Vector g;
  std::size_t iterations = 0;
};

LbfgsResult lbfgs(const SmoothFunction& fun, Vector v, double gtol, std::size_t max_iter,
                  std::size_t memory = 10) {
  LbfgsResult out;
  double f = 0.0;
  Vector g;
  if (!fun(v, f, g)) {
    out.v = std::move(v);
    return out;
  }
  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    if (norm_inf(g) <= gtol) break;
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[k] * y_hist[k][j];
    }
    double gamma = 1.0 / std::max(1.0, norm_inf(g));
    if (!s_hist.empty()) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (double& x : q) x *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += (alpha[k] - beta) * s_hist[k][j];
    }
    Vector p(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) p[j] = -q[j];
    double slope = dot(g, p);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double sc = 1.0 / std::max(1.0, norm_inf(g));
      for (std::size_t j = 0; j < p.size(); ++j) p[j] = -sc * g[j];
      slope = dot(g, p);
    }

    double t = 1.0;
    bool accepted = false;
    Vector v_new(v.size());
    double f_new = 0.0;
    Vector g_new;
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < v.size(); ++j) v_new[j] = v[j] + t * p[j];
      if (fun(v_new, f_new, g_new) && f_new <= f + 1e-4 * t * slope + slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (s_hist.empty()) break;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    Vector sv(v.size());
    Vector yv(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
      sv[j] = v_new[j] - v[j];
      yv[j] = g_new[j] - g[j];
    }
    const double sy = dot(sv, yv);
    if (sy > 1e-12 * norm2(sv) * norm2(yv)) {
      s_hist.push_back(std::move(sv));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    v = std::move(v_new);
    f = f_new;
    g = std::move(g_new);
  }
  out.v = std::move(v);
  out.f = f;
  out.g = std::move(g);
  out.iterations = it;
  return out;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian in reduced coordinates

struct AlOutcome {
  Vector y;
  double objective = kInf;
  double kkt = kInf;
  double violation = kInf;
  std::size_t iterations = 0;
};

AlOutcome augmented_lagrangian(const EqualityCompleter& completer, std::span<const double> d,
                               Vector v0) {
  const ProblemInstance& inst = completer.instance();
  const std::size_t mi = inst.n_ineq;
  Vector z_warm;
  Vector lambda(mi, 0.0);
  double c = 10.0;

  // Evaluates F(v) + (1/2c) Σ (max(0, λ + c g)² − λ²) and its reduced gradient.
  auto eval = [&](std::span<const double> v, double& f, Vector& grad) -> bool {
    const auto res = completer.complete(d, v, z_warm, /*throw_on_failure=*/false);
    if (res.newton && !res.newton->converged) return false;
    for (double yi : res.y)
      if (!std::isfinite(yi)) return false;
    if (completer.nonlinear()) z_warm = res.z;
    f = objective(inst, res.y);
    Vector gy = objective_gradient(inst, res.y);
    const Vector gval = matvec(inst.G, res.y);
    Vector w(mi);
    for (std::size_t i = 0; i < mi; ++i) {
      const double gi = gval[i] - inst.h_ub[i];
      const double m = std::max(0.0, lambda[i] + c * gi);
      f += (m * m - lambda[i] * lambda[i]) / (2.0 * c);
      w[i] = m;
    }
    if (mi > 0) {
      const Vector gt = matvec_transposed(inst.G, w);
      for (std::size_t j = 0; j < gy.size(); ++j) gy[j] += gt[j];
    }
    auto [gx, gz] = completer.split(gy);
    const Vector extra = completer.pullback(res, gz);
    for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += extra[j];
    grad = std::move(gx);
    return std::isfinite(f);
  };

  AlOutcome out;
  Vector v = std::move(v0);
  double prev_violation = kInf;
  for (std::size_t outer = 0; outer < 60; ++outer) {
    const LbfgsResult inner = lbfgs(eval, v, 1e-9, 3000);
    out.iterations += inner.iterations;
    if (!std::isfinite(inner.f)) return out;
    v = inner.v;

    const auto res = completer.complete(d, v, z_warm, false);
    if (res.newton && !res.newton->converged) return out;
    const Vector gval = matvec(inst.G, res.y);
    double violation = 0.0;
    double complementarity = 0.0;
    for (std::size_t i = 0; i < mi; ++i) {
      const double gi = gval[i] - inst.h_ub[i];
      const double updated = std::max(0.0, lambda[i] + c * gi);
      violation = std::max(violation, gi);
      complementarity = std::max(complementarity, std::abs(updated * gi));
      lambda[i] = updated;
    }
    // The inner gradient is ∇F + J_gᵀ λ_updated, the reduced stationarity.
    const double stationarity = norm_inf(inner.g);
    out.y = res.y;
    out.objective = objective(inst, res.y);
    out.violation = violation;
    out.kkt = std::max({stationarity, violation, complementarity});
    if (violation <= 1e-10 && out.kkt <= 1e-8) break;
    if (violation > 0.25 * prev_violation) c = std::min(c * 10.0, 1e12);
    prev_violation = violation;
  }
  return out;
}

OracleSolution solve_nonconvex(const ProblemInstance& inst, std::span<const double> d,
                               const OracleOptions& opt) {
  const EqualityCompleter completer(inst, CompletionOptions{1e-12, 100});
  const Vector y0 = inst.n_eq > 0 ? matvec(pseudo_inverse(inst.A), d) : Vector(inst.n, 0.0);
  const Vector x0 = completer.split(y0).first;

  Rng rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  OracleSolution best;
  bool found = false;
  std::size_t total_iterations = 0;
  for (std::size_t k = 0; k < std::max<std::size_t>(1, opt.starts); ++k) {
    Vector v = x0;
    if (k > 0)
      for (double& x : v) x += normal(rng);
    const AlOutcome o = augmented_lagrangian(completer, d, std::move(v));
    total_iterations += o.iterations;
    if (!(o.kkt <= opt.stationarity_tol) || !(o.violation <= opt.feasibility_tol)) continue;
    if (!found || o.objective < best.objective_value) {
      best.y_star = o.y;
      best.objective_value = o.objective;
      best.kkt_residual = o.kkt;
      found = true;
    }
  }
  if (!found) throw OracleFailed("no multi-start reached a stationary feasible point");
  best.solver_iterations = total_iterations;
  return best;
}

}  // namespace

double qp_kkt_residual(const ProblemInstance& inst, std::span<const double> d,
                       std::span<const double> y, std::span<const double> nu,
                       std::span<const double> lambda) {
  Vector rd = objective_gradient(inst, y);
  if (inst.n_eq > 0) rd = axpy(1.0, matvec_transposed(inst.A, nu), rd);
  if (inst.n_ineq > 0) rd = axpy(1.0, matvec_transposed(inst.G, lambda), rd);
  double res = norm_inf(rd);
  res = std::max(res, norm_inf(eq_residual(inst, d, y)));
  const Vector gy = matvec(inst.G, y);
  for (std::size_t i = 0; i < inst.n_ineq; ++i) {
    const double gi = gy[i] - inst.h_ub[i];
    res = std::max(res, std::max(gi, 0.0));
    res = std::max(res, std::abs(lambda[i] * gi));
    res = std::max(res, std::max(-lambda[i], 0.0));
  }
  return res;
}

OracleSolution solve_reference(const ProblemInstance& instance, std::span<const double> d,
                               const OracleOptions& options) {
  if (d.size() != instance.n_eq) throw DimensionMismatch("d must have n_eq entries");
  if (instance.objective_kind != ObjectiveKind::Quadratic) return solve_nonconvex(instance, d, options);

  IpmResult r;
  try {
    r = solve_qp_ipm(instance, d, options);
  } catch (const SingularMatrix& e) {
    throw OracleFailed(std::string("interior point: ") + e.what());
  }
  OracleSolution sol;
  sol.kkt_residual = qp_kkt_residual(instance, d, r.y, r.nu, r.lambda);
  if (!(sol.kkt_residual <= 1e-6))
    throw OracleFailed("interior point stopped with KKT residual " + std::to_string(sol.kkt_residual));
  sol.objective_value = objective(instance, r.y);
  sol.y_star = std::move(r.y);
  sol.solver_iterations = r.iterations;
  return sol;
}

// ---------------------------------------------------------------------------
// Monte-Carlo check of the expected equality violation

std::pair<double, double> prop2_closed_forms(const Matrix& jacobian, double sigma) {
  const double factor = std::sqrt(2.0 / std::numbers::pi) * sigma;
  const Matrix jjt = gram_rows(jacobian);
  double diag = 0.0;
  for (std::size_t i = 0; i < jjt.rows(); ++i) diag += std::sqrt(std::max(jjt(i, i), 0.0));
  double nuclear = 0.0;
  if (jjt.rows() > 0)
    for (double ev : symmetric_eigenvalues(jjt)) nuclear += std::sqrt(std::max(ev, 0.0));
  return {factor * diag, factor * nuclear};
}

Prop2Report verify_prop2_at(const ProblemInstance& instance, std::span<const double> d,
                            std::span<const double> y_star, double sigma, std::size_t sample_count,
                            std::uint64_t seed, std::size_t threads) {
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  if (sample_count < 2) throw Error("need at least two Monte-Carlo samples");
  if (y_star.size() != instance.n) throw DimensionMismatch("y* must have n entries");

  constexpr std::size_t kPartitions = 16;
  Rng master(seed);
  std::vector<std::uint64_t> seeds(kPartitions);
  for (auto& s : seeds) s = master();
  std::vector<double> sums(kPartitions, 0.0);
  std::vector<double> sq_sums(kPartitions, 0.0);

  auto run = [&](std::size_t part) {
    Rng rng(seeds[part]);
    std::normal_distribution<double> normal(0.0, sigma);
    const std::size_t lo = part * sample_count / kPartitions;
    const std::size_t hi = (part + 1) * sample_count / kPartitions;
    Vector y(instance.n);
    for (std::size_t k = lo; k < hi; ++k) {
      for (std::size_t j = 0; j < instance.n; ++j) y[j] = y_star[j] + normal(rng);
      double total = 0.0;
      for (double r : eq_residual(instance, d, y)) total += std::abs(r);
      sums[part] += total;
      sq_sums[part] += total * total;
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, kPartitions);
  if (workers == 1) {
    for (std::size_t p = 0; p < kPartitions; ++p) run(p);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t p = w; p < kPartitions; p += workers) run(p);
      });
    for (auto& t : pool) t.join();
  }
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t p = 0; p < kPartitions; ++p) {
    sum += sums[p];
    sq += sq_sums[p];
  }

  Prop2Report rep;
  rep.sigma = sigma;
  rep.sample_count = sample_count;
  const double count = static_cast<double>(sample_count);
  rep.mc_estimate = sum / count;
  const double var = std::max(0.0, (sq - count * rep.mc_estimate * rep.mc_estimate) / (count - 1.0));
  rep.standard_error = std::sqrt(var / count);
  const auto [diag, nuclear] = prop2_closed_forms(eq_jacobian(instance, y_star), sigma);
  rep.closed_form_diag = diag;
  rep.closed_form_nuclear = nuclear;
  if (diag > 0.0) rep.relative_gap = std::abs(rep.mc_estimate - diag) / diag;
  else rep.relative_gap = rep.mc_estimate == 0.0 ? 0.0 : kInf;
  return rep;
}

Prop2Report verify_prop2(const ProblemInstance& instance, std::span<const double> d, double sigma,
                         std::size_t sample_count, std::uint64_t seed, std::size_t threads) {
  const OracleSolution sol = solve_reference(instance, d);
  return verify_prop2_at(instance, d, sol.y_star, sigma, sample_count, seed, threads);
}

nlohmann::json to_json(const Prop2Report& r) {
  return {{"sigma", r.sigma},
          {"mc_estimate", r.mc_estimate},
          {"closed_form_diag", r.closed_form_diag},
          {"closed_form_nuclear", r.closed_form_nuclear},
          {"relative_gap", r.relative_gap},
          {"sample_count", r.sample_count}};
}

nlohmann::json to_json(const OracleTable& t) {
  return {{"y_star", t.y_star}, {"objective", t.objective}, {"kkt_residual", t.kkt_residual}};
}

OracleTable oracle_table_from_json(const nlohmann::json& j) {
  try {
    OracleTable t;
    t.y_star = j.at("y_star").get<std::vector<Vector>>();
    t.objective = j.at("objective").get<Vector>();
    t.kkt_residual = j.at("kkt_residual").get<Vector>();
    if (t.objective.size() != t.y_star.size() || t.kkt_residual.size() != t.y_star.size())
      throw FormatError("oracle file: y_star, objective and kkt_residual lengths differ");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("oracle file: ") + e.what());
  }
}

void save_oracle_table(const OracleTable& table, const std::filesystem::path& path) {
  write_json(path, to_json(table));
}

OracleTable load_oracle_table(const std::filesystem::path& path) {
  return oracle_table_from_json(read_json(path));
}

}  // namespace deeplde
