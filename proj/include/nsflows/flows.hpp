#pragma once

// Sequential update schemes for the mixing measure:
//  * Newton's recursion (convex combination of prior and posterior weights),
//  * the Fisher-Rao weight flow (exponential reweighting by the centred first
//    variation, atoms fixed),
//  * the Wasserstein-Fisher-Rao splitting scheme (reweight, optionally
//    resample, then move atoms along the negative gradient of the potential).
// The prior enters through Monte-Carlo averages of Sinkhorn source potentials
// against prior realisations.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsflows/core.hpp"
#include "nsflows/priors.hpp"
#include "nsflows/transport.hpp"

namespace nsflows {

enum class FlowMode { newton, fisher_rao, wfr };

[[nodiscard]] inline std::string to_string(FlowMode m) {
  switch (m) {
    case FlowMode::newton:
      return "newton";
    case FlowMode::fisher_rao:
      return "fisher_rao";
    case FlowMode::wfr:
      return "wfr";
  }
  return "?";
}

[[nodiscard]] inline FlowMode flow_mode_from_string(const std::string& s) {
  if (s == "newton") return FlowMode::newton;
  if (s == "fisher_rao") return FlowMode::fisher_rao;
  if (s == "wfr") return FlowMode::wfr;
  throw ConfigError("flow.mode", "unknown mode '" + s + "' (expected newton, fisher_rao or wfr)");
}

/// Step weights alpha_n on (0, 1) with sum alpha_n^2 finite.
struct AlphaSchedule {
  enum class Kind { harmonic, power };
  Kind kind = Kind::harmonic;
  double gamma = 1.0;

  [[nodiscard]] static AlphaSchedule harmonic() { return {}; }
  [[nodiscard]] static AlphaSchedule power(double g) { return {Kind::power, g}; }

  void validate() const {
    if (kind == Kind::power && !(gamma > 0.5 && gamma <= 1.0)) {
      throw ConfigError("flow.alpha_schedule.gamma", "exponent must lie in (0.5, 1]");
    }
  }

  friend bool operator==(const AlphaSchedule&, const AlphaSchedule&) = default;
};

/// harmonic: 1/(n+2); power(g): (n+2)^-g.
[[nodiscard]] inline double alpha(std::size_t n, const AlphaSchedule& s) {
  s.validate();
  const double base = static_cast<double>(n) + 2.0;
  return s.kind == AlphaSchedule::Kind::harmonic ? 1.0 / base : std::pow(base, -s.gamma);
}

/// Prior regularisation strength over time.
struct LambdaSchedule {
  enum class Kind { constant, log_anneal };
  Kind kind = Kind::constant;
  double c = 1.0;

  [[nodiscard]] static LambdaSchedule constant() { return {}; }
  [[nodiscard]] static LambdaSchedule log_anneal(double c) { return {Kind::log_anneal, c}; }

  void validate() const {
    if (kind == Kind::log_anneal && !(c > 0.0)) {
      throw ConfigError("flow.lambda_schedule.c", "constant must be positive");
    }
  }

  friend bool operator==(const LambdaSchedule&, const LambdaSchedule&) = default;
};

/// constant: lambda0; log_anneal(C): min(lambda0, C / log(t + e)).
[[nodiscard]] inline double lambda_at(double t, const LambdaSchedule& s, double lambda0) {
  if (!(t >= 0.0)) {
    throw InvalidArgument("lambda_at: time must be non-negative");
  }
  if (s.kind == LambdaSchedule::Kind::constant) return lambda0;
  return std::min(lambda0, s.c / std::log(t + std::numbers::e));
}

/// Every knob of the three schemes. Defaults are the settings used for the
/// flow-comparison experiment.
struct FlowConfig {
  FlowMode mode = FlowMode::wfr;
  AlphaSchedule alpha_schedule;
  /// Fixed reaction step. Unset means the reaction step at step k is alpha_k.
  std::optional<double> dt;
  /// Transport (Euler-Maruyama) step.
  double tau = 0.03;
  double lambda0 = 0.05;
  LambdaSchedule lambda_schedule;
  double prior_drift_weight = 0.1;
  /// Prior Monte-Carlo draws per step.
  std::size_t prior_draws = 4;
  SinkhornConfig sinkhorn{0.05, 25, 1e-9};
  bool warm_start = true;
  bool resample = true;
  bool diffusion = false;
  bool freeze_prior_draws = false;
  std::size_t particles = 50;
  /// If positive, the reaction step is shrunk so that no log-weight moves by
  /// more than this amount in one step. Zero keeps the plain step.
  double reaction_cap = 0.0;
  /// Tamed Euler drift: grad / (1 + tau |grad|) per atom.
  bool drift_taming = false;

  void validate() const {
    alpha_schedule.validate();
    lambda_schedule.validate();
    sinkhorn.validate();
    if (dt && !(*dt > 0.0)) throw ConfigError("flow.dt", "must be positive");
    if (!(tau >= 0.0)) throw ConfigError("flow.tau", "must be non-negative");
    if (!(lambda0 >= 0.0)) throw ConfigError("flow.lambda", "must be non-negative");
    if (!(prior_drift_weight >= 0.0)) throw ConfigError("flow.prior_drift_weight", "must be non-negative");
    if (prior_draws < 1) throw ConfigError("flow.M", "must be >= 1");
    if (particles < 1) throw ConfigError("flow.N", "must be >= 1");
    if (!(reaction_cap >= 0.0)) throw ConfigError("flow.reaction_cap", "must be non-negative");
  }

  [[nodiscard]] double reaction_step(std::size_t k) const { return dt ? *dt : alpha(k, alpha_schedule); }
};

/// Counters accumulated along a flow. The flow never aborts on these.
struct FlowDiagnostics {
  double ess = 0.0;
  std::size_t likelihood_underflows = 0;
  std::size_t sinkhorn_solves = 0;
  std::size_t sinkhorn_nonconverged = 0;
};

struct FlowState {
  ParticleMeasure measure;
  std::size_t step = 0;
  /// Per prior slot source potential at the current atoms, used to seed the
  /// next Sinkhorn solve.
  std::vector<Vector> warm;
  /// Draws reused when the config freezes them.
  std::vector<ParticleMeasure> frozen_draws;
  FlowDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Sub-operations

/// Newton's recursion:
/// w_i <- (1 - a) w_i + a w_i k(x, theta_i) / sum_j w_j k(x, theta_j).
[[nodiscard]] inline ParticleMeasure newton_update(const ParticleMeasure& mu, const Point& x, double a,
                                                   const GaussianKernel& k, std::size_t* underflows = nullptr) {
  if (!(a >= 0.0 && a < 1.0)) {
    throw InvalidArgument("newton_update: step must lie in [0, 1)");
  }
  const LikelihoodRatios lr = likelihood_ratios(mu, x, k);
  if (underflows != nullptr && lr.log_marginal < std::log(kLikelihoodFloor)) ++*underflows;
  const Vector w = mu.weights().array() * ((1.0 - a) + a * lr.ratio.array());
  return mu.with_weights(w);
}

/// First variation of -log int k(x, .) dmu at the atoms:
/// g_i = -k(x, theta_i) / sum_j w_j k(x, theta_j). Satisfies sum_i w_i g_i = -1.
[[nodiscard]] inline Vector likelihood_force(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k,
                                             std::size_t* underflows = nullptr) {
  const LikelihoodRatios lr = likelihood_ratios(mu, x, k);
  if (underflows != nullptr && lr.log_marginal < std::log(kLikelihoodFloor)) ++*underflows;
  return -lr.ratio;
}

/// Monte-Carlo estimate of the prior first variation: per-atom average of the
/// Sinkhorn source potentials f_{mu -> p_m}, each in the mean-zero gauge.
struct PriorForce {
  Vector h;
  std::vector<DualPotentials> potentials;
  std::size_t nonconverged = 0;
};

[[nodiscard]] inline PriorForce prior_force(const ParticleMeasure& mu, const std::vector<ParticleMeasure>& draws,
                                            const SinkhornConfig& cfg, const std::vector<Vector>* warm = nullptr) {
  if (draws.empty()) {
    throw InvalidArgument("prior_force: no prior draws");
  }
  PriorForce out;
  out.h = Vector::Zero(mu.size());
  out.potentials.reserve(draws.size());
  for (std::size_t m = 0; m < draws.size(); ++m) {
    const Vector* seed = (warm != nullptr && m < warm->size()) ? &(*warm)[m] : nullptr;
    out.potentials.push_back(sinkhorn_potentials(mu, draws[m], cfg, seed));
    if (!out.potentials.back().converged) ++out.nonconverged;
    out.h += out.potentials.back().f;
  }
  out.h /= static_cast<double>(draws.size());
  return out;
}

/// Centred potential V_i - sum_j w_j V_j.
[[nodiscard]] inline Vector centred(const ParticleMeasure& mu, const Vector& v) {
  if (v.size() != mu.size()) {
    throw DimensionError("potential length does not match the number of atoms");
  }
  return v.array() - mu.weights().dot(v);
}

/// Fisher-Rao reaction: w_i <- w_i exp(-dt (V_i - Vbar)), renormalised.
/// Evaluated in log space.
[[nodiscard]] inline ParticleMeasure fr_weight_step(const ParticleMeasure& mu, const Vector& v, double dt) {
  if (!v.allFinite()) {
    throw InvalidArgument("fr_weight_step: non-finite potential");
  }
  if (!(dt >= 0.0)) {
    throw InvalidArgument("fr_weight_step: negative step");
  }
  const Vector c = centred(mu, v);
  Vector logw(mu.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    logw[i] = mu.weight(i) > 0.0 ? std::log(mu.weight(i)) - dt * c[i] : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logw[i]);
  }
  return mu.with_weights(exp_of((logw.array() - mx).matrix()));
}

/// Forward-Euler (linearised) reaction: w_i (1 - dt (V_i - Vbar)). Requires the
/// step small enough to keep every weight non-negative.
[[nodiscard]] inline ParticleMeasure fr_weight_step_linear(const ParticleMeasure& mu, const Vector& v, double dt) {
  const Vector w = mu.weights().array() * (1.0 - dt * centred(mu, v).array());
  if ((w.array() < 0.0).any()) {
    throw InvalidArgument("fr_weight_step_linear: step too large, weight went negative");
  }
  return mu.with_weights(w);
}

/// Systematic (low-variance) resampling to the same number of atoms with
/// uniform weights. Returns the ancestor index of every output atom.
[[nodiscard]] inline std::vector<Eigen::Index> systematic_indices(const Vector& weights, Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u0 = unif(rng);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  const Eigen::Index last = weights.size() - 1;
  double cum = weights[0];
  Eigen::Index i = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const double u = (u0 + static_cast<double>(s)) / static_cast<double>(n);
    while (u > cum && i < last) {
      ++i;
      cum += weights[i];
    }
    idx[static_cast<std::size_t>(s)] = i;
  }
  return idx;
}

[[nodiscard]] inline ParticleMeasure resample(const ParticleMeasure& mu, Rng& rng) {
  const auto idx = systematic_indices(mu.weights(), mu.size(), rng);
  Matrix atoms(mu.dim(), mu.size());
  for (Eigen::Index s = 0; s < mu.size(); ++s) atoms.col(s) = mu.atom(idx[static_cast<std::size_t>(s)]);
  return ParticleMeasure::uniform(std::move(atoms));
}

/// Per-atom gradient of the potential driving the atoms (columns of a d x N
/// matrix):
///   grad V_i = -grad_theta k(x, theta_i) / int k(x, .) dmu
///              + prior_drift_weight * mean_m grad f_{mu -> p_m}(theta_i).
/// The Gaussian kernel gives grad_theta k = k (x - theta) / h^2. The prior
/// term uses the soft-min extension of each source potential, so it is
/// defined at any location given the target potentials.
[[nodiscard]] inline Matrix transport_gradient(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k,
                                               const std::vector<ParticleMeasure>& draws,
                                               const std::vector<DualPotentials>& potentials, const FlowConfig& cfg) {
  const LikelihoodRatios lr = likelihood_ratios(mu, x, k);
  const double inv_h2 = 1.0 / (k.bandwidth() * k.bandwidth());
  Matrix grad(mu.dim(), mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    grad.col(i) = -lr.ratio[i] * inv_h2 * (x - mu.atom(i));
  }
  if (cfg.prior_drift_weight > 0.0 && !potentials.empty()) {
    const double scale = cfg.prior_drift_weight / static_cast<double>(potentials.size());
    for (std::size_t m = 0; m < potentials.size(); ++m) {
      for (Eigen::Index i = 0; i < mu.size(); ++i) {
        grad.col(i) += scale * potential_gradient_at(potentials[m], draws[m], cfg.sinkhorn, mu.atom(i));
      }
    }
  }
  return grad;
}

/// Euler-Maruyama move theta_i <- theta_i - tau grad V_i (+ sqrt(2 tau) xi_i
/// when diffusion is on). Weights are untouched.
[[nodiscard]] inline ParticleMeasure transport_step(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k,
                                                    const std::vector<ParticleMeasure>& draws,
                                                    const std::vector<DualPotentials>& potentials,
                                                    const FlowConfig& cfg, Rng& rng) {
  if (cfg.tau == 0.0) return mu;
  Matrix grad = transport_gradient(mu, x, k, draws, potentials, cfg);
  if (cfg.drift_taming) {
    for (Eigen::Index i = 0; i < grad.cols(); ++i) grad.col(i) /= 1.0 + cfg.tau * grad.col(i).norm();
  }
  Matrix atoms = mu.atoms() - cfg.tau * grad;
  if (cfg.diffusion) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = std::sqrt(2.0 * cfg.tau);
    for (Eigen::Index i = 0; i < atoms.cols(); ++i) {
      for (Eigen::Index r = 0; r < atoms.rows(); ++r) atoms(r, i) += s * normal(rng);
    }
  }
  return mu.with_atoms(std::move(atoms));
}

/// Convenience overload that solves the Sinkhorn problems for `mu` itself.
[[nodiscard]] inline ParticleMeasure transport_step(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k,
                                                    const std::vector<ParticleMeasure>& draws, const FlowConfig& cfg,
                                                    Rng& rng) {
  std::vector<DualPotentials> pots;
  if (cfg.prior_drift_weight > 0.0) {
    for (const auto& p : draws) pots.push_back(sinkhorn_potentials(mu, p, cfg.sinkhorn));
  }
  return transport_step(mu, x, k, draws, pots, cfg, rng);
}

// ---------------------------------------------------------------------------
// Composed steps

/// Everything a flow needs besides its state and config.
struct FlowContext {
  GaussianKernel kernel;
  PriorSpec prior;
};

[[nodiscard]] inline FlowState make_flow_state(ParticleMeasure init) {
  FlowState s;
  s.measure = std::move(init);
  s.diagnostics.ess = s.measure.ess();
  return s;
}

namespace detail {

inline std::vector<ParticleMeasure> step_draws(FlowState& state, const FlowContext& ctx, const FlowConfig& cfg,
                                               Rng& rng) {
  if (cfg.freeze_prior_draws) {
    if (state.frozen_draws.empty()) state.frozen_draws = prior_monte_carlo(ctx.prior, cfg.prior_draws, rng);
    return state.frozen_draws;
  }
  return prior_monte_carlo(ctx.prior, cfg.prior_draws, rng);
}

/// Reaction step for this step, shrunk to respect cfg.reaction_cap.
inline double reaction_dt(const ParticleMeasure& mu, const Vector& v, const FlowConfig& cfg, std::size_t step) {
  const double dt = cfg.reaction_step(step);
  if (cfg.reaction_cap <= 0.0) return dt;
  const Vector c = centred(mu, v);
  double spread = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) > 0.0) spread = std::max(spread, std::abs(c[i]));
  }
  return dt * spread > cfg.reaction_cap ? cfg.reaction_cap / spread : dt;
}

inline void refresh_warm(FlowState& state, const std::vector<ParticleMeasure>& draws,
                         const std::vector<DualPotentials>& pots, const SinkhornConfig& sk) {
  state.warm.resize(pots.size());
  for (std::size_t m = 0; m < pots.size(); ++m) {
    Vector f(state.measure.size());
    for (Eigen::Index i = 0; i < state.measure.size(); ++i) {
      f[i] = source_potential_at(pots[m], draws[m], sk, state.measure.atom(i));
    }
    state.warm[m] = std::move(f);
  }
}

}  // namespace detail

/// One reaction-only step (atoms fixed): likelihood force, prior force,
/// V = g + lambda_t h, exponential reweighting.
inline void fisher_rao_step(FlowState& state, const Point& x, const FlowContext& ctx, const FlowConfig& cfg,
                            Rng& rng) {
  const double t = static_cast<double>(state.step);
  const double lam = lambda_at(t, cfg.lambda_schedule, cfg.lambda0);
  Vector v = likelihood_force(state.measure, x, ctx.kernel, &state.diagnostics.likelihood_underflows);
  if (lam > 0.0) {
    const auto draws = detail::step_draws(state, ctx, cfg, rng);
    const PriorForce pf = prior_force(state.measure, draws, cfg.sinkhorn, cfg.warm_start ? &state.warm : nullptr);
    state.diagnostics.sinkhorn_solves += draws.size();
    state.diagnostics.sinkhorn_nonconverged += pf.nonconverged;
    v += lam * pf.h;
    if (cfg.warm_start) {
      state.warm.clear();
      for (const auto& p : pf.potentials) state.warm.push_back(p.f);
    }
  }
  state.measure = fr_weight_step(state.measure, v, detail::reaction_dt(state.measure, v, cfg, state.step));
  ++state.step;
  state.diagnostics.ess = state.measure.ess();
}

/// One splitting step: likelihood force -> prior force -> reweight ->
/// (resample) -> transport.
inline void wfr_step(FlowState& state, const Point& x, const FlowContext& ctx, const FlowConfig& cfg, Rng& rng) {
  const double t = static_cast<double>(state.step);
  const double lam = lambda_at(t, cfg.lambda_schedule, cfg.lambda0);
  Vector v = likelihood_force(state.measure, x, ctx.kernel, &state.diagnostics.likelihood_underflows);

  std::vector<ParticleMeasure> draws;
  std::vector<DualPotentials> pots;
  const bool need_prior = lam > 0.0 || (cfg.tau > 0.0 && cfg.prior_drift_weight > 0.0);
  if (need_prior) {
    draws = detail::step_draws(state, ctx, cfg, rng);
    PriorForce pf = prior_force(state.measure, draws, cfg.sinkhorn, cfg.warm_start ? &state.warm : nullptr);
    state.diagnostics.sinkhorn_solves += draws.size();
    state.diagnostics.sinkhorn_nonconverged += pf.nonconverged;
    if (lam > 0.0) v += lam * pf.h;
    pots = std::move(pf.potentials);
  }

  state.measure = fr_weight_step(state.measure, v, detail::reaction_dt(state.measure, v, cfg, state.step));
  if (cfg.resample) state.measure = resample(state.measure, rng);
  state.measure = transport_step(state.measure, x, ctx.kernel, draws, pots, cfg, rng);
  if (cfg.warm_start && need_prior) detail::refresh_warm(state, draws, pots, cfg.sinkhorn);

  ++state.step;
  state.diagnostics.ess = state.measure.ess();
}

inline void newton_step(FlowState& state, const Point& x, const FlowContext& ctx, const FlowConfig& cfg) {
  state.measure = newton_update(state.measure, x, alpha(state.step, cfg.alpha_schedule), ctx.kernel,
                                &state.diagnostics.likelihood_underflows);
  ++state.step;
  state.diagnostics.ess = state.measure.ess();
}

/// Dispatches on cfg.mode.
inline void flow_step(FlowState& state, const Point& x, const FlowContext& ctx, const FlowConfig& cfg, Rng& rng) {
  switch (cfg.mode) {
    case FlowMode::newton:
      newton_step(state, x, ctx, cfg);
      break;
    case FlowMode::fisher_rao:
      fisher_rao_step(state, x, ctx, cfg, rng);
      break;
    case FlowMode::wfr:
      wfr_step(state, x, ctx, cfg, rng);
      break;
  }
}

// ---------------------------------------------------------------------------
// Whole runs

/// One row of the per-step trace.
struct RunRecord {
  std::size_t step = 0;
  Point observation;
  /// W2 to the truth; only filled on the steps the caller asks for.
  std::optional<double> w2;
  double ess = 0.0;
  double wall_seconds = 0.0;
};

struct FlowRun {
  FlowState state;
  std::vector<RunRecord> trace;
};

/// Called after each step; may fill RunRecord::w2 or check invariants.
using StepObserver = std::function<void(const FlowState&, RunRecord&)>;

/// Consumes the columns of `stream` in order.
[[nodiscard]] inline FlowRun run_flow(const Matrix& stream, ParticleMeasure init, const FlowContext& ctx,
                                      const FlowConfig& cfg, Rng& rng, const StepObserver& observer = {}) {
  cfg.validate();
  if (stream.cols() == 0) {
    throw InvalidArgument("run_flow: empty data stream");
  }
  if (stream.rows() != init.dim()) {
    throw DimensionError("run_flow: stream and initial measure dimensions differ");
  }
  FlowRun run;
  run.state = make_flow_state(std::move(init));
  run.trace.reserve(static_cast<std::size_t>(stream.cols()));
  const auto start = std::chrono::steady_clock::now();
  for (Eigen::Index s = 0; s < stream.cols(); ++s) {
    const Point x = stream.col(s);
    flow_step(run.state, x, ctx, cfg, rng);
    RunRecord rec;
    rec.step = run.state.step;
    rec.observation = x;
    rec.ess = run.state.diagnostics.ess;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (observer) observer(run.state, rec);
    run.trace.push_back(std::move(rec));
  }
  return run;
}

}  // namespace nsflows
