#pragma once

// Metrics, replicate orchestration and quantile bands for the flow
// comparison, bootstrap-continuation and prior-ablation studies.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "nsflows/core.hpp"
#include "nsflows/flows.hpp"
#include "nsflows/priors.hpp"
#include "nsflows/stream.hpp"
#include "nsflows/transport.hpp"

namespace nsflows {

/// Exact W2 between `mu` and an i.i.d. reference sample of size n_ref from gm.
[[nodiscard]] inline double w2_to_truth(const ParticleMeasure& mu, const GaussianMixture& gm, std::size_t n_ref,
                                        Rng& rng, std::size_t support_cap = kDefaultExactSupportCap) {
  if (n_ref < 1) throw InvalidArgument("w2_to_truth: need at least one reference point");
  const ParticleMeasure ref = ParticleMeasure::uniform(gm.sample(n_ref, rng));
  return exact_w2(mu, ref, support_cap);
}

/// Linear-interpolation empirical quantile (type 7).
[[nodiscard]] inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Band {
  double lower = 0.0;
  double mean = 0.0;
  double upper = 0.0;
};

/// Central `level` band from the empirical (1-level)/2 and (1+level)/2
/// quantiles, plus the mean.
[[nodiscard]] inline Band quantile_band(const std::vector<double>& values, double level = 0.90) {
  if (values.empty()) throw InvalidArgument("quantile_band: no values");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("quantile_band: level must lie in (0, 1)");
  Band b;
  b.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  b.lower = quantile(values, 0.5 * (1.0 - level));
  b.upper = quantile(values, 0.5 * (1.0 + level));
  // Guard the ordering against rounding when all values coincide.
  b.lower = std::min(b.lower, b.mean);
  b.upper = std::max(b.upper, b.mean);
  return b;
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written by index; the first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Settings shared by all three studies.
struct ExperimentConfig {
  FlowConfig flow;
  double bandwidth = 0.35;
  PriorSpec prior;
  std::string target = "paw";
  /// Observations for the flow comparison.
  std::size_t n = 1000;
  /// Sample sizes for the bootstrap and ablation studies.
  std::vector<std::size_t> n_grid{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  std::size_t replicates = 100;
  std::size_t n_ref = 1000;
  std::size_t support_cap = kDefaultExactSupportCap;
  double band_level = 0.90;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  /// Flow comparison on the paw target.
  [[nodiscard]] static ExperimentConfig flow_compare_defaults() { return {}; }

  /// Bootstrap and ablation studies on the four-component target.
  [[nodiscard]] static ExperimentConfig bootstrap_defaults() {
    ExperimentConfig c;
    c.target = "four";
    c.prior.base_cov = Matrix::Identity(2, 2) * 9.0;
    return c;
  }

  void validate() const {
    flow.validate();
    prior.validate();
    if (!(bandwidth > 0.0)) throw ConfigError("kernel.bandwidth", "must be positive");
    (void)fixtures::by_name(target);
    if (n < 1) throw ConfigError("n", "must be >= 1");
    if (n_grid.empty()) throw ConfigError("n_grid", "must not be empty");
    for (auto v : n_grid) {
      if (v < 1) throw ConfigError("n_grid", "entries must be >= 1");
    }
    if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
    if (n_ref < 1) throw ConfigError("n_ref", "must be >= 1");
    if (flow.particles + n_ref > support_cap) {
      throw ConfigError("n_ref", "particles + n_ref exceeds the exact transport support cap");
    }
    if (!(band_level > 0.0 && band_level < 1.0)) throw ConfigError("band_level", "must lie in (0, 1)");
    if (prior.dim() != 2) throw ConfigError("prior.base_mean", "fixture targets are two-dimensional");
  }

  [[nodiscard]] FlowContext context() const { return {GaussianKernel(bandwidth, prior.dim()), prior}; }
};

/// Seed-tree tags. A replicate's seed fans out into these streams.
namespace seed_tag {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t reference = 3;
inline constexpr std::uint64_t flow = 4;
inline constexpr std::uint64_t bootstrap = 5;
}  // namespace seed_tag

// ---------------------------------------------------------------------------
// Flow comparison

struct ModeOutcome {
  FlowMode mode = FlowMode::newton;
  ParticleMeasure final_measure;
  double w2 = 0.0;
  FlowDiagnostics diagnostics;
};

struct FlowComparison {
  Matrix data;
  ParticleMeasure init;
  std::vector<ModeOutcome> modes;
};

/// Newton, Fisher-Rao and WFR from one initial measure on one raw i.i.d.
/// stream; all modes are scored against the same reference sample.
[[nodiscard]] inline FlowComparison run_experiment_1(const ExperimentConfig& cfg,
                                                     const StepObserver& observer = {}) {
  cfg.validate();
  const GaussianMixture truth = fixtures::by_name(cfg.target);
  const FlowContext ctx = cfg.context();
  FlowComparison out;
  Rng data_rng(derive_seed(cfg.seed, seed_tag::data));
  out.data = truth.sample(cfg.n, data_rng);
  Rng init_rng(derive_seed(cfg.seed, seed_tag::init));
  out.init = init_particles(cfg.prior, cfg.flow.particles, init_rng);
  const Matrix stream = make_stream({out.data, StreamArm::raw, 0, 0});

  const std::vector<FlowMode> modes{FlowMode::newton, FlowMode::fisher_rao, FlowMode::wfr};
  out.modes.resize(modes.size());
  parallel_for(modes.size(), cfg.jobs, [&](std::size_t i) {
    FlowConfig fc = cfg.flow;
    fc.mode = modes[i];
    Rng flow_rng(derive_seed(cfg.seed, seed_tag::flow));
    FlowRun run = run_flow(stream, out.init, ctx, fc, flow_rng, observer);
    Rng ref_rng(derive_seed(cfg.seed, seed_tag::reference));
    out.modes[i] = {modes[i], run.state.measure, w2_to_truth(run.state.measure, truth, cfg.n_ref, ref_rng,
                                                             cfg.support_cap),
                    run.state.diagnostics};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Replicated studies

struct ReplicateRow {
  std::size_t n = 0;
  std::string arm;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double w2 = 0.0;
};

struct BandRow {
  std::size_t n = 0;
  std::string arm;
  Band band;
};

struct ExperimentResult {
  std::vector<ReplicateRow> rows;
  std::vector<BandRow> bands;
  std::size_t replicates = 0;
  FlowDiagnostics diagnostics;

  [[nodiscard]] std::vector<double> values(std::size_t n, const std::string& arm) const {
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r.n == n && r.arm == arm) v.push_back(r.w2);
    }
    return v;
  }

  [[nodiscard]] const BandRow& band(std::size_t n, const std::string& arm) const {
    for (const auto& b : bands) {
      if (b.n == n && b.arm == arm) return b;
    }
    throw InvalidArgument("ExperimentResult: no band for n = " + std::to_string(n) + ", arm " + arm);
  }
};

/// One arm of a paired replicate: which stream to consume and which flow
/// settings to use. Everything else is shared within the pair.
struct ArmSpec {
  std::string name;
  StreamArm stream = StreamArm::truncated;
  std::function<void(FlowConfig&)> adjust;
};

/// Replicate seed for (n, b) under the master seed.
[[nodiscard]] inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t n, std::size_t b) {
  return derive_seed(derive_seed(master, n), b);
}

namespace detail {

inline ExperimentResult run_paired_study(const ExperimentConfig& cfg, const std::vector<ArmSpec>& arms,
                                         const StepObserver& observer) {
  cfg.validate();
  const GaussianMixture truth = fixtures::by_name(cfg.target);
  const FlowContext ctx = cfg.context();

  struct Task {
    std::size_t n;
    std::size_t b;
    std::size_t arm;
  };
  std::vector<Task> tasks;
  for (auto n : cfg.n_grid) {
    for (std::size_t b = 0; b < cfg.replicates; ++b) {
      for (std::size_t a = 0; a < arms.size(); ++a) tasks.push_back({n, b, a});
    }
  }
  std::vector<ReplicateRow> rows(tasks.size());
  std::vector<FlowDiagnostics> diags(tasks.size());
  parallel_for(tasks.size(), cfg.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    const std::uint64_t rep = replicate_seed(cfg.seed, task.n, task.b);
    Rng data_rng(derive_seed(rep, seed_tag::data));
    const Matrix data = truth.sample(task.n, data_rng);
    Rng init_rng(derive_seed(rep, seed_tag::init));
    ParticleMeasure init = init_particles(cfg.prior, cfg.flow.particles, init_rng);
    const Matrix stream = make_stream({data, arms[task.arm].stream, 0, derive_seed(rep, seed_tag::bootstrap)});
    FlowConfig fc = cfg.flow;
    fc.mode = FlowMode::wfr;
    if (arms[task.arm].adjust) arms[task.arm].adjust(fc);
    Rng flow_rng(derive_seed(rep, seed_tag::flow));
    const FlowRun run = run_flow(stream, std::move(init), ctx, fc, flow_rng, observer);
    Rng ref_rng(derive_seed(rep, seed_tag::reference));
    rows[t] = {task.n, arms[task.arm].name, task.b, rep,
               w2_to_truth(run.state.measure, truth, cfg.n_ref, ref_rng, cfg.support_cap)};
    diags[t] = run.state.diagnostics;
  });

  ExperimentResult out;
  out.replicates = cfg.replicates;
  std::sort(rows.begin(), rows.end(), [](const ReplicateRow& a, const ReplicateRow& b) {
    return std::tie(a.n, a.arm, a.replicate) < std::tie(b.n, b.arm, b.replicate);
  });
  out.rows = std::move(rows);
  for (const auto& d : diags) {
    out.diagnostics.likelihood_underflows += d.likelihood_underflows;
    out.diagnostics.sinkhorn_solves += d.sinkhorn_solves;
    out.diagnostics.sinkhorn_nonconverged += d.sinkhorn_nonconverged;
  }
  std::vector<std::string> arm_names;
  for (const auto& a : arms) arm_names.push_back(a.name);
  std::sort(arm_names.begin(), arm_names.end());
  for (auto n : cfg.n_grid) {
    for (const auto& name : arm_names) out.bands.push_back({n, name, quantile_band(out.values(n, name), cfg.band_level)});
  }
  return out;
}

}  // namespace detail

/// Truncated (n steps) vs continuation (ceil(1.5 n) steps) bootstrap streams.
/// The two arms of a replicate share data, initial measure, Dirichlet weights
/// and flow seed; the continuation stream extends the truncated one.
[[nodiscard]] inline ExperimentResult run_experiment_2(const ExperimentConfig& cfg, const StepObserver& observer = {}) {
  return detail::run_paired_study(cfg,
                                  {{"truncated", StreamArm::truncated, {}},
                                   {"continuation", StreamArm::continuation, {}}},
                                  observer);
}

/// Prior regularisation on (lambda = lambda0) vs off (lambda = 0) on the same
/// truncated bootstrap streams; the atom-level prior drift is kept in both.
[[nodiscard]] inline ExperimentResult run_experiment_3(const ExperimentConfig& cfg, const StepObserver& observer = {}) {
  return detail::run_paired_study(cfg,
                                  {{"prior_on", StreamArm::truncated, {}},
                                   {"prior_off", StreamArm::truncated, [](FlowConfig& f) { f.lambda0 = 0.0; }}},
                                  observer);
}

}  // namespace nsflows
