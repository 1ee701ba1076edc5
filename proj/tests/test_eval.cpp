#include <gtest/gtest.h>

#include <atomic>
#include <numeric>

#include "helpers.hpp"

using namespace nsflows;

namespace {

ExperimentConfig tiny_study() {
  ExperimentConfig c = ExperimentConfig::bootstrap_defaults();
  c.n_grid = {20, 40};
  c.replicates = 3;
  c.n_ref = 200;
  c.flow.particles = 8;
  c.flow.prior_draws = 2;
  c.prior.truncation = 16;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(W2ToTruth, VanishesForNarrowComponentAtItsMean) {
  double prev = INFINITY;
  for (double sd : {1e-1, 1e-2, 1e-3}) {
    const GaussianMixture gm({fixtures::isotropic(0.5, -0.5, sd, 1.0)});
    Rng rng(1);
    const double w = w2_to_truth(ParticleMeasure::dirac(Point{{0.5, -0.5}}), gm, 300, rng);
    EXPECT_LT(w, prev);
    prev = w;
  }
  EXPECT_LT(prev, 3e-3);
}

TEST(W2ToTruth, DeterministicAndZeroOnReference) {
  const auto gm = fixtures::paw();
  Rng a(5), b(5);
  const auto mu = ParticleMeasure::uniform(Matrix::Zero(2, 3));
  EXPECT_EQ(w2_to_truth(mu, gm, 100, a), w2_to_truth(mu, gm, 100, b));
  Rng c(9), d(9);
  const auto ref = ParticleMeasure::uniform(gm.sample(100, c));
  EXPECT_NEAR(w2_to_truth(ref, gm, 100, d), 0.0, 1e-7);
}

TEST(QuantileBand, ConstantValues) {
  const Band b = quantile_band(std::vector<double>(9, 2.5));
  EXPECT_EQ(b.lower, 2.5);
  EXPECT_EQ(b.mean, 2.5);
  EXPECT_EQ(b.upper, 2.5);
}

TEST(QuantileBand, OneToHundred) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const Band b = quantile_band(v, 0.9);
  EXPECT_NEAR(b.lower, 5.95, 1e-12);
  EXPECT_NEAR(b.mean, 50.5, 1e-12);
  EXPECT_NEAR(b.upper, 95.05, 1e-12);
}

TEST(QuantileBand, WidensWithLevel) {
  Rng rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> v(57);
  for (auto& x : v) x = normal(rng);
  double width = 0.0;
  for (double level : {0.1, 0.5, 0.8, 0.9, 0.99}) {
    const Band b = quantile_band(v, level);
    EXPECT_LE(b.lower, b.mean);
    EXPECT_LE(b.mean, b.upper);
    EXPECT_GE(b.upper - b.lower, width);
    width = b.upper - b.lower;
  }
  EXPECT_THROW((void)quantile_band({}, 0.9), InvalidArgument);
  EXPECT_THROW((void)quantile_band(v, 1.0), InvalidArgument);
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw InvalidArgument("boom");
               }),
               InvalidArgument);
}

TEST(ExperimentConfig, DefaultsAndValidation) {
  const auto c = ExperimentConfig::flow_compare_defaults();
  EXPECT_EQ(c.n, 1000U);
  EXPECT_EQ(c.flow.particles, 50U);
  EXPECT_DOUBLE_EQ(c.flow.sinkhorn.epsilon, 0.05);
  EXPECT_EQ(c.flow.sinkhorn.max_iters, 25U);
  EXPECT_DOUBLE_EQ(c.flow.tau, 0.03);
  EXPECT_DOUBLE_EQ(c.flow.lambda0, 0.05);
  EXPECT_DOUBLE_EQ(c.flow.prior_drift_weight, 0.1);
  EXPECT_EQ(c.n_grid.size(), 10U);
  EXPECT_EQ(c.n_grid.front(), 100U);
  EXPECT_EQ(c.n_grid.back(), 1000U);
  EXPECT_EQ(c.replicates, 100U);
  EXPECT_DOUBLE_EQ(c.prior.base_cov(0, 0), 25.0);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.n_ref = 1990;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.target = "moon";
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Experiment1, SharedInitAndDeterminism) {
  ExperimentConfig c;
  c.n = 40;
  c.flow.particles = 10;
  c.flow.prior_draws = 2;
  c.n_ref = 200;
  c.seed = 3;
  std::atomic<int> steps{0};
  const auto a = run_experiment_1(c, [&](const FlowState&, RunRecord&) { ++steps; });
  EXPECT_EQ(steps.load(), 3 * 40);
  ASSERT_EQ(a.modes.size(), 3U);
  EXPECT_EQ(a.modes[0].mode, FlowMode::newton);
  EXPECT_EQ(a.modes[0].final_measure.atoms(), a.init.atoms());
  EXPECT_EQ(a.modes[1].final_measure.atoms(), a.init.atoms());
  c.jobs = 3;
  const auto b = run_experiment_1(c);
  EXPECT_EQ(a.init, b.init);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(a.modes[m].final_measure, b.modes[m].final_measure);
    EXPECT_EQ(a.modes[m].w2, b.modes[m].w2);
  }
}

TEST(Experiment2, ArmsStreamsAndBands) {
  const auto cfg = tiny_study();
  std::atomic<std::size_t> steps{0};
  const auto r = run_experiment_2(cfg, [&](const FlowState&, RunRecord&) { ++steps; });
  EXPECT_EQ(r.rows.size(), 2U * 3U * 2U);
  // Truncated arms run n steps, continuation arms ceil(1.5 n).
  EXPECT_EQ(steps.load(), 3U * (20 + 30 + 40 + 60));
  for (std::size_t n : cfg.n_grid) {
    for (const std::string arm : {"truncated", "continuation"}) {
      const auto& b = r.band(n, arm).band;
      EXPECT_LE(b.lower, b.mean);
      EXPECT_LE(b.mean, b.upper);
      EXPECT_EQ(r.values(n, arm).size(), 3U);
    }
  }
  EXPECT_THROW((void)r.band(30, "truncated"), InvalidArgument);
}

TEST(Experiment2, ReplicatesDifferAndSeedsReproduce) {
  auto cfg = tiny_study();
  const auto a = run_experiment_2(cfg);
  cfg.jobs = 2;
  const auto b = run_experiment_2(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].w2, b.rows[i].w2);
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
  }
  const auto v = a.values(20, "truncated");
  EXPECT_NE(v[0], v[1]);
  EXPECT_NE(v[1], v[2]);
  EXPECT_EQ(a.rows[0].seed, replicate_seed(cfg.seed, 20, 0));
}

TEST(Experiment3, PairedArmsShareStreamsAndInit) {
  auto cfg = tiny_study();
  cfg.n_grid = {20};
  cfg.replicates = 2;
  // With lambda already zero the two arms must coincide exactly.
  cfg.flow.lambda0 = 0.0;
  const auto r = run_experiment_3(cfg);
  const auto on = r.values(20, "prior_on");
  const auto off = r.values(20, "prior_off");
  ASSERT_EQ(on.size(), 2U);
  EXPECT_EQ(on, off);
}

TEST(Experiment3, OffArmOnlyDropsLambda) {
  auto cfg = tiny_study();
  cfg.n_grid = {20};
  cfg.replicates = 2;
  cfg.flow.resample = false;
  std::mutex mu;
  std::vector<std::size_t> solves;
  const auto r = run_experiment_3(cfg, [&](const FlowState& s, RunRecord&) {
    if (s.step == 20) {
      std::lock_guard lock(mu);
      solves.push_back(s.diagnostics.sinkhorn_solves);
    }
  });
  // The prior drift stays active in both arms, so both solve Sinkhorn problems.
  for (auto s : solves) EXPECT_EQ(s, 20U * cfg.flow.prior_draws);
  EXPECT_NE(r.values(20, "prior_on"), r.values(20, "prior_off"));
}
