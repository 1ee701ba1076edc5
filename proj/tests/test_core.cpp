#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace nsflows;
using nsflows::testing::line_measure;
using nsflows::testing::pt;
using nsflows::testing::random_measure;

TEST(Kernel, DensityAtItsMean) {
  const GaussianKernel k(1.0, 1);
  EXPECT_NEAR(kernel_eval(k, pt(0.0), pt(0.0)), 0.398942280401, 1e-12);
}

TEST(Kernel, Symmetric) {
  Rng rng(3);
  const GaussianKernel k(0.7, 3);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 50; ++t) {
    Point x(3), y(3);
    for (int r = 0; r < 3; ++r) {
      x[r] = normal(rng);
      y[r] = normal(rng);
    }
    EXPECT_DOUBLE_EQ(kernel_eval(k, x, y), kernel_eval(k, y, x));
  }
}

TEST(Kernel, TwoUnitsApart) {
  const GaussianKernel k(1.0, 1);
  EXPECT_NEAR(kernel_eval(k, pt(1.0), pt(-1.0)), 0.053990966513, 1e-12);
}

TEST(Kernel, NonNegativeAndIntegratesToOne) {
  // Importance sampling from N(0, 4) against the h = 0.5 kernel at theta = 0.3.
  const GaussianKernel k(0.5, 1);
  Rng rng(11);
  std::normal_distribution<double> prop(0.0, 2.0);
  const double n = 200000;
  double acc = 0.0;
  for (int s = 0; s < n; ++s) {
    const double x = prop(rng);
    const double q = std::exp(-x * x / 8.0) / std::sqrt(8.0 * std::numbers::pi);
    const double v = kernel_eval(k, pt(x), pt(0.3));
    ASSERT_GE(v, 0.0);
    acc += v / q;
  }
  EXPECT_NEAR(acc / n, 1.0, 1e-2);
}

TEST(Kernel, RejectsBadBandwidthAndDimension) {
  EXPECT_THROW(GaussianKernel(0.0), InvalidArgument);
  EXPECT_THROW(GaussianKernel(-1.0), InvalidArgument);
  const GaussianKernel k(1.0, 2);
  EXPECT_THROW((void)kernel_eval(k, pt(0.0), pt(0.0)), DimensionError);
}

TEST(MarginalLikelihood, SingleAtomAtObservation) {
  const auto mu = line_measure({1.0}, {1.0});
  EXPECT_NEAR(marginal_likelihood(mu, pt(1.0), GaussianKernel(1.0, 1)), 0.398942280401, 1e-12);
}

TEST(MarginalLikelihood, TwoAtomHandSum) {
  const auto mu = line_measure({-1.0, 1.0}, {0.5, 0.5});
  EXPECT_NEAR(marginal_likelihood(mu, pt(1.0), GaussianKernel(1.0, 1)), 0.226466623457, 1e-12);
}

TEST(MarginalLikelihood, ZeroWeightAtomIgnored) {
  const auto mu = line_measure({0.2, -3.0}, {1.0, 0.0});
  const GaussianKernel k(1.0, 1);
  EXPECT_DOUBLE_EQ(marginal_likelihood(mu, pt(0.5), k), kernel_eval(k, pt(0.5), pt(0.2)));
}

TEST(MarginalLikelihood, LinearInWeights) {
  Rng rng(5);
  const GaussianKernel k(0.6, 2);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_measure(6, 2, rng);
    const auto b = a.with_weights(random_measure(6, 2, rng).weights());
    const double alpha = 0.37;
    const auto mix = a.with_weights(alpha * a.weights() + (1 - alpha) * b.weights());
    const Point x = random_measure(1, 2, rng).atom(0);
    EXPECT_NEAR(marginal_likelihood(mix, x, k),
                alpha * marginal_likelihood(a, x, k) + (1 - alpha) * marginal_likelihood(b, x, k), 1e-12);
  }
}

TEST(MarginalLikelihood, UnderflowThrowsButRatiosSurvive) {
  const auto mu = line_measure({0.0, 1.0}, {0.5, 0.5});
  const GaussianKernel k(0.01, 1);
  EXPECT_THROW((void)marginal_likelihood(mu, pt(100.0), k), UnderflowError);
  const LikelihoodRatios lr = likelihood_ratios(mu, pt(100.0), k);
  EXPECT_TRUE(lr.ratio.allFinite());
  EXPECT_NEAR(mu.weights().dot(lr.ratio), 1.0, 1e-12);
}

TEST(ParticleMeasure, NormalisesOnConstruction) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto mu = random_measure(1 + t % 17, 2, rng);
    EXPECT_NEAR(mu.weights().sum(), 1.0, 1e-12);
  }
  const ParticleMeasure scaled(Matrix::Zero(1, 3), Vector::Constant(3, 1e-200));
  EXPECT_NEAR(scaled.weights().sum(), 1.0, 1e-12);
}

TEST(ParticleMeasure, RejectsInvalidInput) {
  EXPECT_THROW(ParticleMeasure(Matrix::Zero(2, 3), Vector::Ones(2)), DimensionError);
  EXPECT_THROW(ParticleMeasure(Matrix::Zero(2, 2), Vector::Zero(2)), InvalidArgument);
  EXPECT_THROW(ParticleMeasure(Matrix::Zero(2, 2), Vector{{1.0, -0.5}}), InvalidArgument);
  EXPECT_THROW(ParticleMeasure(Matrix::Zero(2, 0), Vector(0)), InvalidArgument);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 1) = NAN;
  EXPECT_THROW(ParticleMeasure::uniform(bad), InvalidArgument);
}

TEST(ParticleMeasure, EffectiveSampleSize) {
  EXPECT_DOUBLE_EQ(ParticleMeasure::uniform(Matrix::Zero(1, 8)).ess(), 8.0);
  EXPECT_DOUBLE_EQ(line_measure({0, 1}, {1, 0}).ess(), 1.0);
}

TEST(Mixture, StandardNormalAtOrigin) {
  const GaussianMixture gm({{Point::Zero(2), Matrix::Identity(2, 2), 1.0}});
  EXPECT_NEAR(mixture_density(gm, Point::Zero(2)), 1.0 / (2.0 * std::numbers::pi), 1e-14);
}

TEST(Mixture, DuplicatedComponentIsUnchanged) {
  const GaussianComponent c{Point{{0.3, -1.0}}, Matrix::Identity(2, 2) * 0.4, 1.0};
  const GaussianMixture one({c});
  GaussianComponent half = c;
  half.weight = 0.5;
  const GaussianMixture two({half, half});
  const Point x{{0.7, 0.1}};
  EXPECT_NEAR(two.density(x), one.density(x), 1e-15);
}

TEST(Mixture, CorrelatedTwoComponentValue) {
  Matrix c1(2, 2), c2(2, 2);
  c1 << 0.5, 0.1, 0.1, 0.4;
  c2 << 1.2, -0.3, -0.3, 0.8;
  const GaussianMixture gm({{Point{{0.3, -0.2}}, c1, 0.3}, {Point{{-1.0, 1.5}}, c2, 0.7}});
  EXPECT_NEAR(gm.density(Point{{0.1, 0.4}}), 1.065122480210745e-01, 1e-13);
}

TEST(Mixture, RejectsBadCovariance) {
  Matrix c(2, 2);
  c << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianMixture({{Point::Zero(2), c, 1.0}}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{Point::Zero(2), Matrix::Identity(3, 3), 1.0}}), DimensionError);
}

TEST(Mixture, SampleSizesMeanAndDeterminism) {
  const GaussianMixture gm({{Point::Zero(2), Matrix::Identity(2, 2), 1.0}});
  Rng rng(9);
  EXPECT_EQ(sample_mixture(gm, 0, rng).cols(), 0);
  Rng a(42), b(42);
  const Matrix s = sample_mixture(gm, 100000, a);
  EXPECT_EQ(s, sample_mixture(gm, 100000, b));
  const Vector mean = s.rowwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.02);
}

TEST(Fixtures, PawAndFourComponent) {
  const auto paw = fixtures::paw();
  EXPECT_EQ(paw.components().size(), 7U);
  double total = 0.0;
  for (const auto& c : paw.components()) total += c.weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto four = fixtures::four_component();
  EXPECT_EQ(four.components().size(), 4U);
  EXPECT_NEAR(four.components()[3].mean[0], 2.0, 0.0);
  EXPECT_THROW((void)fixtures::by_name("cat"), InvalidArgument);
}

TEST(Seeds, DerivationIsStableAndSpreads) {
  EXPECT_EQ(derive_seed(7, 1), derive_seed(7, 1));
  EXPECT_NE(derive_seed(7, 1), derive_seed(7, 2));
  EXPECT_NE(derive_seed(7, 1), derive_seed(8, 1));
  EXPECT_NE(derive_seed(0, 0), 0U);
}
