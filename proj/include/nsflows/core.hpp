#pragma once

// Measures, the Gaussian location kernel and Gaussian mixture targets.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nsflows/error.hpp"
#include "nsflows/random.hpp"

namespace nsflows {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Elementwise exp via std::exp. Eigen's packet exp clamps its argument, so
/// exp(-inf) would come back as a subnormal instead of zero.
template <typename Derived>
[[nodiscard]] Vector exp_of(const Eigen::MatrixBase<Derived>& v) {
  return v.unaryExpr([](double t) { return std::exp(t); });
}

inline constexpr double kWeightSumTolerance = 1e-12;

/// Weighted atomic measure sum_i w_i delta_{theta_i}. Atoms are stored as the
/// columns of a d x N matrix. Weights are normalised on construction, so every
/// instance is a probability measure.
class ParticleMeasure {
 public:
  ParticleMeasure() = default;

  ParticleMeasure(Matrix atoms, Vector weights) : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.cols() != weights_.size()) {
      throw DimensionError("ParticleMeasure: " + std::to_string(atoms_.cols()) + " atoms but " +
                           std::to_string(weights_.size()) + " weights");
    }
    if (atoms_.cols() == 0) {
      throw InvalidArgument("ParticleMeasure: empty measure");
    }
    if (!atoms_.allFinite()) {
      throw InvalidArgument("ParticleMeasure: non-finite atom coordinate");
    }
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) {
        throw InvalidArgument("ParticleMeasure: weight " + std::to_string(i) + " is negative or non-finite");
      }
    }
    normalise();
  }

  [[nodiscard]] static ParticleMeasure uniform(Matrix atoms) {
    const auto n = atoms.cols();
    return {std::move(atoms), Vector::Constant(n, 1.0)};
  }

  [[nodiscard]] static ParticleMeasure dirac(const Point& at) { return uniform(Matrix(at)); }

  [[nodiscard]] Eigen::Index size() const noexcept { return weights_.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return atoms_.rows(); }
  [[nodiscard]] const Matrix& atoms() const noexcept { return atoms_; }
  [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
  [[nodiscard]] auto atom(Eigen::Index i) const { return atoms_.col(i); }
  [[nodiscard]] double weight(Eigen::Index i) const { return weights_[i]; }

  /// Effective sample size 1 / sum w_i^2.
  [[nodiscard]] double ess() const { return 1.0 / weights_.squaredNorm(); }

  [[nodiscard]] ParticleMeasure with_weights(Vector w) const { return {atoms_, std::move(w)}; }
  [[nodiscard]] ParticleMeasure with_atoms(Matrix a) const { return {std::move(a), weights_}; }

  friend bool operator==(const ParticleMeasure& a, const ParticleMeasure& b) {
    return a.atoms_.rows() == b.atoms_.rows() && a.atoms_.cols() == b.atoms_.cols() &&
           a.atoms_ == b.atoms_ && a.weights_ == b.weights_;
  }

 private:
  void normalise() {
    const double s = weights_.sum();
    if (!(s > 0.0)) {
      throw InvalidArgument("ParticleMeasure: weights sum to zero");
    }
    weights_ /= s;
    // A second pass pulls the sum back within a few ulps of one.
    weights_ /= weights_.sum();
  }

  Matrix atoms_;
  Vector weights_;
};

/// Isotropic Gaussian location kernel k(x, theta) = N(x; theta, h^2 I).
class GaussianKernel {
 public:
  explicit GaussianKernel(double bandwidth, Eigen::Index dim = 2) : h_(bandwidth), dim_(dim) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw InvalidArgument("GaussianKernel: bandwidth must be positive");
    }
    if (dim < 1) {
      throw InvalidArgument("GaussianKernel: dimension must be >= 1");
    }
    log_norm_ = -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi * h_ * h_);
  }

  [[nodiscard]] double bandwidth() const noexcept { return h_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
  [[nodiscard]] double log_normaliser() const noexcept { return log_norm_; }

  template <typename A, typename B>
  [[nodiscard]] double log_eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& theta) const {
    if (x.size() != dim_ || theta.size() != dim_) {
      throw DimensionError("GaussianKernel: expected dimension " + std::to_string(dim_) + ", got " +
                           std::to_string(x.size()) + " and " + std::to_string(theta.size()));
    }
    return log_norm_ - (x - theta).squaredNorm() / (2.0 * h_ * h_);
  }

 private:
  double h_;
  Eigen::Index dim_;
  double log_norm_ = 0.0;
};

template <typename A, typename B>
[[nodiscard]] double kernel_eval(const GaussianKernel& k, const Eigen::MatrixBase<A>& x,
                                 const Eigen::MatrixBase<B>& theta) {
  return std::exp(k.log_eval(x, theta));
}

/// log k(x, theta_i) for every atom.
[[nodiscard]] inline Vector log_kernel_column(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k) {
  if (mu.dim() != k.dim() || x.size() != k.dim()) {
    throw DimensionError("kernel evaluation: measure, point and kernel dimensions differ");
  }
  const double inv2h2 = 1.0 / (2.0 * k.bandwidth() * k.bandwidth());
  Vector out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    out[i] = k.log_normaliser() - (mu.atom(i) - x).squaredNorm() * inv2h2;
  }
  return out;
}

/// Likelihood ratios k(x, theta_i) / sum_j w_j k(x, theta_j) together with the
/// log marginal likelihood. Evaluated in log space so the ratios stay defined
/// even when every kernel value underflows.
struct LikelihoodRatios {
  Vector ratio;
  double log_marginal = 0.0;
};

[[nodiscard]] inline LikelihoodRatios likelihood_ratios(const ParticleMeasure& mu, const Point& x,
                                                        const GaussianKernel& k) {
  const Vector lk = log_kernel_column(mu, x, k);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) > 0.0) mx = std::max(mx, lk[i]);
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) > 0.0) s += mu.weight(i) * std::exp(lk[i] - mx);
  }
  return {exp_of((lk.array() - mx).matrix()) / s, mx + std::log(s)};
}

/// Floor applied to the marginal likelihood by callers that must not abort.
inline constexpr double kLikelihoodFloor = 1e-300;

/// sum_i w_i k(x, theta_i). Throws UnderflowError when the sum is zero in
/// double precision.
[[nodiscard]] inline double marginal_likelihood(const ParticleMeasure& mu, const Point& x, const GaussianKernel& k) {
  const Vector lk = log_kernel_column(mu, x, k);
  const double ml = mu.weights().dot(exp_of(lk));
  if (!(ml > 0.0)) {
    throw UnderflowError("marginal likelihood underflowed to zero");
  }
  return ml;
}

/// Multivariate normal component of a Gaussian mixture.
struct GaussianComponent {
  Point mean;
  Matrix cov;
  double weight = 1.0;
};

/// Finite Gaussian mixture used as ground truth for data generation and
/// evaluation. Covariances are checked for symmetric positive definiteness.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    if (components_.empty()) {
      throw InvalidArgument("GaussianMixture: no components");
    }
    dim_ = components_.front().mean.size();
    double total = 0.0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      auto& comp = components_[c];
      if (comp.mean.size() != dim_ || comp.cov.rows() != dim_ || comp.cov.cols() != dim_) {
        throw DimensionError("GaussianMixture: component " + std::to_string(c) + " has mismatched dimension");
      }
      if (!(comp.weight >= 0.0)) {
        throw InvalidArgument("GaussianMixture: negative weight on component " + std::to_string(c));
      }
      if (!comp.cov.isApprox(comp.cov.transpose(), 1e-12)) {
        throw InvalidArgument("GaussianMixture: covariance " + std::to_string(c) + " is not symmetric");
      }
      Eigen::LLT<Matrix> llt(comp.cov);
      if (llt.info() != Eigen::Success) {
        throw InvalidArgument("GaussianMixture: covariance " + std::to_string(c) + " is not positive definite");
      }
      chol_.push_back(llt.matrixL());
      log_det_.push_back(2.0 * chol_.back().diagonal().array().log().sum());
      total += comp.weight;
    }
    if (!(total > 0.0)) {
      throw InvalidArgument("GaussianMixture: weights sum to zero");
    }
    for (auto& comp : components_) comp.weight /= total;
  }

  [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
  [[nodiscard]] const std::vector<GaussianComponent>& components() const noexcept { return components_; }

  [[nodiscard]] double component_log_pdf(std::size_t c, const Point& x) const {
    const Vector z = chol_[c].triangularView<Eigen::Lower>().solve(x - components_[c].mean);
    return -0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + log_det_[c] + z.squaredNorm());
  }

  [[nodiscard]] double density(const Point& x) const {
    if (x.size() != dim_) {
      throw DimensionError("GaussianMixture::density: point has wrong dimension");
    }
    double p = 0.0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      p += components_[c].weight * std::exp(component_log_pdf(c, x));
    }
    return p;
  }

  /// n i.i.d. draws as the columns of a d x n matrix.
  [[nodiscard]] Matrix sample(std::size_t n, Rng& rng) const {
    std::vector<double> w;
    w.reserve(components_.size());
    for (const auto& comp : components_) w.push_back(comp.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(dim_, static_cast<Eigen::Index>(n));
    Vector z(dim_);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t c = pick(rng);
      for (Eigen::Index r = 0; r < dim_; ++r) z[r] = normal(rng);
      out.col(static_cast<Eigen::Index>(s)) = components_[c].mean + chol_[c] * z;
    }
    return out;
  }

 private:
  std::vector<GaussianComponent> components_;
  std::vector<Matrix> chol_;
  std::vector<double> log_det_;
  Eigen::Index dim_ = 0;
};

[[nodiscard]] inline double mixture_density(const GaussianMixture& gm, const Point& x) { return gm.density(x); }

[[nodiscard]] inline Matrix sample_mixture(const GaussianMixture& gm, std::size_t n, Rng& rng) {
  return gm.sample(n, rng);
}

/// Fixture targets.
namespace fixtures {

inline GaussianComponent isotropic(double x, double y, double sd, double weight) {
  return {Point{{x, y}}, Matrix::Identity(2, 2) * sd * sd, weight};
}

/// Seven-component "paw": a palm, four toes and two heel lobes.
[[nodiscard]] inline GaussianMixture paw() {
  return GaussianMixture({
      isotropic(0.0, -0.5, 0.35, 0.28),
      isotropic(-1.2, 1.0, 0.18, 0.13),
      isotropic(-0.45, 1.45, 0.18, 0.13),
      isotropic(0.45, 1.45, 0.18, 0.13),
      isotropic(1.2, 1.0, 0.18, 0.13),
      isotropic(-0.5, -1.3, 0.22, 0.10),
      isotropic(0.5, -1.3, 0.22, 0.10),
  });
}

/// Four equal-weight components at (+-2, +-2).
[[nodiscard]] inline GaussianMixture four_component() {
  return GaussianMixture({
      isotropic(-2.0, -2.0, 0.3, 0.25),
      isotropic(-2.0, 2.0, 0.3, 0.25),
      isotropic(2.0, -2.0, 0.3, 0.25),
      isotropic(2.0, 2.0, 0.3, 0.25),
  });
}

[[nodiscard]] inline GaussianMixture by_name(const std::string& name) {
  if (name == "paw") return paw();
  if (name == "four") return four_component();
  throw InvalidArgument("unknown target fixture '" + name + "' (expected paw or four)");
}

}  // namespace fixtures

}  // namespace nsflows
