#pragma once

// Pitman-Yor / Dirichlet-process priors sampled by truncated stick-breaking.

#include <Eigen/Cholesky>

#include <random>
#include <vector>

#include "nsflows/core.hpp"

namespace nsflows {

/// PY(discount, concentration, N(base_mean, base_cov)) truncated at K atoms.
/// discount = 0 gives the Dirichlet process.
struct PriorSpec {
  double discount = 0.2;
  double concentration = 10.0;
  Point base_mean = Point::Zero(2);
  Matrix base_cov = Matrix::Identity(2, 2) * 25.0;
  std::size_t truncation = 64;

  void validate() const {
    if (!(discount >= 0.0 && discount < 1.0)) {
      throw ConfigError("prior.discount", "must lie in [0, 1)");
    }
    if (!(concentration > -discount)) {
      throw ConfigError("prior.concentration", "must exceed -discount");
    }
    if (truncation < 1) {
      throw ConfigError("prior.truncation", "must be >= 1");
    }
    if (base_cov.rows() != base_mean.size() || base_cov.cols() != base_mean.size()) {
      throw ConfigError("prior.base_cov", "shape does not match base_mean");
    }
    if (!base_cov.isApprox(base_cov.transpose(), 1e-12) ||
        Eigen::LLT<Matrix>(base_cov).info() != Eigen::Success) {
      throw ConfigError("prior.base_cov", "must be symmetric positive definite");
    }
  }

  [[nodiscard]] Eigen::Index dim() const noexcept { return base_mean.size(); }
};

namespace detail {

inline Matrix sample_base(const PriorSpec& spec, Eigen::Index n, Rng& rng) {
  const Matrix L = Eigen::LLT<Matrix>(spec.base_cov).matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(spec.dim(), n);
  Vector z(spec.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < spec.dim(); ++r) z[r] = normal(rng);
    out.col(i) = spec.base_mean + L * z;
  }
  return out;
}

}  // namespace detail

/// Stick proportions V_1..V_K with V_k ~ Beta(1 - d, c + k d) and V_K = 1, so
/// the truncated weights sum to one exactly.
[[nodiscard]] inline std::vector<double> draw_sticks(const PriorSpec& spec, Rng& rng) {
  std::vector<double> v(spec.truncation);
  for (std::size_t k = 0; k + 1 < spec.truncation; ++k) {
    const double idx = static_cast<double>(k + 1);
    v[k] = sample_beta(1.0 - spec.discount, spec.concentration + idx * spec.discount, rng);
  }
  v.back() = 1.0;
  return v;
}

[[nodiscard]] inline Vector sticks_to_weights(const std::vector<double>& v) {
  Vector w(static_cast<Eigen::Index>(v.size()));
  double remaining = 1.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    w[static_cast<Eigen::Index>(k)] = v[k] * remaining;
    remaining *= 1.0 - v[k];
  }
  return w;
}

/// One truncated realisation p ~ PY(d, c, G0).
[[nodiscard]] inline ParticleMeasure stick_breaking_draw(const PriorSpec& spec, Rng& rng) {
  spec.validate();
  Vector w = sticks_to_weights(draw_sticks(spec, rng));
  Matrix atoms = detail::sample_base(spec, static_cast<Eigen::Index>(spec.truncation), rng);
  return {std::move(atoms), std::move(w)};
}

/// N atoms i.i.d. from the prior mean measure G0 with uniform weights.
[[nodiscard]] inline ParticleMeasure init_particles(const PriorSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  if (n < 1) {
    throw InvalidArgument("init_particles: need at least one particle");
  }
  return ParticleMeasure::uniform(detail::sample_base(spec, static_cast<Eigen::Index>(n), rng));
}

/// M independent prior realisations.
[[nodiscard]] inline std::vector<ParticleMeasure> prior_monte_carlo(const PriorSpec& spec, std::size_t m, Rng& rng) {
  if (m < 1) {
    throw InvalidArgument("prior_monte_carlo: need at least one draw");
  }
  std::vector<ParticleMeasure> draws;
  draws.reserve(m);
  for (std::size_t i = 0; i < m; ++i) draws.push_back(stick_breaking_draw(spec, rng));
  return draws;
}

}  // namespace nsflows
