#pragma once

// Entropic optimal transport between weighted point clouds (log-domain
// Sinkhorn), its dual potentials and their spatial gradients, plus exact
// squared-Euclidean W2 for evaluation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "nsflows/core.hpp"
#include "nsflows/network_simplex.hpp"

namespace nsflows {

struct SinkhornConfig {
  double epsilon = 0.05;
  std::size_t max_iters = 500;
  double tol = 1e-9;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("sinkhorn.epsilon", "must be positive");
    if (!(tol > 0.0)) throw ConfigError("sinkhorn.tol", "must be positive");
    if (max_iters < 1) throw ConfigError("sinkhorn.max_iters", "must be >= 1");
  }
};

/// Dual potentials (f on the source atoms, g on the target atoms) in the
/// gauge sum_i w_i f_i = 0.
struct DualPotentials {
  Vector f;
  Vector g;
  bool converged = false;
  std::size_t iterations_used = 0;
  /// L1 violation of both marginals by the implied plan.
  double marginal_error = 0.0;
};

/// C[i][j] = |theta_i - vartheta_j|^2.
[[nodiscard]] inline Matrix cost_matrix(const ParticleMeasure& a, const ParticleMeasure& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("cost_matrix: measures live in different dimensions");
  }
  const Vector na = a.atoms().colwise().squaredNorm().transpose();
  const Vector nb = b.atoms().colwise().squaredNorm().transpose();
  Matrix c = (-2.0 * a.atoms().transpose() * b.atoms()).colwise() + na;
  c.rowwise() += nb.transpose();
  // Expanded form can dip a hair below zero.
  return c.cwiseMax(0.0);
}

namespace detail {

inline Vector safe_log(const Vector& w) {
  Vector out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out[i] = w[i] > 0.0 ? std::log(w[i]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

/// -eps * log sum_k exp(log_w[k] + (pot[k] - cost[k]) / eps) for one
/// contiguous cost line.
inline double soft_min(const double* cost, const Vector& log_w, const Vector& pot, double eps) {
  const Eigen::Index n = log_w.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    mx = std::max(mx, log_w[k] + (pot[k] - cost[k]) / eps);
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    s += std::exp(log_w[k] + (pot[k] - cost[k]) / eps - mx);
  }
  return -eps * (mx + std::log(s));
}

}  // namespace detail

/// Log-domain Sinkhorn. Alternates g <- softmin_i(C - f), f <- softmin_j(C - g)
/// until the sup-norm change of both potentials drops below cfg.tol or
/// cfg.max_iters is reached. `warm_f` seeds the source potential.
[[nodiscard]] inline DualPotentials sinkhorn_potentials(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                                        const SinkhornConfig& cfg, const Vector* warm_f = nullptr) {
  cfg.validate();
  const Matrix c = cost_matrix(mu, nu);  // n x m, column-major: columns index targets
  const Matrix ct = c.transpose();       // m x n: columns index sources
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  const Vector log_w = detail::safe_log(mu.weights());
  const Vector log_v = detail::safe_log(nu.weights());
  const double eps = cfg.epsilon;

  DualPotentials out;
  out.f = (warm_f != nullptr && warm_f->size() == n && warm_f->allFinite()) ? *warm_f : Vector::Zero(n);
  out.g = Vector::Zero(m);
  Vector f_prev = out.f;
  Vector g_prev = out.g;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    for (Eigen::Index j = 0; j < m; ++j) out.g[j] = detail::soft_min(c.col(j).data(), log_w, out.f, eps);
    for (Eigen::Index i = 0; i < n; ++i) out.f[i] = detail::soft_min(ct.col(i).data(), log_v, out.g, eps);
    out.iterations_used = it + 1;
    const double change = std::max((out.f - f_prev).cwiseAbs().maxCoeff(), (out.g - g_prev).cwiseAbs().maxCoeff());
    f_prev = out.f;
    g_prev = out.g;
    if (it > 0 && change < cfg.tol) {
      out.converged = true;
      break;
    }
  }

  const double shift = mu.weights().dot(out.f);
  out.f.array() -= shift;
  out.g.array() += shift;

  Vector rows = Vector::Zero(n);
  Vector cols = Vector::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = std::exp(log_w[i] + log_v[j] + (out.f[i] + out.g[j] - c(i, j)) / eps);
      rows[i] += p;
      cols[j] += p;
    }
  }
  out.marginal_error = (rows - mu.weights()).lpNorm<1>() + (cols - nu.weights()).lpNorm<1>();
  return out;
}

/// Entropic transport value with its convergence flag.
struct EntropicCost {
  double value = 0.0;
  bool converged = false;
};

/// OT_eps(mu, nu) = <P, C> + eps KL(P | mu x nu), evaluated through the dual
/// objective <w, f> + <v, g> at the returned potentials.
[[nodiscard]] inline EntropicCost entropic_cost(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                               const SinkhornConfig& cfg) {
  const DualPotentials p = sinkhorn_potentials(mu, nu, cfg);
  return {mu.weights().dot(p.f) + nu.weights().dot(p.g), p.converged};
}

/// Debiased divergence S_eps = OT(mu, nu) - OT(mu, mu)/2 - OT(nu, nu)/2.
[[nodiscard]] inline EntropicCost sinkhorn_divergence(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                                     const SinkhornConfig& cfg) {
  const EntropicCost xy = entropic_cost(mu, nu, cfg);
  const EntropicCost xx = entropic_cost(mu, mu, cfg);
  const EntropicCost yy = entropic_cost(nu, nu, cfg);
  return {xy.value - 0.5 * xx.value - 0.5 * yy.value, xy.converged && xx.converged && yy.converged};
}

/// Smooth extension of the source potential to an arbitrary location:
/// f(theta) = -eps log sum_j v_j exp((g_j - |theta - vartheta_j|^2) / eps).
template <typename Derived>
[[nodiscard]] double source_potential_at(const DualPotentials& pot, const ParticleMeasure& nu,
                                         const SinkhornConfig& cfg, const Eigen::MatrixBase<Derived>& theta) {
  const double eps = cfg.epsilon;
  double mx = -std::numeric_limits<double>::infinity();
  Vector e(nu.size());
  for (Eigen::Index j = 0; j < nu.size(); ++j) {
    e[j] = nu.weight(j) > 0.0 ? std::log(nu.weight(j)) + (pot.g[j] - (theta - nu.atom(j)).squaredNorm()) / eps
                              : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, e[j]);
  }
  return -eps * (mx + std::log(exp_of((e.array() - mx).matrix()).sum()));
}

/// grad_theta f at an arbitrary location: sum_j s_j 2 (theta - vartheta_j) with
/// soft-min responsibilities s_j proportional to v_j exp((g_j - C_j) / eps).
template <typename Derived>
[[nodiscard]] Point potential_gradient_at(const DualPotentials& pot, const ParticleMeasure& nu,
                                          const SinkhornConfig& cfg, const Eigen::MatrixBase<Derived>& theta) {
  if (theta.size() != nu.dim()) {
    throw DimensionError("potential_gradient: point and target dimensions differ");
  }
  const double eps = cfg.epsilon;
  Vector e(nu.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < nu.size(); ++j) {
    e[j] = nu.weight(j) > 0.0 ? std::log(nu.weight(j)) + (pot.g[j] - (theta - nu.atom(j)).squaredNorm()) / eps
                              : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, e[j]);
  }
  const Vector s = exp_of((e.array() - mx).matrix());
  const Point bary = nu.atoms() * s / s.sum();
  return 2.0 * (Point(theta) - bary);
}

/// grad f at source atom i.
[[nodiscard]] inline Point potential_gradient(const DualPotentials& pot, const ParticleMeasure& mu,
                                              const ParticleMeasure& nu, const SinkhornConfig& cfg, Eigen::Index i) {
  if (i < 0 || i >= mu.size()) {
    throw InvalidArgument("potential_gradient: atom index out of range");
  }
  return potential_gradient_at(pot, nu, cfg, mu.atom(i));
}

inline constexpr std::size_t kDefaultExactSupportCap = 2000;

/// Exact W2 between two discrete measures (square root of the optimal
/// squared-Euclidean transport cost). Zero-weight atoms are dropped first.
[[nodiscard]] inline double exact_w2(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                     std::size_t support_cap = kDefaultExactSupportCap) {
  if (mu.dim() != nu.dim()) {
    throw DimensionError("exact_w2: measures live in different dimensions");
  }
  if (static_cast<std::size_t>(mu.size() + nu.size()) > support_cap) {
    throw SupportCapError("exact_w2: combined support " + std::to_string(mu.size() + nu.size()) +
                          " exceeds cap " + std::to_string(support_cap) + "; subsample the inputs");
  }
  auto compact = [](const ParticleMeasure& m) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (m.weight(i) > 0.0) keep.push_back(i);
    }
    Matrix a(m.dim(), static_cast<Eigen::Index>(keep.size()));
    Vector w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      a.col(static_cast<Eigen::Index>(k)) = m.atom(keep[k]);
      w[static_cast<Eigen::Index>(k)] = m.weight(keep[k]);
    }
    return ParticleMeasure(std::move(a), std::move(w));
  };
  const ParticleMeasure a = compact(mu);
  const ParticleMeasure b = compact(nu);
  const Matrix c = cost_matrix(a, b);
  // Make total supply and demand agree to the last bit.
  Vector demand = b.weights() * (a.weights().sum() / b.weights().sum());
  detail::TransportSimplex solver(c, a.weights(), demand);
  const auto sol = solver.solve();
  return std::sqrt(std::max(0.0, sol.cost));
}

}  // namespace nsflows
