#pragma once

// Observation streams: step-function time interpolation and Bayesian
// bootstrap streams.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nsflows/core.hpp"

namespace nsflows {

/// x_t := x_n for n - 1 <= t < n (observations numbered from 1), i.e. column
/// floor(t) of `data`.
[[nodiscard]] inline Point step_interpolate(const Matrix& data, double t) {
  if (!(t >= 0.0) || !(t < static_cast<double>(data.cols()))) {
    throw InvalidArgument("step_interpolate: t = " + std::to_string(t) + " outside [0, " +
                          std::to_string(data.cols()) + ")");
  }
  return data.col(static_cast<Eigen::Index>(std::floor(t)));
}

/// Dirichlet(1, ..., 1) weights over n indices.
[[nodiscard]] inline Vector dirichlet_uniform(Eigen::Index n, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = expo(rng);
  w /= w.sum();
  return w;
}

struct BootstrapStream {
  Vector dirichlet;
  std::vector<Eigen::Index> indices;
  Matrix points;
};

/// Bayesian bootstrap: one Dirichlet(1,...,1) draw pi over the data indices,
/// then `total_steps` i.i.d. index draws from pi. A longer stream built from
/// the same generator state extends a shorter one.
[[nodiscard]] inline BootstrapStream bayesian_bootstrap_stream(const Matrix& data, std::size_t total_steps, Rng& rng) {
  if (data.cols() == 0) {
    throw InvalidArgument("bayesian_bootstrap_stream: empty data");
  }
  BootstrapStream out;
  out.dirichlet = dirichlet_uniform(data.cols(), rng);
  std::discrete_distribution<Eigen::Index> pick(out.dirichlet.data(), out.dirichlet.data() + out.dirichlet.size());
  out.indices.resize(total_steps);
  out.points.resize(data.rows(), static_cast<Eigen::Index>(total_steps));
  for (std::size_t s = 0; s < total_steps; ++s) {
    out.indices[s] = pick(rng);
    out.points.col(static_cast<Eigen::Index>(s)) = data.col(out.indices[s]);
  }
  return out;
}

enum class StreamArm { raw, truncated, continuation };

[[nodiscard]] inline std::string to_string(StreamArm a) {
  switch (a) {
    case StreamArm::raw:
      return "raw";
    case StreamArm::truncated:
      return "truncated";
    case StreamArm::continuation:
      return "continuation";
  }
  return "?";
}

/// ceil(1.5 n) without floating-point surprises.
[[nodiscard]] constexpr std::size_t continuation_length(std::size_t n) noexcept { return (3 * n + 1) / 2; }

struct StreamSpec {
  Matrix data;
  StreamArm arm = StreamArm::raw;
  /// Zero means "derive from the arm": n for raw/truncated, ceil(1.5 n) for
  /// continuation.
  std::size_t total_steps = 0;
  std::uint64_t seed = 0;

  void validate() const {
    const auto n = static_cast<std::size_t>(data.cols());
    if (n == 0) throw InvalidArgument("StreamSpec: empty data");
    if (total_steps == 0) return;
    if ((arm == StreamArm::truncated || arm == StreamArm::raw) && total_steps != n) {
      throw InvalidArgument("StreamSpec: truncated and raw streams have exactly n steps");
    }
    if (arm == StreamArm::continuation && total_steps < n) {
      throw InvalidArgument("StreamSpec: continuation stream shorter than the data");
    }
  }

  [[nodiscard]] std::size_t steps() const {
    const auto n = static_cast<std::size_t>(data.cols());
    if (total_steps != 0) return total_steps;
    return arm == StreamArm::continuation ? continuation_length(n) : n;
  }
};

/// raw passes data through; truncated/continuation build a bootstrap stream.
/// With the same seed the continuation stream starts with the truncated one.
[[nodiscard]] inline Matrix make_stream(const StreamSpec& spec) {
  spec.validate();
  if (spec.arm == StreamArm::raw) return spec.data;
  Rng rng(spec.seed);
  return bayesian_bootstrap_stream(spec.data, spec.steps(), rng).points;
}

}  // namespace nsflows
