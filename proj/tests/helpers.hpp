#pragma once

#include <random>

#include "nsflows/nsflows.hpp"

namespace nsflows::testing {

inline ParticleMeasure random_measure(Eigen::Index n, Eigen::Index d, Rng& rng, double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, spread);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  Matrix a(d, n);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < d; ++r) a(r, i) = normal(rng);
    w[i] = unif(rng);
  }
  return {a, w};
}

inline ParticleMeasure line_measure(std::initializer_list<double> xs, std::initializer_list<double> ws) {
  Matrix a(1, static_cast<Eigen::Index>(xs.size()));
  Vector w(static_cast<Eigen::Index>(ws.size()));
  Eigen::Index i = 0;
  for (double x : xs) a(0, i++) = x;
  i = 0;
  for (double v : ws) w[i++] = v;
  return {a, w};
}

inline Point pt(double x) { return Point::Constant(1, x); }
inline Point pt(double x, double y) { return Point{{x, y}}; }

}  // namespace nsflows::testing
