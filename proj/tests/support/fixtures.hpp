#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "vard/datakit.hpp"
#include "vard/simbench.hpp"
#include "vard/solver.hpp"

namespace vard::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random univariate block: alpha, eta and v log-uniform over six decades.
struct RandomBlock {
  double alpha = 1.0;
  std::vector<double> eta;
  std::vector<double> v;
};

inline RandomBlock random_block(std::mt19937_64& rng, int max_dim = 8) {
  RandomBlock b;
  const int d = uniform_int(rng, 1, max_dim);
  b.alpha = log_uniform(rng, 1e-3, 1e3);
  for (int k = 0; k < d; ++k) {
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    b.eta.push_back(sign * log_uniform(rng, 1e-3, 1e3));
    b.v.push_back(log_uniform(rng, 1e-3, 1e3));
  }
  return b;
}

/// Additive data with a random subset of active features, run through the full design pipeline.
inline datakit::Design random_design(std::mt19937_64& rng, std::size_t n, std::size_t p, int knots = 8) {
  simbench::SyntheticSpec spec;
  spec.n = n;
  spec.p = p;
  spec.sigma2 = 1.0;
  spec.seed = rng();
  spec.knot_count = knots;
  for (std::size_t j = 1; j <= p; ++j) {
    if (uniform(rng, 0.0, 1.0) < 0.6) {
      spec.assignments[j] = {uniform_int(rng, 1, 4), uniform(rng, 0.2, 1.5)};
    }
  }
  const auto data = simbench::generate(spec);
  return datakit::build_design(simbench::to_dataset(data, knots));
}

struct RandomFeature {
  std::vector<double> x;
  int knots = 10;
};

/// Column drawn from one of several shapes (uniform, normal, skewed, tied integers).
inline RandomFeature random_feature(std::mt19937_64& rng) {
  RandomFeature f;
  const auto n = static_cast<std::size_t>(uniform_int(rng, 40, 300));
  f.knots = uniform_int(rng, 4, 15);
  const int shape = uniform_int(rng, 0, 3);
  std::normal_distribution<double> normal;
  f.x.resize(n);
  for (auto& v : f.x) {
    switch (shape) {
      case 0: v = uniform(rng, -2.0, 5.0); break;
      case 1: v = 3.0 + 10.0 * normal(rng); break;
      case 2: v = std::exp(1.5 * normal(rng)); break;
      default: v = static_cast<double>(uniform_int(rng, 0, 30)); break;
    }
  }
  return f;
}

// Second derivative of natural-spline column k from the truncated-power definition.
inline double reference_second_derivative(const std::vector<double>& knots, int k, double x) {
  const double lo = knots.front(), span = knots.back() - knots.front();
  const double t = (x - lo) / span;
  auto u = [&](std::size_t i) { return (knots[i] - lo) / span; };
  const std::size_t K = knots.size();
  auto d2 = [&](std::size_t i) {
    return 6.0 * (std::max(0.0, t - u(i)) - std::max(0.0, t - 1.0)) / (1.0 - u(i));
  };
  return (d2(static_cast<std::size_t>(k)) - d2(K - 2)) / (span * span);
}

// Roughness penalty by 5-point Gauss-Legendre on every knot interval; exact for
// the piecewise quadratic integrand up to rounding.
inline Eigen::MatrixXd reference_penalty(const std::vector<double>& knots) {
  static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                  0.9061798459386640};
  static const double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
  const int d = static_cast<int>(knots.size()) - 2;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd h(d);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double mid = 0.5 * (knots[i] + knots[i + 1]);
    const double half = 0.5 * (knots[i + 1] - knots[i]);
    for (int q = 0; q < 5; ++q) {
      const double x = mid + half * nodes[q];
      for (int k = 0; k < d; ++k) h(k) = reference_second_derivative(knots, k, x);
      S += half * weights[q] * h * h.transpose();
    }
  }
  return S;
}

}  // namespace vard::testing
