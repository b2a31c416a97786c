#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "byzgd/problem.hpp"

namespace testing {

using byzgd::ModelVector;

// Small hand-rolled generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  ModelVector gaussian(int d, double scale = 1.0) {
    ModelVector v(d);
    for (int i = 0; i < d; ++i) v[i] = scale * normal();
    return v;
  }

  ModelVector unit(int d) { return gaussian(d).normalized(); }

  // Uniform in the ball of radius r.
  ModelVector in_ball(int d, double r) {
    return unit(d) * r * std::pow(uniform(0.0, 1.0), 1.0 / d);
  }

  std::vector<ModelVector> cloud(std::size_t n, int d, double scale = 1.0) {
    std::vector<ModelVector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(gaussian(d, scale));
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline Eigen::MatrixXd design(const std::vector<byzgd::Sample>& samples) {
  Eigen::MatrixXd W(static_cast<Eigen::Index>(samples.size()), samples.front().covariate.size());
  for (std::size_t i = 0; i < samples.size(); ++i) W.row(static_cast<Eigen::Index>(i)) = samples[i].covariate;
  return W;
}

inline Eigen::VectorXd responses(const std::vector<byzgd::Sample>& samples) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Eigen::Index>(i)] = samples[i].response;
  return y;
}

// Least squares by the normal equations.
inline ModelVector ols(const std::vector<byzgd::Sample>& samples) {
  const Eigen::MatrixXd W = design(samples);
  return (W.transpose() * W).ldlt().solve(W.transpose() * responses(samples));
}

// Exact 1-D median objective: the minimum of sum |x - z_i| is attained at a data point.
inline double median_objective_1d(const std::vector<double>& z) {
  double best = INFINITY;
  for (double c : z) {
    double s = 0.0;
    for (double x : z) s += std::abs(x - c);
    best = std::min(best, s);
  }
  return best;
}

inline double rel_diff(const ModelVector& a, const ModelVector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
