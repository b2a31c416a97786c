#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "byzgd/problem.hpp"

namespace byzgd {

struct AggregatorConfig {
  std::size_t k = 1;                   // number of batches
  double gamma = 1e-6;                 // accepted (1 + gamma) slack on the median objective
  std::optional<double> tau;           // trim batch means with norm > tau; absent = no trimming
  std::size_t max_iterations = 200;
  double tolerance = 1e-10;            // relative step size at which the solver stops

  /// Checks everything except the relation between k and m.
  void validate() const;
};

struct MedianResult {
  ModelVector point;
  double objective = 0.0;              // sum_i ||point - z_i||
  std::size_t iterations_used = 0;
  double certified_ratio = 1.0;        // objective / (proven lower bound on the optimum)
  std::vector<double> objective_trace; // objective of every solver iterate, in order

  bool certified(double gamma) const { return certified_ratio <= 1.0 + gamma; }
};

/// sum_i ||y - z_i||.
double median_objective(std::span<const ModelVector> points, const ModelVector& y);

/// Approximate geometric median by iteratively reweighted averaging started at
/// the coordinate-wise median. Data points are tested for optimality first
/// via their minimum-norm subgradient, so medians that sit on a data point are
/// returned exactly. The certified ratio uses the convexity lower bound
/// f(x) - ||grad f(x)|| * max_i ||x - z_i||, valid because some minimizer lies
/// in the convex hull of the points.
MedianResult geometric_median(std::span<const ModelVector> points, const AggregatorConfig& cfg);

/// Points with ||z|| <= tau, order preserved. std::nullopt when every point
/// was trimmed.
std::optional<std::vector<ModelVector>> trim_by_norm(std::span<const ModelVector> points, double tau);

/// Arithmetic mean, summed in index order.
ModelVector mean_of(std::span<const ModelVector> points);

/// Means of the k contiguous batches {l*b, ..., (l+1)*b - 1}, b = m / k.
std::vector<ModelVector> batch_means(std::span<const ModelVector> gradients, std::size_t k);

/// Geometric median of the (optionally trimmed) batch means. k = 1 returns the
/// plain average. If trimming removes every batch mean, the untrimmed means
/// are used and a warning is logged.
ModelVector median_of_means(std::span<const ModelVector> gradients, const AggregatorConfig& cfg);

/// 2(1 - alpha) / (1 - 2 alpha).
double c_alpha(double alpha);

/// Robustness bound for a (1 + gamma)-approximate median: true iff
/// ||result.point|| <= C_alpha r + gamma max_i ||z_i|| / (1 - 2 alpha).
/// Throws std::invalid_argument unless at least (1 - alpha) n points have
/// norm <= r and 0 < alpha < 1/2.
bool check_robustness_bound(std::span<const ModelVector> points, double alpha, double r,
                            const MedianResult& result, double gamma);

}  // namespace byzgd
