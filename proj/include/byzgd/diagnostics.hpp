#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "byzgd/engine.hpp"
#include "byzgd/problem.hpp"

namespace byzgd {

/// D(p' || p) = p' log(p'/p) + (1 - p') log((1 - p')/(1 - p)), natural log.
/// Both arguments must lie strictly inside (0, 1).
double binary_divergence(double delta_prime, double delta);

/// sqrt(2) sigma1 sqrt((d log 6 + log(3/delta)) / n): concentration radius of
/// the sample-mean gradient at theta*.
double deviation_at_optimum(double n, int d, double delta, double sigma1);

/// Same form with sigma2: concentration radius of the gradient increment.
double deviation_of_increment(double n, int d, double delta, double sigma2);

/// (1/n) (sqrt(n) + sqrt(d) + sqrt(2 log(4/delta)))^2: high-probability bound
/// on the spectral norm of the empirical Hessian for Gaussian covariates.
double empirical_hessian_bound(double n, int d, double delta);

/// Uniform deviation radius over the parameter ball (depends on M v M', r).
double uniform_deviation(double n, const ProblemSpec& spec, double delta, double m_prime);

/// 1 - sqrt(1 - L^2/(4 M^2)) - xi2 L / (2 M^2).
double contraction_margin(double L, double M, double xi2);

struct TheoryConstants {
  double alpha = 0.0;
  double delta = 0.0;
  double batch_samples = 0.0;  // n = N / k
  double eta = 0.0;
  double C_alpha = 0.0;
  double Delta1 = 0.0;
  double Delta1_prime = 0.0;
  double Delta2 = 0.0;
  double M_prime = 0.0;
  double xi1 = 0.0;  // 4 C_alpha Delta1
  double xi2 = 0.0;  // 8 C_alpha Delta2
  double rho = 0.0;
  double floor = 0.0;  // eta xi1 / rho, +inf when rho <= 0
  double good_event_prob_lower = 0.0;
  bool rho_positive = false;
  bool delta1_small = false;  // Delta1 <= sigma1^2 / alpha1
  bool delta2_small = false;  // Delta2 <= sigma2^2 / alpha2
};

/// Evaluates the convergence constants for batches of n = N/k samples.
/// Requires q/k < alpha < 1/2 and 0 < delta <= alpha - q/k. The step size is
/// taken from config.eta.
TheoryConstants compute_constants(const ProblemSpec& spec, const RunConfig& config, double alpha, double delta);

/// Z(theta) = mean gradient over the batch's samples - grad F(theta).
ModelVector batch_deviation(const ProblemSpec& spec, std::span<const DataShard> batch, const ModelVector& theta,
                            const ModelVector& theta_star);

/// theta*, theta0 and `random_points` uniform draws from the ball of radius
/// `radius` around theta*.
std::vector<ModelVector> make_theta_grid(const ModelVector& theta_star, const ModelVector& theta0, double radius,
                                         std::size_t random_points, std::uint64_t seed);

/// For each of the k contiguous batches of `shards`, whether
/// C_alpha ||Z(theta)|| <= xi2 ||theta - theta*|| + xi1 at every grid point.
std::vector<bool> good_batches(const ProblemSpec& spec, std::span<const DataShard> shards, std::size_t k,
                               const ModelVector& theta_star, const TheoryConstants& constants,
                               std::span<const ModelVector> grid);

struct GoodEventEstimate {
  double frequency = 0.0;
  double required_batches = 0.0;                 // k (1 - alpha) + q
  std::vector<std::size_t> satisfied_batches;    // one entry per resample
};

/// Produces a fresh dataset of N samples from a seed.
using DatasetGenerator = std::function<std::vector<Sample>(std::uint64_t seed)>;

/// Fraction of seeded data resamples in which at least k (1 - alpha) + q
/// batches satisfy the deviation bound over the whole grid.
GoodEventEstimate estimate_good_event(const ProblemSpec& spec, const RunConfig& config,
                                      const ModelVector& theta_star, const TheoryConstants& constants,
                                      std::span<const ModelVector> grid, std::size_t resamples, std::uint64_t seed,
                                      const DatasetGenerator& generate);

struct MgfCheck {
  double lambda = 0.0;
  double empirical = 0.0;  // sample mean of exp(lambda * X)
  double bound = 0.0;      // exp(sigma^2 lambda^2 / 2)
  double slack = 1.05;
  bool passed = false;
};

/// Empirical MGF of <grad f(X, theta*), v> over n linear-regression samples.
MgfCheck check_gradient_mgf(const ProblemSpec& spec, const ModelVector& theta_star, const ModelVector& v,
                            double lambda, std::size_t n, std::uint64_t seed);

/// Empirical MGF of <h(X, theta) - E h(X, theta), v> / ||theta - theta*||, where
/// h(x, theta) = grad f(x, theta) - grad f(x, theta*).
MgfCheck check_increment_mgf(const ProblemSpec& spec, const ModelVector& theta, const ModelVector& theta_star,
                             const ModelVector& v, double lambda, std::size_t n, std::uint64_t seed);

struct SpectralCheck {
  double bound = 0.0;              // empirical_hessian_bound(n, d, delta)
  std::vector<double> norms;       // ||(1/n) W^T W|| per trial
  double frequency = 0.0;          // fraction of trials within the bound
  bool passed = false;             // frequency >= required_frequency
};

SpectralCheck check_hessian_bound(int d, std::size_t n, double delta, std::size_t trials, std::uint64_t seed,
                                  double required_frequency = 0.95);

}  // namespace byzgd
