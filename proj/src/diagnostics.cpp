#include "byzgd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "byzgd/errors.hpp"
#include "byzgd/rng.hpp"
#include "byzgd/robust_aggregation.hpp"

namespace byzgd {

double binary_divergence(double delta_prime, double delta) {
  const auto inside = [](double p) { return p > 0.0 && p < 1.0; };
  if (!inside(delta_prime) || !inside(delta)) {
    throw std::invalid_argument(
        fmt::format("binary_divergence: arguments must lie in (0, 1), got ({}, {})", delta_prime, delta));
  }
  return delta_prime * std::log(delta_prime / delta) +
         (1.0 - delta_prime) * std::log((1.0 - delta_prime) / (1.0 - delta));
}

namespace {

void require_positive(double x, std::string_view what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(fmt::format("{} must be positive", what));
}

double net_radius(double n, int d, double delta, double sigma) {
  require_positive(n, "n");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  require_positive(sigma, "sigma");
  return std::sqrt(2.0) * sigma * std::sqrt((d * std::log(6.0) + std::log(3.0 / delta)) / n);
}

}  // namespace

double deviation_at_optimum(double n, int d, double delta, double sigma1) { return net_radius(n, d, delta, sigma1); }

double deviation_of_increment(double n, int d, double delta, double sigma2) {
  return net_radius(n, d, delta, sigma2);
}

double empirical_hessian_bound(double n, int d, double delta) {
  require_positive(n, "n");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double root = std::sqrt(n) + std::sqrt(static_cast<double>(d)) + std::sqrt(2.0 * std::log(4.0 / delta));
  return root * root / n;
}

double uniform_deviation(double n, const ProblemSpec& spec, double delta, double m_prime) {
  require_positive(n, "n");
  const double d = spec.d;
  const double lipschitz = std::max(spec.M, m_prime);
  const double radicand = d * std::log(18.0 * lipschitz / spec.sigma2) + 0.5 * d * std::log(n / d) +
                          std::log(6.0 * spec.sigma2 * spec.sigma2 * spec.r * std::sqrt(n) /
                                   (spec.alpha2 * spec.sigma1 * delta));
  if (!(radicand >= 0.0)) {
    throw std::invalid_argument(fmt::format("uniform_deviation: negative radicand {} at n = {}", radicand, n));
  }
  return spec.sigma2 * std::sqrt(2.0 / n) * std::sqrt(radicand);
}

double contraction_margin(double L, double M, double xi2) {
  return 1.0 - std::sqrt(1.0 - L * L / (4.0 * M * M)) - xi2 * L / (2.0 * M * M);
}

TheoryConstants compute_constants(const ProblemSpec& spec, const RunConfig& config, double alpha, double delta) {
  spec.validate();
  if (config.k < 1 || config.N < config.k) throw std::invalid_argument("compute_constants: need 1 <= k <= N");
  const double q_frac = static_cast<double>(config.q) / static_cast<double>(config.k);
  if (!(alpha > q_frac && alpha < 0.5)) {
    throw std::invalid_argument(fmt::format("compute_constants: alpha = {} must lie in (q/k, 1/2) = ({}, 0.5)",
                                            alpha, q_frac));
  }
  if (!(delta > 0.0 && delta <= alpha - q_frac + 1e-15)) {
    throw std::invalid_argument(
        fmt::format("compute_constants: delta = {} must lie in (0, alpha - q/k = {}]", delta, alpha - q_frac));
  }

  TheoryConstants c;
  c.alpha = alpha;
  c.delta = delta;
  c.batch_samples = static_cast<double>(config.N) / static_cast<double>(config.k);
  c.eta = config.eta;
  c.C_alpha = c_alpha(alpha);
  c.Delta1 = deviation_at_optimum(c.batch_samples, spec.d, delta, spec.sigma1);
  c.Delta1_prime = deviation_of_increment(c.batch_samples, spec.d, delta, spec.sigma2);
  c.M_prime = empirical_hessian_bound(c.batch_samples, spec.d, delta);
  c.Delta2 = uniform_deviation(c.batch_samples, spec, delta, c.M_prime);
  c.xi1 = 4.0 * c.C_alpha * c.Delta1;
  c.xi2 = 8.0 * c.C_alpha * c.Delta2;
  c.rho = contraction_margin(spec.L, spec.M, c.xi2);
  c.rho_positive = c.rho > 0.0;
  c.floor = c.rho_positive ? c.eta * c.xi1 / c.rho : std::numeric_limits<double>::infinity();
  const double bad_fraction = alpha - q_frac;
  c.good_event_prob_lower =
      delta < bad_fraction ? 1.0 - std::exp(-static_cast<double>(config.k) * binary_divergence(bad_fraction, delta))
                           : 0.0;
  c.delta1_small = c.Delta1 <= spec.sigma1 * spec.sigma1 / spec.alpha1;
  c.delta2_small = c.Delta2 <= spec.sigma2 * spec.sigma2 / spec.alpha2;
  return c;
}

ModelVector batch_deviation(const ProblemSpec& spec, std::span<const DataShard> batch, const ModelVector& theta,
                            const ModelVector& theta_star) {
  if (!spec.loss->has_population_gradient()) {
    throw UnsupportedOperation("batch_deviation requires a closed-form population gradient");
  }
  ModelVector sum = ModelVector::Zero(theta.size());
  std::size_t count = 0;
  for (const auto& shard : batch) {
    for (const auto& x : shard.samples) {
      spec.loss->accumulate_gradient(x, theta, sum);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("batch_deviation: empty batch");
  return sum / static_cast<double>(count) - population_gradient(spec, theta, theta_star);
}

std::vector<ModelVector> make_theta_grid(const ModelVector& theta_star, const ModelVector& theta0, double radius,
                                         std::size_t random_points, std::uint64_t seed) {
  require_dimension(theta0, theta_star.size(), "theta0");
  std::vector<ModelVector> grid{theta_star, theta0};
  Rng rng = make_rng(seed, "theta_grid");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto d = static_cast<double>(theta_star.size());
  for (std::size_t i = 0; i < random_points; ++i) {
    ModelVector direction(theta_star.size());
    for (Eigen::Index j = 0; j < direction.size(); ++j) direction[j] = normal(rng);
    const double length = radius * std::pow(uniform(rng), 1.0 / d);
    grid.push_back(theta_star + (length / direction.norm()) * direction);
  }
  return grid;
}

std::vector<bool> good_batches(const ProblemSpec& spec, std::span<const DataShard> shards, std::size_t k,
                               const ModelVector& theta_star, const TheoryConstants& constants,
                               std::span<const ModelVector> grid) {
  if (k == 0 || shards.size() % k != 0) throw std::invalid_argument("good_batches: k must divide the shard count");
  if (grid.empty()) throw std::invalid_argument("good_batches: empty theta grid");
  const std::size_t b = shards.size() / k;
  std::vector<bool> good(k, true);
  for (std::size_t l = 0; l < k; ++l) {
    const auto batch = shards.subspan(l * b, b);
    for (const auto& theta : grid) {
      const double lhs = constants.C_alpha * batch_deviation(spec, batch, theta, theta_star).norm();
      const double rhs = constants.xi2 * (theta - theta_star).norm() + constants.xi1;
      if (!(lhs <= rhs)) {
        good[l] = false;
        break;
      }
    }
  }
  return good;
}

GoodEventEstimate estimate_good_event(const ProblemSpec& spec, const RunConfig& config,
                                      const ModelVector& theta_star, const TheoryConstants& constants,
                                      std::span<const ModelVector> grid, std::size_t resamples, std::uint64_t seed,
                                      const DatasetGenerator& generate) {
  if (resamples == 0) throw std::invalid_argument("estimate_good_event: resamples must be >= 1");
  GoodEventEstimate out;
  out.required_batches = static_cast<double>(config.k) * (1.0 - constants.alpha) + static_cast<double>(config.q);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    std::vector<Sample> data = generate(derive_seed(seed, "good_event", r));
    if (data.size() != config.N) throw std::invalid_argument("estimate_good_event: generator returned wrong N");
    const auto shards = shard_dataset(std::move(data), config.m);
    const auto good = good_batches(spec, shards, config.k, theta_star, constants, grid);
    const auto satisfied = static_cast<std::size_t>(std::count(good.begin(), good.end(), true));
    out.satisfied_batches.push_back(satisfied);
    if (static_cast<double>(satisfied) >= out.required_batches) ++hits;
  }
  out.frequency = static_cast<double>(hits) / static_cast<double>(resamples);
  return out;
}

namespace {

constexpr std::size_t kMgfChunk = 100000;

// Averages exp(lambda * statistic(x)) over n generated samples, in chunks.
template <class Statistic>
double empirical_mgf(const ModelVector& theta_star, double lambda, std::size_t n, std::uint64_t seed,
                     Statistic statistic) {
  if (n == 0) throw std::invalid_argument("empirical MGF needs n >= 1");
  double total = 0.0;
  std::size_t chunk_id = 0;
  for (std::size_t done = 0; done < n; done += kMgfChunk, ++chunk_id) {
    const std::size_t size = std::min(kMgfChunk, n - done);
    const auto samples = generate_linear_regression(theta_star, size, derive_seed(seed, "mgf", chunk_id));
    for (const auto& x : samples) total += std::exp(lambda * statistic(x));
  }
  return total / static_cast<double>(n);
}

ModelVector unit(const ModelVector& v) {
  const double norm = v.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("direction vector must be nonzero");
  return v / norm;
}

}  // namespace

MgfCheck check_gradient_mgf(const ProblemSpec& spec, const ModelVector& theta_star, const ModelVector& v,
                            double lambda, std::size_t n, std::uint64_t seed) {
  require_dimension(v, theta_star.size(), "v");
  const ModelVector dir = unit(v);
  MgfCheck out;
  out.lambda = lambda;
  out.empirical = empirical_mgf(theta_star, lambda, n, seed, [&](const Sample& x) {
    return sample_gradient(spec, x, theta_star).dot(dir);
  });
  out.bound = std::exp(spec.sigma1 * spec.sigma1 * lambda * lambda / 2.0);
  out.passed = out.empirical <= out.slack * out.bound;
  return out;
}

MgfCheck check_increment_mgf(const ProblemSpec& spec, const ModelVector& theta, const ModelVector& theta_star,
                             const ModelVector& v, double lambda, std::size_t n, std::uint64_t seed) {
  require_dimension(v, theta_star.size(), "v");
  require_dimension(theta, theta_star.size(), "theta");
  const double distance = (theta - theta_star).norm();
  if (!(distance > 0.0)) throw std::invalid_argument("check_increment_mgf: theta must differ from theta*");
  const ModelVector dir = unit(v);
  const ModelVector mean_increment =
      population_gradient(spec, theta, theta_star) - population_gradient(spec, theta_star, theta_star);
  MgfCheck out;
  out.lambda = lambda;
  out.empirical = empirical_mgf(theta_star, lambda, n, seed, [&](const Sample& x) {
    const ModelVector h = sample_gradient(spec, x, theta) - sample_gradient(spec, x, theta_star);
    return (h - mean_increment).dot(dir) / distance;
  });
  out.bound = std::exp(spec.sigma2 * spec.sigma2 * lambda * lambda / 2.0);
  out.passed = out.empirical <= out.slack * out.bound;
  return out;
}

SpectralCheck check_hessian_bound(int d, std::size_t n, double delta, std::size_t trials, std::uint64_t seed,
                                  double required_frequency) {
  if (d < 1 || n == 0 || trials == 0) throw std::invalid_argument("check_hessian_bound: need d, n, trials >= 1");
  SpectralCheck out;
  out.bound = empirical_hessian_bound(static_cast<double>(n), d, delta);
  std::size_t within = 0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, "hessian", t);
    Eigen::MatrixXd w(d, static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
    }
    const Eigen::MatrixXd gram = (w * w.transpose()) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const double norm = solver.eigenvalues().maxCoeff();
    out.norms.push_back(norm);
    if (norm <= out.bound) ++within;
  }
  out.frequency = static_cast<double>(within) / static_cast<double>(trials);
  out.passed = out.frequency >= required_frequency;
  return out;
}

}  // namespace byzgd
