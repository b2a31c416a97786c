#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace byzgd {

/// A point in parameter space (model coordinates, or a gradient of the same shape).
using ModelVector = Eigen::VectorXd;

struct Sample {
  ModelVector covariate;
  double response = 0.0;
};

/// The samples held by one worker. Shards are disjoint and equally sized.
struct DataShard {
  std::size_t worker_id = 0;
  std::vector<Sample> samples;
};

/// Per-sample loss f(x, theta). Linear regression is the only shipped model;
/// the population gradient is optional and only needed by diagnostics.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::string_view name() const = 0;
  virtual double loss(const Sample& x, const ModelVector& theta) const = 0;
  virtual ModelVector sample_gradient(const Sample& x, const ModelVector& theta) const = 0;

  /// out += gradient of f(x, .) at theta. Override when the gradient can be
  /// accumulated without a temporary.
  virtual void accumulate_gradient(const Sample& x, const ModelVector& theta, ModelVector& out) const {
    out += sample_gradient(x, theta);
  }

  virtual bool has_population_gradient() const { return false; }
  virtual ModelVector population_gradient(const ModelVector& theta, const ModelVector& theta_star) const;
};

/// f((w, y), theta) = 1/2 (<w, theta> - y)^2 with w ~ N(0, I), y = <w, theta*> + N(0, 1).
class LinearRegressionLoss final : public LossModel {
 public:
  std::string_view name() const override { return "linear_regression"; }
  double loss(const Sample& x, const ModelVector& theta) const override;
  ModelVector sample_gradient(const Sample& x, const ModelVector& theta) const override;
  void accumulate_gradient(const Sample& x, const ModelVector& theta, ModelVector& out) const override;
  bool has_population_gradient() const override { return true; }
  /// grad F(theta) = theta - theta*.
  ModelVector population_gradient(const ModelVector& theta, const ModelVector& theta_star) const override;
};

/// Loss model plus the regularity constants used by the theory calculators.
struct ProblemSpec {
  int d = 0;
  double L = 1.0;       // strong convexity of the population risk
  double M = 1.0;       // Lipschitz constant of the population gradient
  double sigma1 = 1.0;  // sub-exponential scale of <grad f(X, theta*), v>
  double alpha1 = 1.0;
  double sigma2 = 1.0;  // sub-exponential scale of the normalized gradient increment
  double alpha2 = 1.0;
  double r = 1.0;       // parameter domain is the ball ||theta - theta*|| <= r sqrt(d)
  std::shared_ptr<const LossModel> loss;

  void validate() const;
};

/// Linear regression with L = M = 1, sigma1 = alpha1 = sqrt(2), sigma2 = sqrt(8), alpha2 = 8.
ProblemSpec linear_regression_problem(int d, double r = 1.0);

/// Draws n samples y = <w, theta*> + zeta. Covariates and noise come from two
/// independent streams derived from `seed`. `noise_scale` multiplies zeta
/// (1 for the standard model; 0 gives noiseless responses).
std::vector<Sample> generate_linear_regression(const ModelVector& theta_star, std::size_t n,
                                               std::uint64_t seed, double noise_scale = 1.0);

ModelVector sample_gradient(const ProblemSpec& spec, const Sample& x, const ModelVector& theta);

/// Mean of the sample gradients over the shard.
ModelVector local_empirical_gradient(const ProblemSpec& spec, const DataShard& shard,
                                     const ModelVector& theta);

/// Closed-form population gradient; throws UnsupportedOperation when the
/// loss model has none.
ModelVector population_gradient(const ProblemSpec& spec, const ModelVector& theta,
                                const ModelVector& theta_star);

/// Splits samples into m contiguous shards of size n/m. Requires m | n.
std::vector<DataShard> shard_dataset(std::vector<Sample> samples, std::size_t m);

/// Headerless CSV: d covariate columns then the response, shortest
/// round-trip decimal representation.
void write_dataset_csv(std::ostream& os, std::span<const Sample> samples);
std::vector<Sample> read_dataset_csv(std::istream& is);

void require_finite(const ModelVector& v, std::string_view what);
void require_dimension(const ModelVector& v, Eigen::Index d, std::string_view what);

}  // namespace byzgd
