#include "byzgd/problem.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "byzgd/errors.hpp"
#include "byzgd/rng.hpp"

namespace byzgd {

void require_finite(const ModelVector& v, std::string_view what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(fmt::format("{} has non-finite entries", what));
  }
}

void require_dimension(const ModelVector& v, Eigen::Index d, std::string_view what) {
  if (v.size() != d) {
    throw std::invalid_argument(fmt::format("{} has dimension {}, expected {}", what, v.size(), d));
  }
}

ModelVector LossModel::population_gradient(const ModelVector&, const ModelVector&) const {
  throw UnsupportedOperation(fmt::format("loss model '{}' has no closed-form population gradient", name()));
}

double LinearRegressionLoss::loss(const Sample& x, const ModelVector& theta) const {
  const double residual = x.covariate.dot(theta) - x.response;
  return 0.5 * residual * residual;
}

ModelVector LinearRegressionLoss::sample_gradient(const Sample& x, const ModelVector& theta) const {
  return (x.covariate.dot(theta) - x.response) * x.covariate;
}

void LinearRegressionLoss::accumulate_gradient(const Sample& x, const ModelVector& theta,
                                               ModelVector& out) const {
  out.noalias() += (x.covariate.dot(theta) - x.response) * x.covariate;
}

ModelVector LinearRegressionLoss::population_gradient(const ModelVector& theta,
                                                      const ModelVector& theta_star) const {
  return theta - theta_star;
}

void ProblemSpec::validate() const {
  if (d < 1) throw std::invalid_argument("problem.d must be >= 1");
  if (!(L > 0.0) || !(M > 0.0) || L > M) throw std::invalid_argument("problem requires 0 < L <= M");
  for (double p : {sigma1, alpha1, sigma2, alpha2, r}) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("problem sub-exponential parameters and r must be positive");
    }
  }
  if (!loss) throw std::invalid_argument("problem has no loss model");
}

ProblemSpec linear_regression_problem(int d, double r) {
  ProblemSpec spec;
  spec.d = d;
  spec.L = 1.0;
  spec.M = 1.0;
  spec.sigma1 = std::sqrt(2.0);
  spec.alpha1 = std::sqrt(2.0);
  spec.sigma2 = std::sqrt(8.0);
  spec.alpha2 = 8.0;
  spec.r = r;
  spec.loss = std::make_shared<LinearRegressionLoss>();
  spec.validate();
  return spec;
}

std::vector<Sample> generate_linear_regression(const ModelVector& theta_star, std::size_t n,
                                               std::uint64_t seed, double noise_scale) {
  if (n == 0) throw std::invalid_argument("generate_linear_regression: n must be >= 1");
  if (theta_star.size() == 0) throw std::invalid_argument("generate_linear_regression: empty theta_star");
  require_finite(theta_star, "theta_star");

  Rng covariate_rng = make_rng(seed, "covariate");
  Rng noise_rng = make_rng(seed, "noise");
  std::normal_distribution<double> covariate_dist(0.0, 1.0);
  std::normal_distribution<double> noise_dist(0.0, 1.0);

  const Eigen::Index d = theta_star.size();
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.covariate.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) s.covariate[j] = covariate_dist(covariate_rng);
    const double zeta = noise_dist(noise_rng);
    s.response = s.covariate.dot(theta_star) + noise_scale * zeta;
    samples.push_back(std::move(s));
  }
  return samples;
}

ModelVector sample_gradient(const ProblemSpec& spec, const Sample& x, const ModelVector& theta) {
  require_dimension(x.covariate, theta.size(), "sample covariate");
  return spec.loss->sample_gradient(x, theta);
}

ModelVector local_empirical_gradient(const ProblemSpec& spec, const DataShard& shard,
                                     const ModelVector& theta) {
  if (shard.samples.empty()) {
    throw std::invalid_argument(fmt::format("shard of worker {} is empty", shard.worker_id));
  }
  ModelVector sum = ModelVector::Zero(theta.size());
  for (const Sample& x : shard.samples) {
    require_dimension(x.covariate, theta.size(), "sample covariate");
    spec.loss->accumulate_gradient(x, theta, sum);
  }
  return sum / static_cast<double>(shard.samples.size());
}

ModelVector population_gradient(const ProblemSpec& spec, const ModelVector& theta,
                                const ModelVector& theta_star) {
  require_dimension(theta_star, theta.size(), "theta_star");
  return spec.loss->population_gradient(theta, theta_star);
}

std::vector<DataShard> shard_dataset(std::vector<Sample> samples, std::size_t m) {
  if (m == 0) throw std::invalid_argument("shard_dataset: m must be >= 1");
  if (samples.size() % m != 0) {
    throw std::invalid_argument(
        fmt::format("shard_dataset: N = {} is not divisible by m = {}", samples.size(), m));
  }
  const std::size_t per = samples.size() / m;
  std::vector<DataShard> shards(m);
  for (std::size_t j = 0; j < m; ++j) {
    shards[j].worker_id = j;
    shards[j].samples.reserve(per);
    for (std::size_t i = j * per; i < (j + 1) * per; ++i) {
      shards[j].samples.push_back(std::move(samples[i]));
    }
  }
  return shards;
}

void write_dataset_csv(std::ostream& os, std::span<const Sample> samples) {
  fmt::memory_buffer buf;
  for (const Sample& s : samples) {
    buf.clear();
    for (Eigen::Index j = 0; j < s.covariate.size(); ++j) {
      fmt::format_to(std::back_inserter(buf), "{},", s.covariate[j]);
    }
    fmt::format_to(std::back_inserter(buf), "{}\n", s.response);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

namespace {

double parse_double(std::string_view field, std::size_t line_no) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::invalid_argument(fmt::format("line {}: cannot parse '{}' as a number", line_no, field));
  }
  return value;
}

}  // namespace

std::vector<Sample> read_dataset_csv(std::istream& is) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index width = -1;
  std::vector<double> fields;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    fields.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(parse_double(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const auto cols = static_cast<Eigen::Index>(fields.size());
    if (cols < 2) throw std::invalid_argument(fmt::format("line {}: need at least 2 columns", line_no));
    if (width >= 0 && cols != width) {
      throw std::invalid_argument(fmt::format("line {}: expected {} columns, got {}", line_no, width, cols));
    }
    width = cols;
    Sample s;
    s.covariate = Eigen::Map<const ModelVector>(fields.data(), cols - 1);
    s.response = fields.back();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace byzgd
