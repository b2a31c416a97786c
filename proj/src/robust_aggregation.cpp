#include "byzgd/robust_aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace byzgd {

void AggregatorConfig::validate() const {
  if (k < 1) throw std::invalid_argument("aggregator.k must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("aggregator.gamma must be >= 0");
  if (tau && !(*tau > 0.0)) throw std::invalid_argument("aggregator.tau must be > 0 when set");
  if (max_iterations < 1) throw std::invalid_argument("aggregator.max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("aggregator.tolerance must be >= 0");
}

double median_objective(std::span<const ModelVector> points, const ModelVector& y) {
  double total = 0.0;
  for (const auto& z : points) total += (y - z).norm();
  return total;
}

namespace {

void check_points(std::span<const ModelVector> points, std::string_view who) {
  if (points.empty()) throw std::invalid_argument(fmt::format("{}: empty point set", who));
  const Eigen::Index d = points.front().size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) {
      throw std::invalid_argument(fmt::format("{}: point {} has dimension {}, expected {}", who, i,
                                              points[i].size(), d));
    }
    if (!points[i].allFinite()) {
      throw std::invalid_argument(fmt::format("{}: point {} has non-finite coordinates", who, i));
    }
  }
}

ModelVector coordinatewise_median(std::span<const ModelVector> points) {
  const Eigen::Index d = points.front().size();
  const std::size_t n = points.size();
  ModelVector out(d);
  std::vector<double> column(n);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < n; ++i) column[i] = points[i][c];
    const auto mid = column.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(column.begin(), mid, column.end());
    double value = *mid;
    if (n % 2 == 0) {
      const double below = *std::max_element(column.begin(), mid);
      value = 0.5 * (below + value);
    }
    out[c] = value;
  }
  return out;
}

// Subgradient data of f at a data point z_j: f is differentiable away from the
// duplicates of z_j, and the duplicates contribute a ball of radius
// `multiplicity`.
struct Anchor {
  double multiplicity = 0.0;
  ModelVector pull;        // sum over non-duplicates of (z_j - z_i) / ||z_j - z_i||
  double inverse_sum = 0.0;  // sum over non-duplicates of 1 / ||z_j - z_i||
  double objective = 0.0;
  double farthest = 0.0;
};

class Solver {
 public:
  Solver(std::span<const ModelVector> points, const AggregatorConfig& cfg) : points_(points), cfg_(cfg) {
    const std::size_t n = points_.size();
    double spread = 0.0;
    double max_norm = 0.0;
    for (const auto& z : points_) {
      spread = std::max(spread, (z - points_.front()).norm());
      max_norm = std::max(max_norm, z.norm());
    }
    spread_ = spread;
    coincide_ = 1e-12 * std::max(spread, max_norm);

    const Eigen::Index d = points_.front().size();
    anchors_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      Anchor& a = anchors_[j];
      a.pull = ModelVector::Zero(d);
      for (std::size_t i = 0; i < n; ++i) {
        const double dist = (points_[j] - points_[i]).norm();
        a.objective += dist;
        a.farthest = std::max(a.farthest, dist);
        if (dist <= coincide_) {
          a.multiplicity += 1.0;
        } else {
          a.pull += (points_[j] - points_[i]) / dist;
          a.inverse_sum += 1.0 / dist;
        }
      }
      const double min_subgradient = std::max(0.0, a.pull.norm() - a.multiplicity);
      consider(points_[j], a.objective, a.objective - min_subgradient * a.farthest);
    }
  }

  MedianResult solve() {
    MedianResult result;
    if (spread_ == 0.0) {
      result.point = points_.front();
      result.objective = 0.0;
      result.certified_ratio = 1.0;
      return result;
    }

    ModelVector x = coordinatewise_median(points_);
    evaluate(x, result.objective_trace);
    std::size_t it = 0;
    while (it < cfg_.max_iterations && !certified()) {
      ModelVector next = step(x);
      const double moved = (next - x).norm();
      x = std::move(next);
      ++it;
      evaluate(x, result.objective_trace);
      if (moved <= cfg_.tolerance * std::max(x.norm(), spread_)) break;
    }

    result.point = best_point_;
    result.objective = best_objective_;
    result.iterations_used = it;
    result.certified_ratio = ratio();
    return result;
  }

 private:
  void consider(const ModelVector& x, double objective, double lower) {
    if (objective < best_objective_) {
      best_objective_ = objective;
      best_point_ = x;
    }
    best_lower_ = std::max(best_lower_, lower);
  }

  double ratio() const {
    if (best_objective_ <= 0.0) return 1.0;
    if (best_lower_ <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(1.0, best_objective_ / best_lower_);
  }

  bool certified() const { return ratio() <= 1.0 + cfg_.gamma; }

  // Index of the data point x coincides with, or npos.
  std::size_t coinciding(const ModelVector& x) const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if ((x - points_[i]).norm() <= coincide_) return i;
    }
    return npos;
  }

  void evaluate(const ModelVector& x, std::vector<double>& trace) {
    if (const std::size_t j = coinciding(x); j != npos) {
      trace.push_back(anchors_[j].objective);
      return;  // bound already recorded for the anchor
    }
    double objective = 0.0;
    double farthest = 0.0;
    ModelVector gradient = ModelVector::Zero(x.size());
    for (const auto& z : points_) {
      const double dist = (x - z).norm();
      objective += dist;
      farthest = std::max(farthest, dist);
      gradient += (x - z) / dist;
    }
    trace.push_back(objective);
    consider(x, objective, objective - gradient.norm() * farthest);
  }

  ModelVector step(const ModelVector& x) const {
    if (const std::size_t j = coinciding(x); j != npos) {
      // Descent step off a non-optimal data point along the negative
      // minimum-norm subgradient.
      const Anchor& a = anchors_[j];
      const double pull = a.pull.norm();
      if (pull <= a.multiplicity || a.inverse_sum == 0.0) return points_[j];
      const double length = (pull - a.multiplicity) / a.inverse_sum;
      return points_[j] - (length / pull) * a.pull;
    }
    ModelVector numerator = ModelVector::Zero(x.size());
    double denominator = 0.0;
    for (const auto& z : points_) {
      const double w = 1.0 / (x - z).norm();
      numerator += w * z;
      denominator += w;
    }
    return numerator / denominator;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::span<const ModelVector> points_;
  const AggregatorConfig& cfg_;
  double spread_ = 0.0;
  double coincide_ = 0.0;
  std::vector<Anchor> anchors_;
  ModelVector best_point_;
  double best_objective_ = std::numeric_limits<double>::infinity();
  double best_lower_ = -std::numeric_limits<double>::infinity();
};

}  // namespace

MedianResult geometric_median(std::span<const ModelVector> points, const AggregatorConfig& cfg) {
  check_points(points, "geometric_median");
  Solver solver(points, cfg);
  return solver.solve();
}

std::optional<std::vector<ModelVector>> trim_by_norm(std::span<const ModelVector> points, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("trim_by_norm: tau must be > 0");
  std::vector<ModelVector> kept;
  for (const auto& z : points) {
    if (z.norm() <= tau) kept.push_back(z);
  }
  if (kept.empty()) return std::nullopt;
  return kept;
}

ModelVector mean_of(std::span<const ModelVector> points) {
  if (points.empty()) throw std::invalid_argument("mean_of: empty point set");
  ModelVector sum = ModelVector::Zero(points.front().size());
  for (const auto& z : points) sum += z;
  return sum / static_cast<double>(points.size());
}

std::vector<ModelVector> batch_means(std::span<const ModelVector> gradients, std::size_t k) {
  const std::size_t m = gradients.size();
  if (k == 0 || m == 0 || m % k != 0) {
    throw std::invalid_argument(fmt::format("batch_means: k = {} must divide m = {}", k, m));
  }
  const std::size_t b = m / k;
  std::vector<ModelVector> means;
  means.reserve(k);
  for (std::size_t l = 0; l < k; ++l) means.push_back(mean_of(gradients.subspan(l * b, b)));
  return means;
}

ModelVector median_of_means(std::span<const ModelVector> gradients, const AggregatorConfig& cfg) {
  cfg.validate();
  check_points(gradients, "median_of_means");
  std::vector<ModelVector> means = batch_means(gradients, cfg.k);
  if (cfg.tau) {
    if (auto kept = trim_by_norm(means, *cfg.tau)) {
      means = std::move(*kept);
    } else {
      spdlog::warn("median_of_means: all {} batch means exceed tau = {}; using untrimmed means",
                   means.size(), *cfg.tau);
    }
  }
  if (means.size() == 1) return means.front();
  return geometric_median(means, cfg).point;
}

double c_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("c_alpha: alpha must lie in (0, 1/2)");
  return 2.0 * (1.0 - alpha) / (1.0 - 2.0 * alpha);
}

bool check_robustness_bound(std::span<const ModelVector> points, double alpha, double r,
                            const MedianResult& result, double gamma) {
  check_points(points, "check_robustness_bound");
  const double c = c_alpha(alpha);
  if (!(r >= 0.0)) throw std::invalid_argument("check_robustness_bound: r must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("check_robustness_bound: gamma must be >= 0");
  std::size_t inside = 0;
  double max_norm = 0.0;
  for (const auto& z : points) {
    const double norm = z.norm();
    if (norm <= r) ++inside;
    max_norm = std::max(max_norm, norm);
  }
  const double required = (1.0 - alpha) * static_cast<double>(points.size());
  if (static_cast<double>(inside) < required - 1e-9) {
    throw std::invalid_argument(fmt::format(
        "check_robustness_bound: only {} of {} points have norm <= r, need (1 - alpha) n = {}", inside,
        points.size(), required));
  }
  return result.point.norm() <= c * r + gamma * max_norm / (1.0 - 2.0 * alpha);
}

}  // namespace byzgd
