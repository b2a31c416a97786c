#include "byzgd/engine.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace byzgd {

std::size_t default_rounds(std::size_t N) {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < N) ++bits;
  return std::max<std::size_t>(bits, 1) * 4;
}

double theory_step_size(const ProblemSpec& problem) { return problem.L / (2.0 * problem.M * problem.M); }

void RunConfig::validate(const ProblemSpec& problem) const {
  problem.validate();
  if (m < 1) throw std::invalid_argument("run.m must be >= 1");
  if (N < m || N % m != 0) throw std::invalid_argument(fmt::format("run.N = {} must be a multiple of run.m = {}", N, m));
  if (k < 1 || m % k != 0) throw std::invalid_argument(fmt::format("run.k = {} must divide run.m = {}", k, m));
  if (q > m) throw std::invalid_argument(fmt::format("run.q = {} exceeds run.m = {}", q, m));
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("run.eta must be > 0");
  if (theta0.size() != 0) {
    require_dimension(theta0, problem.d, "run.theta0");
    require_finite(theta0, "run.theta0");
  }
  resolved_aggregator().validate();
  if (attack.q != q) throw std::invalid_argument(fmt::format("attack.q = {} differs from run.q = {}", attack.q, q));
  attack.validate(m, problem.d);
}

std::size_t RunConfig::resolved_rounds() const { return rounds == 0 ? default_rounds(N) : rounds; }

ModelVector RunConfig::resolved_theta0(int d) const {
  return theta0.size() == 0 ? ModelVector::Zero(d) : theta0;
}

AggregatorConfig RunConfig::resolved_aggregator() const {
  AggregatorConfig out = aggregator;
  out.k = k;
  return out;
}

ModelVector gd_step(const ModelVector& theta, const ModelVector& gradient, double eta) {
  require_dimension(gradient, theta.size(), "gradient");
  return theta - eta * gradient;
}

namespace {

enum class Rule { kMean, kMedianOfMeans };

std::vector<RoundTrace> run_rounds(const RunConfig& config, const ProblemSpec& problem,
                                   std::span<const DataShard> shards, const ModelVector& theta_star, Rule rule) {
  config.validate(problem);
  require_dimension(theta_star, problem.d, "theta_star");
  if (shards.size() != config.m) {
    throw std::invalid_argument(fmt::format("got {} shards for m = {} workers", shards.size(), config.m));
  }
  const std::size_t per = config.N / config.m;
  for (const auto& shard : shards) {
    if (shard.samples.size() != per) {
      throw std::invalid_argument(
          fmt::format("shard {} has {} samples, expected N/m = {}", shard.worker_id, shard.samples.size(), per));
    }
  }
  if (rule == Rule::kMedianOfMeans && config.q > 0 && 2 * config.q >= config.k) {
    spdlog::warn("byzantine gd: 2q = {} >= k = {}; a majority of clean batches is not guaranteed", 2 * config.q,
                 config.k);
  }

  const AggregatorConfig aggregator = config.resolved_aggregator();
  const bool closed_form = problem.loss->has_population_gradient();
  ModelVector theta = config.resolved_theta0(problem.d);
  const std::size_t rounds = config.resolved_rounds();

  std::vector<RoundTrace> traces;
  traces.reserve(rounds);
  std::vector<ModelVector> honest(config.m);
  for (std::size_t t = 1; t <= rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t j = 0; j < config.m; ++j) honest[j] = local_empirical_gradient(problem, shards[j], theta);
    std::vector<std::size_t> fault_set = select_fault_set(config.attack.policy, t, config.m);
    const RoundReports reports = apply_attack(config.attack, honest, fault_set, t);

    const ModelVector aggregate =
        rule == Rule::kMean ? mean_of(reports.reports) : median_of_means(reports.reports, aggregator);

    RoundTrace trace;
    trace.t = t;
    if (closed_form) {
      trace.agg_deviation = (aggregate - problem.loss->population_gradient(theta, theta_star)).norm();
    }
    theta = gd_step(theta, aggregate, config.eta);
    trace.theta = theta;
    trace.error = (theta - theta_star).norm();
    trace.fault_set = std::move(fault_set);
    trace.n_byzantine = reports.n_byzantine();
    if (config.record_wall_time) {
      trace.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace

std::vector<RoundTrace> run_standard_bgd(const RunConfig& config, const ProblemSpec& problem,
                                         std::span<const DataShard> shards, const ModelVector& theta_star) {
  return run_rounds(config, problem, shards, theta_star, Rule::kMean);
}

std::vector<RoundTrace> run_byzantine_gd(const RunConfig& config, const ProblemSpec& problem,
                                         std::span<const DataShard> shards, const ModelVector& theta_star) {
  return run_rounds(config, problem, shards, theta_star, Rule::kMedianOfMeans);
}

std::vector<RoundTrace> run_population_gd(const ProblemSpec& problem, const ModelVector& theta0,
                                          const ModelVector& theta_star, double eta, std::size_t rounds) {
  problem.validate();
  require_dimension(theta0, problem.d, "theta0");
  require_dimension(theta_star, problem.d, "theta_star");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  std::vector<RoundTrace> traces;
  traces.reserve(rounds);
  ModelVector theta = theta0;
  for (std::size_t t = 1; t <= rounds; ++t) {
    RoundTrace trace;
    trace.t = t;
    trace.agg_deviation = 0.0;
    theta = gd_step(theta, population_gradient(problem, theta, theta_star), eta);
    trace.theta = theta;
    trace.error = (theta - theta_star).norm();
    traces.push_back(std::move(trace));
  }
  return traces;
}

void write_trace_csv(std::ostream& os, std::span<const RoundTrace> traces) {
  os << "round,error,agg_deviation,n_byzantine,wall_ms\n";
  for (const auto& tr : traces) {
    os << fmt::format("{},{},{},{},{}\n", tr.t, tr.error,
                      tr.agg_deviation ? fmt::format("{}", *tr.agg_deviation) : std::string(), tr.n_byzantine,
                      tr.wall_ms);
  }
}

}  // namespace byzgd
