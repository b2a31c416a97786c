#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "byzgd/adversary.hpp"
#include "byzgd/problem.hpp"
#include "byzgd/robust_aggregation.hpp"

namespace byzgd {

struct RunConfig {
  std::size_t N = 0;  // total samples
  std::size_t m = 1;  // workers
  std::size_t k = 1;  // batches; overrides aggregator.k
  std::size_t q = 0;  // fault budget; must equal attack.q
  double eta = 0.5;
  std::size_t rounds = 0;  // 0 selects default_rounds(N)
  ModelVector theta0;      // empty selects the zero vector
  AggregatorConfig aggregator;
  AttackSpec attack;
  std::uint64_t seed = 0;
  bool record_wall_time = true;

  void validate(const ProblemSpec& problem) const;
  std::size_t resolved_rounds() const;
  ModelVector resolved_theta0(int d) const;
  AggregatorConfig resolved_aggregator() const;
};

struct RoundTrace {
  std::size_t t = 0;
  ModelVector theta;
  double error = 0.0;                   // ||theta_t - theta*||
  std::optional<double> agg_deviation;  // ||aggregate - grad F(theta_{t-1})|| when grad F is known
  std::vector<std::size_t> fault_set;
  std::size_t n_byzantine = 0;
  double wall_ms = 0.0;
};

/// ceil(log2 N) * 4.
std::size_t default_rounds(std::size_t N);

/// L / (2 M^2).
double theory_step_size(const ProblemSpec& problem);

ModelVector gd_step(const ModelVector& theta, const ModelVector& gradient, double eta);

/// Batch gradient descent: the server averages all m reports.
std::vector<RoundTrace> run_standard_bgd(const RunConfig& config, const ProblemSpec& problem,
                                         std::span<const DataShard> shards, const ModelVector& theta_star);

/// Byzantine gradient descent: the server applies median_of_means to the reports.
std::vector<RoundTrace> run_byzantine_gd(const RunConfig& config, const ProblemSpec& problem,
                                         std::span<const DataShard> shards, const ModelVector& theta_star);

/// Gradient descent on the closed-form population gradient (no data, no attack).
std::vector<RoundTrace> run_population_gd(const ProblemSpec& problem, const ModelVector& theta0,
                                          const ModelVector& theta_star, double eta, std::size_t rounds);

/// Header `round,error,agg_deviation,n_byzantine,wall_ms`; empty agg_deviation when absent.
void write_trace_csv(std::ostream& os, std::span<const RoundTrace> traces);

}  // namespace byzgd
