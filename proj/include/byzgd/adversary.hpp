#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "byzgd/problem.hpp"

namespace byzgd {

namespace attack {

/// All workers report honestly.
struct None {};

/// Faulty workers report -scale * (mean of the honest gradients).
struct SignFlip {
  double scale = 1.0;
};

/// Faulty workers report a fixed vector. A silent worker is modeled as
/// Constant with a zero vector (see missing_message()).
struct Constant {
  ModelVector vector;
};

/// Faulty workers report magnitude * unit(target - mean of honest gradients).
struct PullToward {
  ModelVector target;
  double magnitude = 1.0;
};

/// Faulty workers jointly force the arithmetic mean of all m reports to equal
/// target_average, splitting the correction equally.
struct OmniscientMeanShift {
  ModelVector target_average;
};

}  // namespace attack

using AttackStrategy =
    std::variant<attack::None, attack::SignFlip, attack::Constant, attack::PullToward, attack::OmniscientMeanShift>;

/// The same workers are faulty in every round.
struct FixedFaultSet {
  std::vector<std::size_t> ids;
};

/// A fresh set of q workers each round, drawn from a stream keyed by (seed, round).
struct ResampleEachRound {
  std::size_t q = 0;
  std::uint64_t seed = 0;
};

using FaultSetPolicy = std::variant<FixedFaultSet, ResampleEachRound>;

struct AttackSpec {
  AttackStrategy strategy = attack::None{};
  FaultSetPolicy policy = ResampleEachRound{};
  std::size_t q = 0;

  void validate(std::size_t m, Eigen::Index d) const;
};

struct RoundReports {
  std::vector<ModelVector> reports;  // indexed by worker
  std::vector<bool> byzantine_mask;  // true where the report was rewritten

  std::size_t n_byzantine() const;
};

std::string_view strategy_name(const AttackStrategy& strategy);

/// Stand-in for a worker whose message never arrived.
AttackStrategy missing_message(Eigen::Index d);

/// Sorted worker ids that are faulty in `round`. Deterministic in (policy, round).
std::vector<std::size_t> select_fault_set(const FaultSetPolicy& policy, std::size_t round, std::size_t m);

/// Rewrites the reports of the workers in fault_set according to the strategy.
/// Honest entries are copied unchanged.
RoundReports apply_attack(const AttackSpec& spec, std::span<const ModelVector> honest_gradients,
                          std::span<const std::size_t> fault_set, std::size_t round);

}  // namespace byzgd
