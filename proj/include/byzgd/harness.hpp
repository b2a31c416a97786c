#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "byzgd/diagnostics.hpp"
#include "byzgd/engine.hpp"

namespace byzgd {

enum class Algorithm { kByzantine, kStandard, kBoth };

/// Attack parameters as configured; the strategy is built per sweep point
/// from a strategy name and these values.
struct AttackParams {
  std::string strategy = "none";
  std::string policy = "resample";  // resample | fixed
  std::vector<std::size_t> ids;     // fixed policy
  std::optional<std::uint64_t> seed;  // resample policy; derived from the run seed when absent
  double scale = 1.0;
  std::optional<ModelVector> vector;
  std::optional<ModelVector> target;
  double magnitude = 1.0;
  std::optional<ModelVector> target_average;
};

struct SweepSpec {
  std::vector<std::size_t> k;
  std::vector<std::size_t> q;
  std::vector<std::string> attack;

  bool empty() const { return k.empty() && q.empty() && attack.empty(); }
};

struct ExperimentConfig {
  RunConfig run;  // run.attack is rebuilt per sweep point from `attack`
  ProblemSpec problem;
  std::optional<ModelVector> theta_star;  // explicit; otherwise random direction of theta_star_norm
  double theta_star_norm = 1.0;
  bool auto_gamma = true;  // gamma = 1/N
  bool auto_tau = false;   // tau = 10 d max(1, ||theta0 - theta*||)
  AttackParams attack;
  Algorithm algorithm = Algorithm::kByzantine;
  std::size_t repetitions = 1;
  SweepSpec sweep;
  std::optional<double> alpha;
  std::optional<double> delta;
  std::size_t good_event_resamples = 0;
  std::size_t grid_points = 64;
  std::filesystem::path output_dir;
  bool write_dataset = false;

  void validate() const;
};

/// Parses the key-value config format (INI sections, `section.key` names).
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Fully resolved config in the same format.
std::string resolved_config_text(const ExperimentConfig& config);

struct SweepPointSummary {
  std::size_t index = 0;
  std::size_t k = 0;
  std::size_t q = 0;
  std::string attack;
  std::string algorithm;
  std::vector<double> final_errors;  // one per repetition
  double final_error_mean = 0.0;
  double final_error_min = 0.0;
  double final_error_max = 0.0;
  double rounds_to_floor_mean = 0.0;  // first round within 10% of the final error
  std::optional<double> theory_floor;
  std::optional<double> good_event_frequency;
};

struct Summary {
  std::vector<SweepPointSummary> points;
};

std::string summary_json(const Summary& summary);

/// One resolved sweep point.
struct SweepPoint {
  std::size_t index = 0;
  std::size_t k = 0;
  std::size_t q = 0;
  std::string attack;
};

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& config);

/// Everything needed to execute one repetition of one sweep point.
struct PreparedRun {
  RunConfig run;
  ModelVector theta_star;
  std::vector<DataShard> shards;
  std::uint64_t seed = 0;
};

PreparedRun prepare_run(const ExperimentConfig& config, const SweepPoint& point, std::size_t repetition);

/// Runs every sweep point and repetition, writing traces, the resolved
/// config and summary.json under output_dir (nothing is written when
/// output_dir is empty). Algorithm::kBoth yields two records per point.
Summary run_experiment(const ExperimentConfig& config);

/// Standard BGD and Byzantine GD on identical data and seeds.
std::pair<Summary, Summary> compare_baselines(const ExperimentConfig& config);

}  // namespace byzgd
