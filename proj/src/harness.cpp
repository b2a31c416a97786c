#include "byzgd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "byzgd/rng.hpp"

namespace byzgd {

namespace {

AttackStrategy build_strategy(const AttackParams& a, const std::string& name, int d) {
  const auto zero = ModelVector::Zero(d);
  const auto sized = [&](const std::optional<ModelVector>& v, const char* key) -> ModelVector {
    if (!v) return zero;
    if (v->size() != d) {
      throw std::invalid_argument(fmt::format("attack.{} has dimension {}, expected {}", key, v->size(), d));
    }
    return *v;
  };
  if (name == "none") return attack::None{};
  if (name == "sign_flip") return attack::SignFlip{a.scale};
  if (name == "constant") return attack::Constant{sized(a.vector, "vector")};
  if (name == "missing") return missing_message(d);
  if (name == "pull_toward") return attack::PullToward{sized(a.target, "target"), a.magnitude};
  if (name == "omniscient_mean_shift") return attack::OmniscientMeanShift{sized(a.target_average, "target_average")};
  throw std::invalid_argument(fmt::format("unknown attack strategy {}", name));
}

AttackSpec build_attack(const AttackParams& a, const std::string& name, std::size_t q, int d, std::uint64_t seed) {
  AttackSpec spec;
  spec.q = q;
  spec.strategy = build_strategy(a, name, d);
  if (a.policy == "fixed") {
    std::vector<std::size_t> ids = a.ids;
    if (ids.empty()) {
      ids.resize(q);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
    }
    if (ids.size() != q) {
      throw std::invalid_argument(fmt::format("attack.ids lists {} workers but q = {}", ids.size(), q));
    }
    spec.policy = FixedFaultSet{ids};
  } else if (a.policy == "resample") {
    spec.policy = ResampleEachRound{q, a.seed.value_or(seed)};
  } else {
    throw std::invalid_argument(fmt::format("unknown attack.policy {}", a.policy));
  }
  return spec;
}

RunConfig point_run(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t attack_seed) {
  RunConfig run = config.run;
  run.k = point.k;
  run.q = point.q;
  run.attack = build_attack(config.attack, point.attack, point.q, config.problem.d, attack_seed);
  if (config.auto_gamma) run.aggregator.gamma = 1.0 / static_cast<double>(run.N);
  return run;
}

std::uint64_t repetition_seed(const ExperimentConfig& config, const SweepPoint& point, std::size_t rep) {
  return derive_seed(derive_seed(config.run.seed, "sweep_point", point.index), "repetition", rep);
}

ModelVector make_theta_star(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.theta_star) return *config.theta_star;
  auto rng = make_rng(seed, "theta_star");
  std::normal_distribution<double> normal;
  ModelVector v(config.problem.d);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v.normalized() * config.theta_star_norm;
}

std::string algorithm_label(Algorithm a) { return a == Algorithm::kStandard ? "standard" : "byzantine"; }

std::size_t rounds_to_floor(const std::vector<RoundTrace>& trace) {
  const double target = 1.1 * trace.back().error;
  for (const auto& r : trace) {
    if (r.error <= target) return r.t;
  }
  return trace.back().t;
}

struct Diagnostics {
  std::optional<double> floor;
  std::optional<double> good_event_frequency;
};

Diagnostics point_diagnostics(const ExperimentConfig& config, const SweepPoint& point, const PreparedRun& prepared) {
  Diagnostics out;
  const double qk = static_cast<double>(point.q) / static_cast<double>(point.k);
  const double alpha = config.alpha.value_or((qk + 0.5) / 2.0);
  const double delta = config.delta.value_or(alpha - qk);
  TheoryConstants constants;
  try {
    constants = compute_constants(config.problem, prepared.run, alpha, delta);
  } catch (const std::invalid_argument&) {
    return out;
  }
  if (std::isfinite(constants.floor)) out.floor = constants.floor;
  if (config.good_event_resamples > 0) {
    const ModelVector theta0 = prepared.run.resolved_theta0(config.problem.d);
    const double radius =
        std::max(config.problem.r * std::sqrt(static_cast<double>(config.problem.d)), (theta0 - prepared.theta_star).norm());
    const auto grid =
        make_theta_grid(prepared.theta_star, theta0, radius, config.grid_points, derive_seed(prepared.seed, "grid"));
    const ModelVector theta_star = prepared.theta_star;
    const std::size_t N = prepared.run.N;
    const auto estimate = estimate_good_event(
        config.problem, prepared.run, theta_star, constants, grid, config.good_event_resamples, prepared.seed,
        [&](std::uint64_t s) { return generate_linear_regression(theta_star, N, s); });
    out.good_event_frequency = estimate.frequency;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  os << text;
}

void finish_summary(SweepPointSummary& s, const std::vector<std::size_t>& floors) {
  const auto& e = s.final_errors;
  s.final_error_mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  s.final_error_min = *std::min_element(e.begin(), e.end());
  s.final_error_max = *std::max_element(e.begin(), e.end());
  s.rounds_to_floor_mean =
      static_cast<double>(std::accumulate(floors.begin(), floors.end(), std::size_t{0})) / static_cast<double>(floors.size());
}

Summary execute(const ExperimentConfig& config, const std::vector<Algorithm>& algorithms) {
  config.validate();
  const auto& dir = config.output_dir;
  const bool write = !dir.empty();
  if (write) write_text(dir / "config.ini", resolved_config_text(config));

  Summary summary;
  for (const auto& point : expand_sweep(config)) {
    std::vector<SweepPointSummary> records(algorithms.size());
    std::vector<std::vector<std::size_t>> floors(algorithms.size());
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      records[a].index = point.index;
      records[a].k = point.k;
      records[a].q = point.q;
      records[a].attack = point.attack;
      records[a].algorithm = algorithm_label(algorithms[a]);
    }
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      const PreparedRun prepared = prepare_run(config, point, rep);
      if (rep == 0) {
        const auto diag = point_diagnostics(config, point, prepared);
        for (auto& r : records) {
          r.theory_floor = diag.floor;
          r.good_event_frequency = diag.good_event_frequency;
        }
        if (write && config.write_dataset) {
          std::vector<Sample> all;
          for (const auto& shard : prepared.shards) all.insert(all.end(), shard.samples.begin(), shard.samples.end());
          std::ostringstream os;
          write_dataset_csv(os, all);
          write_text(dir / fmt::format("dataset_point_{}.csv", point.index), os.str());
        }
      }
      for (std::size_t a = 0; a < algorithms.size(); ++a) {
        const auto trace = algorithms[a] == Algorithm::kStandard
                               ? run_standard_bgd(prepared.run, config.problem, prepared.shards, prepared.theta_star)
                               : run_byzantine_gd(prepared.run, config.problem, prepared.shards, prepared.theta_star);
        records[a].final_errors.push_back(trace.back().error);
        floors[a].push_back(rounds_to_floor(trace));
        if (write) {
          std::ostringstream os;
          write_trace_csv(os, trace);
          const auto sub = dir / records[a].algorithm /
                           fmt::format("point_{}_k{}_q{}_{}", point.index, point.k, point.q, point.attack) /
                           fmt::format("rep_{}.csv", rep);
          write_text(sub, os.str());
        }
      }
    }
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      finish_summary(records[a], floors[a]);
      summary.points.push_back(std::move(records[a]));
    }
  }
  if (write) write_text(dir / "summary.json", summary_json(summary));
  return summary;
}

}  // namespace

void ExperimentConfig::validate() const {
  problem.validate();
  if (repetitions == 0) throw std::invalid_argument("experiment.repetitions must be positive");
  if (theta_star && theta_star->size() != problem.d) {
    throw std::invalid_argument(
        fmt::format("problem.theta_star has dimension {}, expected {}", theta_star->size(), problem.d));
  }
  if (!std::isfinite(theta_star_norm) || theta_star_norm < 0.0) {
    throw std::invalid_argument("problem.theta_star_norm must be finite and non-negative");
  }
  if (alpha && !(*alpha > 0.0 && *alpha < 0.5)) throw std::invalid_argument("diagnostics.alpha must lie in (0, 1/2)");
  if (delta && !(*delta > 0.0 && *delta < 1.0)) throw std::invalid_argument("diagnostics.delta must lie in (0, 1)");
  for (const auto& point : expand_sweep(*this)) point_run(*this, point, 0).validate(problem);
}

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& config) {
  const auto ks = config.sweep.k.empty() ? std::vector<std::size_t>{config.run.k} : config.sweep.k;
  const auto qs = config.sweep.q.empty() ? std::vector<std::size_t>{config.run.q} : config.sweep.q;
  const auto attacks = config.sweep.attack.empty() ? std::vector<std::string>{config.attack.strategy} : config.sweep.attack;
  std::vector<SweepPoint> out;
  for (const auto k : ks) {
    for (const auto q : qs) {
      for (const auto& a : attacks) out.push_back({out.size(), k, q, a});
    }
  }
  return out;
}

PreparedRun prepare_run(const ExperimentConfig& config, const SweepPoint& point, std::size_t repetition) {
  PreparedRun out;
  out.seed = repetition_seed(config, point, repetition);
  out.run = point_run(config, point, derive_seed(out.seed, "attack"));
  out.run.seed = out.seed;
  if (config.auto_tau) {
    const ModelVector theta0 = out.run.resolved_theta0(config.problem.d);
    out.theta_star = make_theta_star(config, out.seed);
    out.run.aggregator.tau = 10.0 * config.problem.d * std::max(1.0, (theta0 - out.theta_star).norm());
  } else {
    out.theta_star = make_theta_star(config, out.seed);
  }
  out.run.validate(config.problem);
  out.shards = shard_dataset(generate_linear_regression(out.theta_star, out.run.N, derive_seed(out.seed, "data")),
                             out.run.m);
  return out;
}

std::string summary_json(const Summary& summary) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : summary.points) {
    nlohmann::json j;
    j["index"] = p.index;
    j["k"] = p.k;
    j["q"] = p.q;
    j["attack"] = p.attack;
    j["algorithm"] = p.algorithm;
    j["final_errors"] = p.final_errors;
    j["final_error_mean"] = p.final_error_mean;
    j["final_error_min"] = p.final_error_min;
    j["final_error_max"] = p.final_error_max;
    j["rounds_to_floor_mean"] = p.rounds_to_floor_mean;
    j["theory_floor"] = p.theory_floor ? nlohmann::json(*p.theory_floor) : nlohmann::json(nullptr);
    j["good_event_frequency"] =
        p.good_event_frequency ? nlohmann::json(*p.good_event_frequency) : nlohmann::json(nullptr);
    points.push_back(std::move(j));
  }
  return nlohmann::json{{"points", points}}.dump(2) + "\n";
}

Summary run_experiment(const ExperimentConfig& config) {
  switch (config.algorithm) {
    case Algorithm::kStandard: return execute(config, {Algorithm::kStandard});
    case Algorithm::kBoth: return execute(config, {Algorithm::kStandard, Algorithm::kByzantine});
    case Algorithm::kByzantine: break;
  }
  return execute(config, {Algorithm::kByzantine});
}

std::pair<Summary, Summary> compare_baselines(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output_dir.clear();
  const Summary both = execute(c, {Algorithm::kStandard, Algorithm::kByzantine});
  std::pair<Summary, Summary> out;
  for (const auto& p : both.points) (p.algorithm == "standard" ? out.first : out.second).points.push_back(p);
  return out;
}

}  // namespace byzgd
