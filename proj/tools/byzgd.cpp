#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "byzgd/diagnostics.hpp"
#include "byzgd/errors.hpp"
#include "byzgd/harness.hpp"
#include "byzgd/robust_aggregation.hpp"

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::optional<std::vector<double>> parse_row(const std::string& line) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t");
    const auto last = cell.find_last_not_of(" \t\r");
    if (first == std::string::npos) return std::nullopt;
    double v = 0.0;
    const char* begin = cell.data() + first;
    const char* end = cell.data() + last + 1;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    row.push_back(v);
  }
  if (row.empty()) return std::nullopt;
  return row;
}

std::vector<byzgd::ModelVector> read_points(std::istream& is) {
  std::vector<byzgd::ModelVector> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = parse_row(line);
    if (!row) {
      if (line_no == 1) continue;  // header
      throw std::invalid_argument(fmt::format("points line {}: not a numeric CSV row", line_no));
    }
    if (!points.empty() && static_cast<std::size_t>(points.front().size()) != row->size()) {
      throw std::invalid_argument(fmt::format("points line {}: expected {} columns, got {}", line_no,
                                              points.front().size(), row->size()));
    }
    points.emplace_back(Eigen::Map<const Eigen::VectorXd>(row->data(), static_cast<Eigen::Index>(row->size())));
  }
  if (points.empty()) throw std::invalid_argument("points: no rows");
  return points;
}

int cmd_median(const std::string& input, double gamma, std::size_t max_iters, double tol, std::optional<double> tau) {
  std::vector<byzgd::ModelVector> points;
  if (input == "-") {
    points = read_points(std::cin);
  } else {
    std::ifstream in(input);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", input));
    points = read_points(in);
  }
  byzgd::AggregatorConfig cfg;
  cfg.gamma = gamma;
  cfg.max_iterations = max_iters;
  cfg.tolerance = tol;
  cfg.tau = tau;
  cfg.validate();
  if (tau) {
    auto kept = byzgd::trim_by_norm(points, *tau);
    if (!kept) throw std::invalid_argument("median: every point was trimmed by tau");
    points = std::move(*kept);
  }
  const auto result = byzgd::geometric_median(points, cfg);
  std::string out;
  for (Eigen::Index i = 0; i < result.point.size(); ++i) out += fmt::format("{},", result.point[i]);
  fmt::print("{}{}\n", out, result.certified_ratio);
  return 0;
}

int cmd_constants(const byzgd::RunConfig& run, byzgd::ProblemSpec spec, double alpha, double delta, bool header) {
  const auto c = byzgd::compute_constants(spec, run, alpha, delta);
  if (header) {
    fmt::print(
        "alpha,delta,batch_samples,eta,C_alpha,Delta1,Delta1_prime,Delta2,M_prime,xi1,xi2,rho,floor,"
        "good_event_prob_lower,rho_positive,delta1_small,delta2_small\n");
  }
  fmt::print("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.alpha, c.delta, c.batch_samples, c.eta,
             c.C_alpha, c.Delta1, c.Delta1_prime, c.Delta2, c.M_prime, c.xi1, c.xi2, c.rho, c.floor,
             c.good_event_prob_lower, c.rho_positive ? 1 : 0, c.delta1_small ? 1 : 0, c.delta2_small ? 1 : 0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("byzgd"));
  CLI::App app{"Byzantine gradient descent simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one configuration (sweep lists ignored)");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Master seed override");
  run->add_option("--out", out_dir, "Output directory override");

  auto* sweep = app.add_subcommand("sweep", "Run every sweep point in the config");
  sweep->add_option("--config", config_path, "Config file")->required();

  std::string points_path;
  double gamma = 1e-6;
  std::size_t max_iters = 200;
  double tol = 1e-10;
  std::optional<double> tau;
  auto* median = app.add_subcommand("median", "Geometric median of CSV points");
  median->add_option("points", points_path, "CSV file, or - for stdin")->required();
  median->add_option("--gamma", gamma, "Certification tolerance");
  median->add_option("--max-iters", max_iters, "Iteration cap");
  median->add_option("--tol", tol, "Step tolerance");
  median->add_option("--tau", tau, "Norm trimming threshold");

  byzgd::RunConfig crun;
  int d = 1;
  double alpha = 0.25;
  double delta = 0.05;
  bool header = false;
  byzgd::ProblemSpec spec = byzgd::linear_regression_problem(1);
  crun.eta = 0.5;
  auto* constants = app.add_subcommand("constants", "Print convergence constants as one CSV row");
  constants->add_option("--n-total", crun.N, "Total samples N")->required();
  constants->add_option("--k", crun.k, "Number of batches")->required();
  constants->add_option("--q", crun.q, "Fault budget");
  constants->add_option("--d", d, "Dimension")->required();
  constants->add_option("--alpha", alpha, "Bad batch fraction");
  constants->add_option("--delta", delta, "Deviation level");
  constants->add_option("--L", spec.L, "Strong convexity");
  constants->add_option("--M", spec.M, "Smoothness");
  constants->add_option("--sigma1", spec.sigma1);
  constants->add_option("--alpha1", spec.alpha1);
  constants->add_option("--sigma2", spec.sigma2);
  constants->add_option("--alpha2", spec.alpha2);
  constants->add_option("--r", spec.r);
  constants->add_option("--eta", crun.eta, "Step size");
  constants->add_flag("--header", header, "Print a header row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*run || *sweep) {
      auto config = byzgd::load_experiment_config(config_path);
      if (*run) {
        config.sweep = {};
        if (seed) config.run.seed = *seed;
        if (!out_dir.empty()) config.output_dir = out_dir;
      }
      const auto summary = byzgd::run_experiment(config);
      if (config.output_dir.empty()) std::cout << byzgd::summary_json(summary);
      return 0;
    }
    if (*median) return cmd_median(points_path, gamma, max_iters, tol, tau);
    spec.d = d;
    return cmd_constants(crun, spec, alpha, delta, header);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid_argument: " << one_line(e.what()) << "\n";
  } catch (const byzgd::UnsupportedOperation& e) {
    std::cerr << "error: unsupported: " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << one_line(e.what()) << "\n";
  }
  return 1;
}
