#include <charconv>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "byzgd/harness.hpp"

namespace byzgd {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.N",          "run.m",          "run.k",           "run.q",
      "run.eta",        "run.rounds",     "run.seed",        "run.theta0",
      "problem.model",  "problem.d",      "problem.r",       "problem.theta_star",
      "problem.theta_star_norm",
      "aggregator.gamma", "aggregator.tau", "aggregator.max_iterations", "aggregator.tolerance",
      "attack.strategy", "attack.policy",  "attack.ids",      "attack.seed",
      "attack.scale",    "attack.vector",  "attack.target",   "attack.magnitude",
      "attack.target_average",
      "experiment.repetitions", "experiment.algorithm",
      "sweep.k",        "sweep.q",        "sweep.attack",
      "diagnostics.alpha", "diagnostics.delta", "diagnostics.good_event_resamples",
      "diagnostics.grid_points",
      "output.dir",     "output.wall_time", "output.dataset_snapshot",
  };
  return keys;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("config key {}: '{}' is not a number", key, text));
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument(fmt::format("config key {}: '{}' is not a non-negative integer", key, text));
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument(fmt::format("config key {}: '{}' is not a boolean", key, text));
}

ModelVector to_vector(const std::string& key, const std::string& text) {
  const auto items = split_list(text);
  if (items.empty()) throw std::invalid_argument(fmt::format("config key {}: empty vector", key));
  ModelVector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(key, items[i]);
  return v;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) {
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        throw std::invalid_argument(fmt::format("config: key '{}' must be inside a [section]", section));
      }
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!known_keys().contains(full)) throw std::invalid_argument(fmt::format("config: unknown key {}", full));
        values_[full] = trim(value.data());
      }
    }
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) const {
    if (auto v = get(key)) return *v;
    throw std::invalid_argument(fmt::format("config: missing required key {}", key));
  }

 private:
  std::map<std::string, std::string> values_;
};

std::string join_vector(const ModelVector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v[i]);
  return out;
}

template <class T>
std::string join_list(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += fmt::format("{}{}", i ? "," : "", items[i]);
  return out;
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kByzantine: return "byzantine";
    case Algorithm::kStandard: return "standard";
    case Algorithm::kBoth: return "both";
  }
  return "byzantine";
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(fmt::format("config: {}", e.message()));
  }
  const Reader in(tree);
  ExperimentConfig c;

  const std::string model = in.get("problem.model").value_or("linear_regression");
  if (model != "linear_regression") throw std::invalid_argument(fmt::format("config: unknown problem.model {}", model));
  const auto d = static_cast<int>(to_uint("problem.d", in.require("problem.d")));
  const double r = in.get("problem.r") ? to_double("problem.r", *in.get("problem.r")) : 1.0;
  c.problem = linear_regression_problem(d, r);
  if (auto ts = in.get("problem.theta_star"); ts && *ts != "random") c.theta_star = to_vector("problem.theta_star", *ts);
  if (auto n = in.get("problem.theta_star_norm")) c.theta_star_norm = to_double("problem.theta_star_norm", *n);

  RunConfig& run = c.run;
  run.N = to_uint("run.N", in.require("run.N"));
  run.m = to_uint("run.m", in.require("run.m"));
  run.k = in.get("run.k") ? to_uint("run.k", *in.get("run.k")) : 1;
  run.q = in.get("run.q") ? to_uint("run.q", *in.get("run.q")) : 0;
  const std::string eta = in.get("run.eta").value_or("theory");
  run.eta = eta == "theory" ? theory_step_size(c.problem) : to_double("run.eta", eta);
  run.rounds = in.get("run.rounds") ? to_uint("run.rounds", *in.get("run.rounds")) : 0;
  run.seed = in.get("run.seed") ? to_uint("run.seed", *in.get("run.seed")) : 0;
  if (auto t0 = in.get("run.theta0"); t0 && *t0 != "zero") run.theta0 = to_vector("run.theta0", *t0);

  const std::string gamma = in.get("aggregator.gamma").value_or("auto");
  c.auto_gamma = gamma == "auto";
  if (!c.auto_gamma) run.aggregator.gamma = to_double("aggregator.gamma", gamma);
  const std::string tau = in.get("aggregator.tau").value_or("off");
  c.auto_tau = tau == "auto";
  if (tau != "off" && tau != "auto") run.aggregator.tau = to_double("aggregator.tau", tau);
  if (auto v = in.get("aggregator.max_iterations")) run.aggregator.max_iterations = to_uint("aggregator.max_iterations", *v);
  if (auto v = in.get("aggregator.tolerance")) run.aggregator.tolerance = to_double("aggregator.tolerance", *v);

  AttackParams& a = c.attack;
  a.strategy = in.get("attack.strategy").value_or("none");
  a.policy = in.get("attack.policy").value_or("resample");
  if (auto ids = in.get("attack.ids")) {
    for (const auto& item : split_list(*ids)) a.ids.push_back(to_uint("attack.ids", item));
  }
  if (auto s = in.get("attack.seed")) a.seed = to_uint("attack.seed", *s);
  if (auto s = in.get("attack.scale")) a.scale = to_double("attack.scale", *s);
  if (auto v = in.get("attack.vector")) a.vector = to_vector("attack.vector", *v);
  if (auto v = in.get("attack.target")) a.target = to_vector("attack.target", *v);
  if (auto v = in.get("attack.magnitude")) a.magnitude = to_double("attack.magnitude", *v);
  if (auto v = in.get("attack.target_average"); v && *v != "zero") {
    a.target_average = to_vector("attack.target_average", *v);
  }

  if (auto v = in.get("experiment.repetitions")) c.repetitions = to_uint("experiment.repetitions", *v);
  const std::string algorithm = in.get("experiment.algorithm").value_or("byzantine");
  if (algorithm == "byzantine") {
    c.algorithm = Algorithm::kByzantine;
  } else if (algorithm == "standard") {
    c.algorithm = Algorithm::kStandard;
  } else if (algorithm == "both") {
    c.algorithm = Algorithm::kBoth;
  } else {
    throw std::invalid_argument(fmt::format("config: unknown experiment.algorithm {}", algorithm));
  }

  if (auto v = in.get("sweep.k")) {
    for (const auto& item : split_list(*v)) c.sweep.k.push_back(to_uint("sweep.k", item));
  }
  if (auto v = in.get("sweep.q")) {
    for (const auto& item : split_list(*v)) c.sweep.q.push_back(to_uint("sweep.q", item));
  }
  if (auto v = in.get("sweep.attack")) c.sweep.attack = split_list(*v);

  if (auto v = in.get("diagnostics.alpha")) c.alpha = to_double("diagnostics.alpha", *v);
  if (auto v = in.get("diagnostics.delta")) c.delta = to_double("diagnostics.delta", *v);
  if (auto v = in.get("diagnostics.good_event_resamples")) {
    c.good_event_resamples = to_uint("diagnostics.good_event_resamples", *v);
  }
  if (auto v = in.get("diagnostics.grid_points")) c.grid_points = to_uint("diagnostics.grid_points", *v);

  if (auto v = in.get("output.dir")) c.output_dir = *v;
  run.record_wall_time = in.get("output.wall_time") ? to_bool("output.wall_time", *in.get("output.wall_time")) : false;
  if (auto v = in.get("output.dataset_snapshot")) c.write_dataset = to_bool("output.dataset_snapshot", *v);

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config file {}", path.string()));
  return parse_experiment_config(in);
}

std::string resolved_config_text(const ExperimentConfig& c) {
  pt::ptree tree;
  const RunConfig& run = c.run;
  tree.put("run.N", run.N);
  tree.put("run.m", run.m);
  tree.put("run.k", run.k);
  tree.put("run.q", run.q);
  tree.put("run.eta", fmt::format("{}", run.eta));
  tree.put("run.rounds", run.resolved_rounds());
  tree.put("run.seed", run.seed);
  tree.put("run.theta0", run.theta0.size() ? join_vector(run.theta0) : std::string("zero"));

  tree.put("problem.model", "linear_regression");
  tree.put("problem.d", c.problem.d);
  tree.put("problem.r", fmt::format("{}", c.problem.r));
  tree.put("problem.theta_star", c.theta_star ? join_vector(*c.theta_star) : std::string("random"));
  tree.put("problem.theta_star_norm", fmt::format("{}", c.theta_star_norm));

  tree.put("aggregator.gamma",
           c.auto_gamma ? fmt::format("{}", 1.0 / static_cast<double>(run.N)) : fmt::format("{}", run.aggregator.gamma));
  tree.put("aggregator.tau", c.auto_tau ? std::string("auto")
                                        : (run.aggregator.tau ? fmt::format("{}", *run.aggregator.tau) : "off"));
  tree.put("aggregator.max_iterations", run.aggregator.max_iterations);
  tree.put("aggregator.tolerance", fmt::format("{}", run.aggregator.tolerance));

  const AttackParams& a = c.attack;
  tree.put("attack.strategy", a.strategy);
  tree.put("attack.policy", a.policy);
  tree.put("attack.ids", join_list(a.ids));
  tree.put("attack.seed", a.seed ? std::to_string(*a.seed) : std::string());
  tree.put("attack.scale", fmt::format("{}", a.scale));
  tree.put("attack.vector", a.vector ? join_vector(*a.vector) : std::string());
  tree.put("attack.target", a.target ? join_vector(*a.target) : std::string());
  tree.put("attack.magnitude", fmt::format("{}", a.magnitude));
  tree.put("attack.target_average", a.target_average ? join_vector(*a.target_average) : std::string("zero"));

  tree.put("experiment.repetitions", c.repetitions);
  tree.put("experiment.algorithm", algorithm_name(c.algorithm));
  tree.put("sweep.k", join_list(c.sweep.k));
  tree.put("sweep.q", join_list(c.sweep.q));
  tree.put("sweep.attack", join_list(c.sweep.attack));

  tree.put("diagnostics.alpha", c.alpha ? fmt::format("{}", *c.alpha) : std::string());
  tree.put("diagnostics.delta", c.delta ? fmt::format("{}", *c.delta) : std::string());
  tree.put("diagnostics.good_event_resamples", c.good_event_resamples);
  tree.put("diagnostics.grid_points", c.grid_points);

  tree.put("output.dir", c.output_dir.string());
  tree.put("output.wall_time", run.record_wall_time ? "true" : "false");
  tree.put("output.dataset_snapshot", c.write_dataset ? "true" : "false");

  std::ostringstream os;
  pt::write_ini(os, tree);
  return os.str();
}

}  // namespace byzgd
