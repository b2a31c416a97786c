#include "byzgd/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "byzgd/rng.hpp"
#include "byzgd/robust_aggregation.hpp"

namespace byzgd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::size_t RoundReports::n_byzantine() const {
  return static_cast<std::size_t>(std::count(byzantine_mask.begin(), byzantine_mask.end(), true));
}

std::string_view strategy_name(const AttackStrategy& strategy) {
  return std::visit(overloaded{
                        [](const attack::None&) { return std::string_view("none"); },
                        [](const attack::SignFlip&) { return std::string_view("sign_flip"); },
                        [](const attack::Constant&) { return std::string_view("constant"); },
                        [](const attack::PullToward&) { return std::string_view("pull_toward"); },
                        [](const attack::OmniscientMeanShift&) {
                          return std::string_view("omniscient_mean_shift");
                        },
                    },
                    strategy);
}

AttackStrategy missing_message(Eigen::Index d) { return attack::Constant{ModelVector::Zero(d)}; }

void AttackSpec::validate(std::size_t m, Eigen::Index d) const {
  if (q > m) throw std::invalid_argument(fmt::format("attack: q = {} exceeds m = {}", q, m));
  std::visit(overloaded{
                 [&](const FixedFaultSet& fixed) {
                   if (fixed.ids.size() != q) {
                     throw std::invalid_argument(
                         fmt::format("attack: fixed fault set has {} ids, q = {}", fixed.ids.size(), q));
                   }
                   std::vector<std::size_t> sorted = fixed.ids;
                   std::sort(sorted.begin(), sorted.end());
                   if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                     throw std::invalid_argument("attack: fixed fault set ids must be distinct");
                   }
                   if (!sorted.empty() && sorted.back() >= m) {
                     throw std::invalid_argument("attack: fixed fault set id out of range");
                   }
                 },
                 [&](const ResampleEachRound& resample) {
                   if (resample.q != q) throw std::invalid_argument("attack: resample policy q differs from q");
                 },
             },
             policy);
  std::visit(overloaded{
                 [](const attack::None&) {},
                 [](const attack::SignFlip& s) {
                   if (!std::isfinite(s.scale)) throw std::invalid_argument("attack.scale must be finite");
                 },
                 [&](const attack::Constant& c) {
                   require_dimension(c.vector, d, "attack.vector");
                   require_finite(c.vector, "attack.vector");
                 },
                 [&](const attack::PullToward& p) {
                   require_dimension(p.target, d, "attack.target");
                   require_finite(p.target, "attack.target");
                   if (!std::isfinite(p.magnitude)) throw std::invalid_argument("attack.magnitude must be finite");
                 },
                 [&](const attack::OmniscientMeanShift& o) {
                   require_dimension(o.target_average, d, "attack.target_average");
                   require_finite(o.target_average, "attack.target_average");
                 },
             },
             strategy);
}

std::vector<std::size_t> select_fault_set(const FaultSetPolicy& policy, std::size_t round, std::size_t m) {
  return std::visit(
      overloaded{
          [&](const FixedFaultSet& fixed) {
            std::vector<std::size_t> ids = fixed.ids;
            std::sort(ids.begin(), ids.end());
            return ids;
          },
          [&](const ResampleEachRound& resample) {
            if (resample.q > m) {
              throw std::invalid_argument(fmt::format("select_fault_set: q = {} exceeds m = {}", resample.q, m));
            }
            std::vector<std::size_t> pool(m);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            Rng rng = make_rng(resample.seed, "fault_set", round);
            // Partial Fisher-Yates: the first q slots are a uniform q-subset.
            for (std::size_t i = 0; i < resample.q; ++i) {
              std::uniform_int_distribution<std::size_t> pick(i, m - 1);
              std::swap(pool[i], pool[pick(rng)]);
            }
            std::vector<std::size_t> ids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(resample.q));
            std::sort(ids.begin(), ids.end());
            return ids;
          },
      },
      policy);
}

RoundReports apply_attack(const AttackSpec& spec, std::span<const ModelVector> honest_gradients,
                          std::span<const std::size_t> fault_set, std::size_t /*round*/) {
  const std::size_t m = honest_gradients.size();
  if (m == 0) throw std::invalid_argument("apply_attack: no gradients");
  std::vector<bool> mask(m, false);
  for (std::size_t id : fault_set) {
    if (id >= m) throw std::invalid_argument(fmt::format("apply_attack: fault-set id {} out of range [0, {})", id, m));
    if (mask[id]) throw std::invalid_argument(fmt::format("apply_attack: duplicate fault-set id {}", id));
    mask[id] = true;
  }

  RoundReports out;
  out.reports.assign(honest_gradients.begin(), honest_gradients.end());
  out.byzantine_mask.assign(m, false);
  if (std::holds_alternative<attack::None>(spec.strategy) || fault_set.empty()) return out;

  const ModelVector honest_mean = mean_of(honest_gradients);
  const ModelVector forged = std::visit(
      overloaded{
          [&](const attack::None&) -> ModelVector { return honest_mean; },
          [&](const attack::SignFlip& s) -> ModelVector { return -s.scale * honest_mean; },
          [&](const attack::Constant& c) -> ModelVector { return c.vector; },
          [&](const attack::PullToward& p) -> ModelVector {
            const ModelVector direction = p.target - honest_mean;
            const double norm = direction.norm();
            if (norm == 0.0) return ModelVector::Zero(honest_mean.size());
            return (p.magnitude / norm) * direction;
          },
          [&](const attack::OmniscientMeanShift& o) -> ModelVector {
            // Choose v with (sum_{j not faulty} g_j + |F| v) / m = target.
            ModelVector untouched = ModelVector::Zero(honest_mean.size());
            for (std::size_t j = 0; j < m; ++j) {
              if (!mask[j]) untouched += honest_gradients[j];
            }
            return (static_cast<double>(m) * o.target_average - untouched) / static_cast<double>(fault_set.size());
          },
      },
      spec.strategy);

  for (std::size_t id : fault_set) {
    out.reports[id] = forged;
    out.byzantine_mask[id] = true;
  }
  return out;
}

}  // namespace byzgd
