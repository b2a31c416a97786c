#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "byzgd/adversary.hpp"
#include "byzgd/robust_aggregation.hpp"
#include "support.hpp"

using namespace byzgd;
using testing::Gen;

namespace {

AttackSpec spec_of(AttackStrategy s, std::size_t q, std::uint64_t seed = 1) {
  return AttackSpec{std::move(s), ResampleEachRound{q, seed}, q};
}

}  // namespace

TEST_CASE("fixed fault set is constant across rounds") {
  const FaultSetPolicy policy = FixedFaultSet{{3, 0}};
  for (std::size_t t = 0; t < 10; ++t) CHECK(select_fault_set(policy, t, 5) == std::vector<std::size_t>{0, 3});
}

TEST_CASE("resampled fault set") {
  const FaultSetPolicy policy = ResampleEachRound{3, 77};
  CHECK(select_fault_set(policy, 4, 10) == select_fault_set(policy, 4, 10));
  CHECK(select_fault_set(ResampleEachRound{0, 77}, 4, 10).empty());
  CHECK_THROWS_AS(select_fault_set(ResampleEachRound{11, 1}, 0, 10), std::invalid_argument);

  bool changed = false;
  for (std::size_t t = 1; t < 20; ++t) changed = changed || select_fault_set(policy, t, 10) != select_fault_set(policy, 0, 10);
  CHECK(changed);
}

TEST_CASE("property: resampled sets are sorted, distinct, in range and of size q") {
  Gen gen(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = gen.index(1, 40);
    const std::size_t q = gen.index(0, m);
    const auto ids = select_fault_set(ResampleEachRound{q, gen.index(0, 1000)}, gen.index(0, 100), m);
    CHECK(ids.size() == q);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(std::set<std::size_t>(ids.begin(), ids.end()).size() == q);
    for (auto id : ids) CHECK(id < m);
  }
}

TEST_CASE("property: every worker is eventually selected") {
  std::vector<int> hits(8, 0);
  const FaultSetPolicy policy = ResampleEachRound{2, 5};
  for (std::size_t t = 0; t < 400; ++t) {
    for (auto id : select_fault_set(policy, t, 8)) ++hits[id];
  }
  for (int h : hits) CHECK(h > 50);
}

TEST_CASE("attack spec validation") {
  CHECK_THROWS_AS(spec_of(attack::None{}, 5).validate(4, 2), std::invalid_argument);
  CHECK_THROWS_AS((AttackSpec{attack::None{}, FixedFaultSet{{0, 0}}, 2}.validate(4, 2)), std::invalid_argument);
  CHECK_THROWS_AS((AttackSpec{attack::None{}, FixedFaultSet{{0}}, 2}.validate(4, 2)), std::invalid_argument);
  CHECK_THROWS_AS((AttackSpec{attack::None{}, FixedFaultSet{{9}}, 1}.validate(4, 2)), std::invalid_argument);
  CHECK_THROWS_AS(spec_of(attack::Constant{ModelVector::Zero(3)}, 1).validate(4, 2), std::invalid_argument);
  CHECK_NOTHROW((AttackSpec{attack::SignFlip{2.0}, FixedFaultSet{{1, 2}}, 2}.validate(4, 2)));
}

TEST_CASE("strategy none passes everything through") {
  Gen gen(1);
  const auto honest = gen.cloud(5, 3);
  const std::vector<std::size_t> fault{1, 4};
  const auto out = apply_attack(spec_of(attack::None{}, 2), honest, fault, 0);
  CHECK(out.reports == honest);
  CHECK(out.n_byzantine() == 0);
}

TEST_CASE("omniscient mean shift with one of two workers negates the honest report") {
  const std::vector<ModelVector> honest{ModelVector(Eigen::Vector2d(3, -1)), ModelVector(Eigen::Vector2d(3, -1))};
  const std::vector<std::size_t> fault{1};
  const auto out = apply_attack(spec_of(attack::OmniscientMeanShift{ModelVector::Zero(2)}, 1), honest, fault, 0);
  CHECK(out.reports[1] == -honest[0]);
  CHECK(out.reports[0] == honest[0]);
  CHECK(out.byzantine_mask == std::vector<bool>{false, true});
}

TEST_CASE("sign flip reports -scale times the honest mean") {
  const ModelVector g(Eigen::Vector3d(1, 2, -0.5));
  const std::vector<ModelVector> honest(4, g);
  const std::vector<std::size_t> fault{0, 2};
  const auto out = apply_attack(spec_of(attack::SignFlip{10.0}, 2), honest, fault, 0);
  CHECK(out.reports[0] == -10.0 * g);
  CHECK(out.reports[2] == -10.0 * g);
  CHECK(out.reports[1] == g);
  CHECK(out.n_byzantine() == 2);
}

TEST_CASE("constant, missing and pull toward") {
  Gen gen(2);
  const auto honest = gen.cloud(6, 3);
  const std::vector<std::size_t> fault{5};
  const ModelVector v(Eigen::Vector3d(7, 7, 7));
  CHECK(apply_attack(spec_of(attack::Constant{v}, 1), honest, fault, 0).reports[5] == v);
  CHECK(apply_attack(spec_of(missing_message(3), 1), honest, fault, 0).reports[5] == ModelVector::Zero(3));
  CHECK(strategy_name(missing_message(3)) == "constant");

  const ModelVector target(Eigen::Vector3d(100, 0, 0));
  const auto out = apply_attack(spec_of(attack::PullToward{target, 2.5}, 1), honest, fault, 0);
  const ModelVector mean = mean_of(honest);
  CHECK(out.reports[5].norm() == doctest::Approx(2.5));
  CHECK(out.reports[5].dot(target - mean) == doctest::Approx(2.5 * (target - mean).norm()));
}

TEST_CASE("apply attack rejects bad fault sets") {
  Gen gen(6);
  const auto honest = gen.cloud(3, 2);
  const std::vector<std::size_t> out_of_range{3};
  const std::vector<std::size_t> duplicate{1, 1};
  CHECK_THROWS_AS(apply_attack(spec_of(attack::SignFlip{}, 1), honest, out_of_range, 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_attack(spec_of(attack::SignFlip{}, 2), honest, duplicate, 0), std::invalid_argument);
}

TEST_CASE("property: honest pass-through and budget") {
  Gen gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = gen.index(1, 20);
    const std::size_t q = gen.index(0, m);
    const int d = static_cast<int>(gen.index(1, 5));
    const auto honest = gen.cloud(m, d);
    AttackStrategy s;
    switch (trial % 4) {
      case 0: s = attack::SignFlip{gen.uniform(-5, 5)}; break;
      case 1: s = attack::Constant{gen.gaussian(d)}; break;
      case 2: s = attack::PullToward{gen.gaussian(d), gen.uniform(0, 10)}; break;
      default: s = attack::OmniscientMeanShift{gen.gaussian(d)}; break;
    }
    const auto spec = spec_of(s, q, trial);
    const auto fault = select_fault_set(spec.policy, trial, m);
    const auto out = apply_attack(spec, honest, fault, trial);
    CHECK(out.n_byzantine() <= q);
    for (std::size_t j = 0; j < m; ++j) {
      if (!out.byzantine_mask[j]) CHECK(out.reports[j] == honest[j]);
    }
  }
}

TEST_CASE("property: omniscient mean shift forces the plain average") {
  Gen gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = gen.index(2, 30);
    const std::size_t q = gen.index(1, m);
    const int d = static_cast<int>(gen.index(1, 6));
    const auto honest = gen.cloud(m, d, 50.0);
    const ModelVector target = gen.gaussian(d);
    const auto spec = spec_of(attack::OmniscientMeanShift{target}, q, trial);
    const auto out = apply_attack(spec, honest, select_fault_set(spec.policy, 0, m), 0);
    const ModelVector avg = median_of_means(out.reports, AggregatorConfig{});
    CHECK((avg - target).norm() <= 1e-12 * std::max(1.0, (static_cast<double>(m) * 50.0)));
  }
}
