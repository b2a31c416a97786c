#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "byzgd/diagnostics.hpp"
#include "byzgd/errors.hpp"
#include "byzgd/robust_aggregation.hpp"
#include "support.hpp"

using namespace byzgd;
using testing::Gen;

namespace {

bool rel_close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol * std::abs(b); }

RunConfig run_of(std::size_t N, std::size_t m, std::size_t k, std::size_t q) {
  RunConfig run;
  run.N = N;
  run.m = m;
  run.k = k;
  run.q = q;
  run.eta = 0.5;
  run.attack = AttackSpec{attack::None{}, ResampleEachRound{q, 0}, q};
  return run;
}

class OpaqueLoss final : public LossModel {
 public:
  std::string_view name() const override { return "opaque"; }
  double loss(const Sample&, const ModelVector&) const override { return 0.0; }
  ModelVector sample_gradient(const Sample& x, const ModelVector&) const override {
    return ModelVector::Zero(x.covariate.size());
  }
};

}  // namespace

TEST_CASE("binary divergence") {
  for (double p : {0.01, 0.3, 0.5, 0.99}) CHECK(binary_divergence(p, p) == 0.0);
  CHECK(rel_close(binary_divergence(0.3, 0.1), 0.15366358680379852));
  CHECK(binary_divergence(0.3, 0.1) == doctest::Approx(0.1537).epsilon(1e-3));
  CHECK(binary_divergence(0.4, 0.1) > binary_divergence(0.3, 0.1));
  CHECK_THROWS_AS(binary_divergence(0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(binary_divergence(0.3, 1.0), std::invalid_argument);
}

TEST_CASE("property: binary divergence is non-negative") {
  Gen gen(1);
  for (int i = 0; i < 500; ++i) CHECK(binary_divergence(gen.uniform(1e-6, 1 - 1e-6), gen.uniform(1e-6, 1 - 1e-6)) >= 0.0);
}

TEST_CASE("deviation formulas") {
  CHECK(rel_close(deviation_at_optimum(1000, 10, 0.05, std::sqrt(2.0)), 0.29672842300327523));
  CHECK(rel_close(deviation_at_optimum(1000, 10, 0.05, std::sqrt(2.0)),
                  2.0 * std::sqrt((10 * std::log(6.0) + std::log(60.0)) / 1000.0)));
  CHECK(rel_close(deviation_of_increment(1000, 10, 0.05, std::sqrt(8.0)), 2.0 * 0.29672842300327523));
  CHECK(rel_close(empirical_hessian_bound(2000, 20, 0.00667), 1.3923473324094156));
  CHECK(contraction_margin(1.0, 1.0, 0.0) == doctest::Approx(1.0 - std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(contraction_margin(1.0, 1.0, 0.0) == doctest::Approx(0.1340).epsilon(1e-3));
  CHECK_THROWS_AS(deviation_at_optimum(0, 10, 0.05, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(deviation_at_optimum(10, 10, 1.5, 1.0), std::invalid_argument);
}

TEST_CASE("property: doubling n scales the deviations by 1/sqrt(2)") {
  Gen gen(2);
  for (int i = 0; i < 200; ++i) {
    const double n = gen.uniform(10, 1e6);
    const int d = static_cast<int>(gen.index(1, 50));
    const double delta = gen.uniform(1e-4, 0.5);
    const double s = gen.uniform(0.1, 5);
    CHECK(rel_close(deviation_at_optimum(2 * n, d, delta, s), deviation_at_optimum(n, d, delta, s) / std::sqrt(2.0), 1e-14));
    CHECK(rel_close(deviation_of_increment(2 * n, d, delta, s), deviation_of_increment(n, d, delta, s) / std::sqrt(2.0),
                    1e-14));
  }
}

TEST_CASE("compute constants at the fragility configuration") {
  const auto spec = linear_regression_problem(20);
  const auto c = compute_constants(spec, run_of(24000, 48, 12, 4), 0.35, 0.00667);
  CHECK(c.batch_samples == 2000.0);
  CHECK(rel_close(c.C_alpha, 13.0 / 3.0));
  CHECK(rel_close(c.Delta1, 0.2896340349209113));
  CHECK(rel_close(c.Delta1_prime, 0.5792680698418226));
  CHECK(rel_close(c.M_prime, 1.3923473324094156));
  CHECK(rel_close(c.Delta2, 0.8941602324089553));
  CHECK(rel_close(c.xi1, 5.020323271962462));
  CHECK(rel_close(c.xi2, 30.997554723510447));
  CHECK(rel_close(c.rho, -15.364802765539663));
  CHECK(rel_close(c.good_event_prob_lower, 0.06181097660061252));
  CHECK_FALSE(c.rho_positive);
  CHECK(std::isinf(c.floor));
  CHECK(c.delta1_small);
  CHECK(c.delta2_small);
}

TEST_CASE("compute constants with a positive margin") {
  const auto spec = linear_regression_problem(1);
  const auto c = compute_constants(spec, run_of(2000000, 1, 1, 0), 0.02, 0.02);
  CHECK(c.rho_positive);
  CHECK(rel_close(c.xi1, 0.030122481293270418));
  CHECK(rel_close(c.xi2, 0.21531534680992714));
  CHECK(rel_close(c.rho, 0.02631692281059783));
  CHECK(rel_close(c.floor, 0.5723024973333904));
  CHECK(c.good_event_prob_lower == 0.0);  // delta equals alpha - q/k
}

TEST_CASE("compute constants preconditions") {
  const auto spec = linear_regression_problem(5);
  CHECK(compute_constants(spec, run_of(1000, 10, 10, 1), 0.25, 0.1).C_alpha == doctest::Approx(3.0));
  CHECK_THROWS_AS(compute_constants(spec, run_of(1000, 10, 10, 3), 0.25, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(compute_constants(spec, run_of(1000, 10, 10, 1), 0.5, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(compute_constants(spec, run_of(1000, 10, 10, 1), 0.25, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(compute_constants(spec, run_of(1000, 10, 10, 1), 0.25, 0.0), std::invalid_argument);
}

TEST_CASE("property: xi1 and hence eta xi1 / rho scale like sqrt(k/N)") {
  const auto spec = linear_regression_problem(2);
  for (std::size_t N : {4000000ul, 8000000ul, 16000000ul}) {
    const auto base = compute_constants(spec, run_of(N, 1, 1, 0), 0.02, 0.02);
    const auto more = compute_constants(spec, run_of(4 * N, 1, 1, 0), 0.02, 0.02);
    CHECK(rel_close(more.xi1, base.xi1 / 2.0, 1e-14));
    REQUIRE(base.rho_positive);
    CHECK(rel_close(base.floor * base.rho / base.eta, base.xi1, 1e-14));
    CHECK(rel_close(more.floor * more.rho * 2.0, base.floor * base.rho, 1e-12));
  }
}

TEST_CASE("batch deviation") {
  const auto spec = linear_regression_problem(3);
  const ModelVector theta_star(Eigen::Vector3d(1, 0, -1));

  SUBCASE("large batch concentrates") {
    const ModelVector theta(Eigen::Vector3d(0.5, 0.5, 0.5));
    const auto shards = shard_dataset(generate_linear_regression(theta_star, 100000, 3), 4);
    CHECK(batch_deviation(spec, shards, theta, theta_star).norm() <= 0.05 * (1.0 + (theta - theta_star).norm()));
  }
  SUBCASE("noiseless at theta* is zero") {
    const auto shards = shard_dataset(generate_linear_regression(theta_star, 100, 4, 0.0), 2);
    CHECK(batch_deviation(spec, shards, theta_star, theta_star).norm() < 1e-14);
  }
  SUBCASE("single sample") {
    const auto shards = shard_dataset(generate_linear_regression(theta_star, 1, 5), 1);
    const ModelVector theta = ModelVector::Ones(3);
    const ModelVector expected = sample_gradient(spec, shards[0].samples[0], theta) - (theta - theta_star);
    CHECK((batch_deviation(spec, shards, theta, theta_star) - expected).norm() < 1e-15);
  }
  SUBCASE("unsupported loss") {
    auto opaque = spec;
    opaque.loss = std::make_shared<OpaqueLoss>();
    const auto shards = shard_dataset(generate_linear_regression(theta_star, 4, 5), 1);
    CHECK_THROWS_AS(batch_deviation(opaque, shards, theta_star, theta_star), UnsupportedOperation);
  }
}

TEST_CASE("theta grid") {
  const ModelVector star(Eigen::Vector2d(1, 1));
  const ModelVector zero = ModelVector::Zero(2);
  const auto grid = make_theta_grid(star, zero, 3.0, 50, 9);
  REQUIRE(grid.size() == 52);
  CHECK(grid[0] == star);
  CHECK(grid[1] == zero);
  for (std::size_t i = 2; i < grid.size(); ++i) CHECK((grid[i] - star).norm() <= 3.0);
  CHECK(make_theta_grid(star, zero, 3.0, 50, 9) == grid);
}

TEST_CASE("good event") {
  const auto spec = linear_regression_problem(3);
  const ModelVector star(Eigen::Vector3d(1, 2, 3));
  const RunConfig run = run_of(600, 12, 6, 1);
  const auto grid = make_theta_grid(star, ModelVector::Zero(3), 4.0, 10, 1);
  const auto gen = [&](std::uint64_t s) { return generate_linear_regression(star, 600, s); };
  TheoryConstants c = compute_constants(spec, run, 0.4, 0.2);

  SUBCASE("vacuous condition") {
    c.xi1 = c.xi2 = 1e9;
    const auto est = estimate_good_event(spec, run, star, c, grid, 10, 7, gen);
    CHECK(est.frequency == 1.0);
    CHECK(est.satisfied_batches == std::vector<std::size_t>(10, 6));
    CHECK(est.required_batches == doctest::Approx(6 * 0.6 + 1));
  }
  SUBCASE("impossible condition with noisy data") {
    c.xi1 = c.xi2 = 0.0;
    CHECK(estimate_good_event(spec, run, star, c, grid, 10, 7, gen).frequency == 0.0);
  }
  SUBCASE("single batch and single point is a norm comparison") {
    const auto shards = shard_dataset(gen(3), 12);
    const ModelVector theta(Eigen::Vector3d(0, 0, 0));
    const std::vector<ModelVector> one{theta};
    const double z = batch_deviation(spec, shards, theta, star).norm();
    c.xi2 = 0.1;
    const double rhs_base = 0.1 * (theta - star).norm();
    c.xi1 = c.C_alpha * z - rhs_base + 1e-9;
    CHECK(good_batches(spec, shards, 1, star, c, one) == std::vector<bool>{true});
    c.xi1 = c.C_alpha * z - rhs_base - 1e-9;
    CHECK(good_batches(spec, shards, 1, star, c, one) == std::vector<bool>{false});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(estimate_good_event(spec, run, star, c, grid, 0, 7, gen), std::invalid_argument);
    const auto shards = shard_dataset(gen(3), 12);
    CHECK_THROWS_AS(good_batches(spec, shards, 5, star, c, grid), std::invalid_argument);
    CHECK_THROWS_AS(good_batches(spec, shards, 6, star, c, std::vector<ModelVector>{}), std::invalid_argument);
  }
}

TEST_CASE("assumption spot checks at small scale") {
  const auto spec = linear_regression_problem(4);
  const ModelVector star(Eigen::Vector4d(1, -1, 0.5, 0));
  const ModelVector v(Eigen::Vector4d(1, 1, 0, 0));

  const auto g = check_gradient_mgf(spec, star, v, 0.5, 200000, 3);
  CHECK(g.passed);
  CHECK(g.bound == doctest::Approx(std::exp(0.25)));
  CHECK(g.empirical > 1.0);

  const ModelVector theta = star + ModelVector::Ones(4);
  const auto h = check_increment_mgf(spec, theta, star, v, 0.125, 200000, 4);
  CHECK(h.passed);
  CHECK_THROWS_AS(check_increment_mgf(spec, star, star, v, 0.1, 10, 4), std::invalid_argument);
  CHECK_THROWS_AS(check_gradient_mgf(spec, star, ModelVector::Zero(4), 0.1, 10, 4), std::invalid_argument);

  const auto s = check_hessian_bound(5, 500, 0.05, 40, 6);
  CHECK(s.norms.size() == 40);
  CHECK(s.passed);
  CHECK(s.bound == doctest::Approx(empirical_hessian_bound(500, 5, 0.05)));
}
