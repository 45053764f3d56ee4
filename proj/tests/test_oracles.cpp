#include <cmath>
#include <vector>

#include "core/errors.hpp"
#include "core/estimators.hpp"
#include "core/oracles.hpp"
#include "core/simulators.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace nsum;
using testsupport::make_survey;

TEST_CASE("closed-form bias of the known-degree estimator") {
  PopulationTruth truth;
  truth.known_mean_degrees = {10.0, 30.0};
  truth.known_sizes = {100, 300};
  truth.hidden_mean_degree = 20.0;
  truth.frame_mean_degree = 25.0;
  truth.hidden_size = 50;
  truth.total_population = 1000;
  truth.validate();

  // 50 * (20/25 - 1)
  CHECK(bias_known_degrees(truth) == doctest::Approx(-10.0).epsilon(1e-12));
  // 50 * (20*400/(10*100 + 30*300) - 1)
  CHECK(bias_estimated_degrees(truth) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("reporting-bias formula") {
  std::vector<std::int64_t> degrees{10, 30};
  std::vector<double> f{0.9, 1.1};  // 1 + (d - 20) * 0.01
  // N_k * (sum d f / sum d - 1) = N_k * (42/40 - 1)
  CHECK(bias_fk(degrees, f, 1000) == doctest::Approx(50.0).epsilon(1e-12));

  BiasProfile profile;
  profile.exponents = {1.0};
  profile.coefficients = {0.01};
  CHECK(bias_fk(degrees, profile, 0, 1000) == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("reporting-bias formula agrees exactly with the estimator on expected data") {
  // degrees 100, 300; f = 1 + (d - 200)/1000 gives expected responses 9 and 33
  auto survey = make_survey({{9, 1}, {33, 1}}, {"k", "pad"}, {100, 50}, 1000);
  std::vector<double> degrees{100.0, 300.0};
  auto estimate = scaleup_known_degrees(survey, degrees, 0);
  CHECK(estimate.value == 105.0);  // 1000 * 42 / 400

  std::vector<std::int64_t> d{100, 300};
  std::vector<double> f{0.9, 1.1};
  CHECK(estimate.value - 100.0 == doctest::Approx(bias_fk(d, f, 100)).epsilon(1e-12));
}

TEST_CASE("slope of the coefficient-swept line, hand case") {
  std::vector<double> degrees{1.0, 2.0};
  std::vector<double> g{1.0, 2.0};
  CHECK(gamma1_closed_form(degrees, g, 1.0) == doctest::Approx(-7.5).epsilon(1e-12));

  std::vector<double> flat{3.0, 3.0};
  CHECK_THROWS_AS(gamma1_closed_form(degrees, flat, 1.0), ValidationError);
  CHECK_THROWS_AS(gamma1_closed_form(degrees, g, 0.0), ValidationError);
  std::vector<double> short_g{1.0};
  CHECK_THROWS_AS(gamma1_closed_form(degrees, short_g, 1.0), ValidationError);
}

TEST_CASE("two coefficient choices trace the same line as the closed form") {
  std::vector<double> degrees{1.0, 2.0};
  std::vector<double> g{1.0, 2.0};
  auto solve = gamma1_two_point(degrees, g, 1.0, 0.0, 0.1);
  CHECK(solve.gamma1 == doctest::Approx(-7.5).epsilon(1e-12));
  // at c = 0 the line passes through (5/3, 1): gamma0 = 1 + 7.5 * 5/3
  CHECK(solve.gamma0 == doctest::Approx(13.5).epsilon(1e-12));

  auto other = gamma1_two_point(degrees, g, 1.0, -0.2, 0.05);
  CHECK(std::abs(other.gamma1 - solve.gamma1) <= 1e-10 * std::abs(solve.gamma1));

  CHECK_THROWS_AS(gamma1_two_point(degrees, g, 1.0, 0.1, 0.1), ValidationError);
}

TEST_CASE("population truth extracted from an exact graph") {
  SbmConfig config;
  config.nodes = 7;
  config.groups = 2;
  config.group_sizes = {3, 4};
  config.within = {1.0, 1.0};
  config.between = 0.0;
  auto world = simulate_sbm(config);

  auto truth = population_truth(world, 0);
  CHECK(truth.hidden_size == 3);
  CHECK(truth.hidden_mean_degree == doctest::Approx(2.0).epsilon(1e-12));
  REQUIRE(truth.known_sizes == std::vector<std::int64_t>{4});
  CHECK(truth.known_mean_degrees[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(truth.frame_mean_degree == doctest::Approx(18.0 / 7.0).epsilon(1e-12));
  CHECK(truth.total_population == 7);

  CHECK(bias_known_degrees(truth) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(bias_estimated_degrees(truth) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("sampling-bias measurement is seeded and validated") {
  SbmConfig config;
  config.nodes = 400;
  config.groups = 4;
  config.seed = 3;
  auto world = simulate_sbm(config);

  auto a = srs_scaleup_bias(world, 1, 80, 60, 7);
  auto b = srs_scaleup_bias(world, 1, 80, 60, 7);
  CHECK(a.known.mean_bias == b.known.mean_bias);
  CHECK(a.estimated.mean_bias == b.estimated.mean_bias);
  CHECK(std::isfinite(a.known.std_error));
  CHECK(a.known.std_error > 0.0);

  CHECK_THROWS_AS(srs_scaleup_bias(world, 1, 0, 60, 7), ValidationError);
  CHECK_THROWS_AS(srs_scaleup_bias(world, 1, 10000, 60, 7), ValidationError);
  CHECK_THROWS_AS(srs_scaleup_bias(world, 1, 80, 1, 7), ValidationError);
}

TEST_CASE("flat reporting profiles leave the estimator unbiased in expectation") {
  BinomialSimConfig config;
  config.respondents = 400;
  config.subpopulations = 4;
  config.total_population = 100000;
  config.size_lo = 2000;
  config.size_hi = 20000;
  config.coefficients = std::vector<double>(4, 0.0);
  config.seed = 13;
  auto world = simulate_binomial(config);

  auto biases = binomial_scaleup_bias(world, 400, 21);
  REQUIRE(biases.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    double expected = bias_fk(world.true_degrees, world.profile(), k,
                              world.survey.known_size(k));
    CHECK(expected == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(std::abs(biases[k].mean_bias - expected) <= 4.0 * biases[k].std_error);
  }
}

TEST_CASE("the built-in cross-checks pass and the corruption hook trips them") {
  VerifyOptions options;
  options.quick = true;
  options.seed = 0;
  auto report = run_verification(options);
  CHECK(report.all_passed);
  CHECK(report.checks.size() >= 10);
  bool saw_line_check = false;
  for (const auto& check : report.checks) {
    CHECK(check.passed);
    CHECK(std::isfinite(check.observed));
    if (check.name == "slope-line.two-point") saw_line_check = true;
  }
  CHECK(saw_line_check);

  auto json = report.to_json();
  CHECK(json.at("all_passed") == true);
  CHECK(json.at("checks").is_array());

  VerifyOptions corrupted = options;
  corrupted.estimate_scale = 1.05;
  auto failing = run_verification(corrupted);
  CHECK_FALSE(failing.all_passed);
}
