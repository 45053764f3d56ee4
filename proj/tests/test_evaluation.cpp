#include <cmath>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/simulators.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace nsum;
using testsupport::make_survey;

namespace {

BinomialSimConfig eval_world_config(std::uint64_t seed) {
  BinomialSimConfig config;
  config.respondents = 1500;
  config.subpopulations = 12;
  config.total_population = 1000000;
  config.size_lo = 5000;
  config.size_hi = 100000;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("error metrics") {
  std::vector<double> truths{100.0, 200.0};
  std::vector<double> estimates{110.0, 180.0};
  CHECK(mape(truths, estimates) == doctest::Approx(10.0).epsilon(1e-12));

  CHECK(percent_reduction(10.0, 5.0) == 50.0);
  CHECK(percent_reduction(10.0, 12.0) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK(percent_reduction(0.0, 0.0) == 0.0);
  CHECK(std::isnan(percent_reduction(0.0, 1.0)));

  std::vector<double> empty;
  CHECK_THROWS_AS(mape(empty, empty), ValidationError);
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(mape(truths, one), ValidationError);
  std::vector<double> zero_truth{0.0, 1.0};
  CHECK_THROWS_AS(mape(zero_truth, estimates), ValidationError);
}

TEST_CASE("degree source naming") {
  CHECK(DegreesSource::estimated().name() == "estimated");
  CHECK(DegreesSource::true_vector({1.0, 2.0}).name() == "true");
}

TEST_CASE("leave-one-out evaluation needs three known subpopulations") {
  auto survey = make_survey({{1, 2, 0}, {3, 4, 1}}, {"a", "b", "h"},
                            {100, 200, std::nullopt}, 1000);
  EvaluationOptions options;
  CHECK_THROWS_AS(evaluate_loo(survey, options), ValidationError);
}

TEST_CASE("leave-one-out evaluation over a simulated world") {
  auto world = simulate_binomial(eval_world_config(101));
  EvaluationOptions options;
  options.seed = 101;
  auto report = evaluate_loo(world.survey, options);

  CHECK(report.folds.size() == 12);
  CHECK(report.evaluated == 12);
  CHECK(report.failed == 0);
  CHECK(report.degrees_source == "estimated");
  CHECK(report.filter_spec == "all");
  CHECK(report.guard_spec == "fail");
  CHECK(report.seed == 101);
  CHECK(report.adjusted_better_count <= report.evaluated);

  // aggregates recompute from the per-fold numbers
  double mean_basic = 0.0, mean_adjusted = 0.0;
  std::size_t better = 0;
  for (const auto& fold : report.folds) {
    REQUIRE(fold.error.empty());
    REQUIRE(fold.basic.has_value());
    REQUIRE(fold.adjusted.has_value());
    CHECK(fold.truth > 0);
    CHECK_FALSE(fold.label.empty());
    CHECK(*fold.relative_error_basic ==
          doctest::Approx(100.0 * (fold.truth - *fold.basic) / fold.truth).epsilon(1e-12));
    mean_basic += std::abs(*fold.relative_error_basic);
    mean_adjusted += std::abs(*fold.relative_error_adjusted);
    if (fold.adjusted_better) ++better;
  }
  mean_basic /= 12.0;
  mean_adjusted /= 12.0;
  CHECK(report.mape_basic == doctest::Approx(mean_basic).epsilon(1e-12));
  CHECK(report.mape_adjusted == doctest::Approx(mean_adjusted).epsilon(1e-12));
  CHECK(report.percent_reduction ==
        doctest::Approx(percent_reduction(mean_basic, mean_adjusted)).epsilon(1e-12));
  CHECK(report.adjusted_better_count == better);
  CHECK(report.rmse_basic > 0.0);
}

TEST_CASE("evaluation reports are bit-identical across thread counts") {
  auto world = simulate_binomial(eval_world_config(7));
  EvaluationOptions one;
  one.threads = 1;
  EvaluationOptions four;
  four.threads = 4;
  auto a = evaluate_loo(world.survey, one);
  auto b = evaluate_loo(world.survey, four);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("filters restrict the evaluated columns") {
  auto world = simulate_binomial(eval_world_config(19));
  EvaluationOptions options;
  options.filter = SubpopulationFilter::parse("exclude:sp01,sp02");
  auto report = evaluate_loo(world.survey, options);
  CHECK(report.folds.size() == 10);
  CHECK(report.filter_spec == "exclude:sp01,sp02");
  for (const auto& fold : report.folds) {
    CHECK(fold.label != "sp01");
    CHECK(fold.label != "sp02");
  }
}

TEST_CASE("true degree vectors flow through evaluation") {
  auto world = simulate_binomial(eval_world_config(23));
  EvaluationOptions options;
  options.degrees = DegreesSource::true_vector(world.true_degrees_real());
  auto report = evaluate_loo(world.survey, options);
  CHECK(report.degrees_source == "true");
  CHECK(report.evaluated == 12);

  EvaluationOptions wrong;
  wrong.degrees = DegreesSource::true_vector({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(evaluate_loo(world.survey, wrong), ValidationError);
}

TEST_CASE("a tight clamp is applied and reported, never silent") {
  auto world = simulate_binomial(eval_world_config(31));
  EvaluationOptions options;
  options.guard = DeltaGuard::parse("clamp:0.999,1.001");
  auto report = evaluate_loo(world.survey, options);
  CHECK(report.guard_spec == "clamp:0.999,1.001");
  std::size_t clamped = 0;
  for (const auto& fold : report.folds) {
    if (fold.clamped) {
      ++clamped;
      REQUIRE(fold.delta.has_value());
      CHECK(*fold.delta >= 0.999);
      CHECK(*fold.delta <= 1.001);
    }
  }
  CHECK(clamped > 0);
  CHECK(report.to_csv().find("clamped") != std::string::npos);
}

TEST_CASE("a dead target column fails its fold without sinking the others") {
  auto world = simulate_binomial(eval_world_config(43));
  IntMatrix zeroed = world.survey.responses();
  for (std::size_t r = 0; r < zeroed.rows(); ++r) zeroed.at(r, 0) = 0;
  ArdSurvey survey(std::move(zeroed), world.survey.labels(), world.survey.sizes(),
                   world.survey.total_population());

  EvaluationOptions options;
  auto report = evaluate_loo(survey, options);
  CHECK(report.failed == 1);
  CHECK(report.evaluated == 11);
  CHECK_FALSE(report.folds[0].error.empty());
  for (std::size_t k = 1; k < report.folds.size(); ++k) CHECK(report.folds[k].error.empty());
}

TEST_CASE("report serialization") {
  auto world = simulate_binomial(eval_world_config(57));
  EvaluationOptions options;
  auto report = evaluate_loo(world.survey, options);
  auto j = report.to_json();

  CHECK(j.at("degrees") == "estimated");
  CHECK(j.at("subpopulations").size() == 12);
  CHECK(j.at("evaluated") == 12);
  const auto& aggregate = j.at("aggregate");
  CHECK(aggregate.contains("mape_basic"));
  CHECK(aggregate.contains("mape_adjusted"));
  CHECK(aggregate.contains("percent_reduction"));
  CHECK(aggregate.contains("adjusted_better"));
  const auto& first = j.at("subpopulations").at(0);
  for (const char* key : {"subpopulation", "truth", "basic", "adjusted", "delta",
                          "relative_error_basic", "relative_error_adjusted",
                          "adjusted_better", "clamped"}) {
    CHECK(first.contains(key));
  }

  auto csv = evaluation_csv(j);
  CHECK(csv.rfind("subpopulation,estimator,truth,estimate,relative_error,note\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 * 12);  // header plus basic and adjusted rows per fold

  CHECK_THROWS_AS(evaluation_csv(nlohmann::json::object()), ValidationError);
  CHECK_THROWS_AS(evaluation_csv(nlohmann::json(4)), ValidationError);
}
