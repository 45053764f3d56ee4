#include <cmath>
#include <vector>

#include "core/adjustment.hpp"
#include "core/errors.hpp"
#include "core/estimators.hpp"
#include "core/simulators.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace nsum;
using testsupport::make_survey;

namespace {

// Three respondents with degrees 1,2,3. Column A reports proportionally to
// degree, column B uniformly, hidden column H anti-proportionally, so the
// first-stage slopes are 0.5, 0 and -0.5 and the second-stage line through
// (0.5, 300/600) and (0, 60/600) is ratio = 0.1 + 0.8*slope. At H's slope the
// predicted inverse ratio is -0.3, which trips the guard.
ArdSurvey guard_survey() {
  return make_survey({{1, 2, 3}, {2, 2, 2}, {3, 2, 1}}, {"A", "B", "H"},
                     {300, 60, std::nullopt}, 600);
}

}  // namespace

TEST_CASE("response scaling divides by the column mean") {
  CHECK(scale_responses(std::vector<std::int64_t>{0, 2, 4}) ==
        std::vector<double>{0.0, 1.0, 2.0});
  CHECK(scale_responses(std::vector<std::int64_t>{5, 5, 5}) ==
        std::vector<double>{1.0, 1.0, 1.0});
  CHECK_THROWS_AS(scale_responses(std::vector<std::int64_t>{0, 0, 0}), ValidationError);
}

TEST_CASE("scaled responses average to one") {
  std::vector<std::int64_t> column{3, 0, 7, 11, 2, 2, 19, 5};
  auto z = scale_responses(column);
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("least squares on exact lines") {
  std::vector<double> x1{1, 2, 3}, y1{2, 4, 6};
  auto fit1 = ols(x1, y1);
  CHECK(fit1.slope == 2.0);
  CHECK(fit1.intercept == 0.0);
  CHECK(fit1.r_squared == 1.0);
  CHECK(fit1.residual_variance == 0.0);
  CHECK(fit1.n_points == 3);

  std::vector<double> x2{10, 20, 30}, y2{0, 1, 2};
  auto fit2 = ols(x2, y2);
  CHECK(fit2.slope == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(fit2.intercept == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("least squares rejects degenerate inputs") {
  std::vector<double> constant{4, 4, 4}, y{1, 2, 3}, one{1.0};
  CHECK_THROWS_AS(ols(constant, y), ValidationError);
  CHECK_THROWS_AS(ols(one, one), ValidationError);
  std::vector<double> x{1, 2}, y3{1, 2, 3};
  CHECK_THROWS_AS(ols(x, y3), ValidationError);
}

TEST_CASE("least squares recovers affine coefficients to 1e-10") {
  std::vector<double> x{0.13, 1.7, 2.4, 3.9, 7.2, 11.05, 13.8};
  std::vector<double> y(x.size());
  const double intercept = 3.5, slope = -0.25;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = intercept + slope * x[i];
  auto fit = ols(x, y);
  CHECK(std::abs(fit.slope - slope) <= 1e-10 * std::abs(slope));
  CHECK(std::abs(fit.intercept - intercept) <= 1e-10 * std::abs(intercept));
}

TEST_CASE("guard spec parsing") {
  CHECK(DeltaGuard::parse("fail").mode == DeltaGuard::Mode::Fail);
  CHECK(DeltaGuard::parse("").mode == DeltaGuard::Mode::Fail);
  auto bare = DeltaGuard::parse("clamp");
  CHECK(bare.mode == DeltaGuard::Mode::Clamp);
  CHECK(bare.lo == 0.1);
  CHECK(bare.hi == 10.0);
  auto bounds = DeltaGuard::parse("clamp:0.5,2");
  CHECK(bounds.lo == 0.5);
  CHECK(bounds.hi == 2.0);
  CHECK(bounds.spec() == "clamp:0.5,2");
  CHECK(DeltaGuard::parse("fail").spec() == "fail");

  CHECK_THROWS_AS(DeltaGuard::parse("clamp:2,0.5"), ValidationError);
  CHECK_THROWS_AS(DeltaGuard::parse("clamp:0,5"), ValidationError);
  CHECK_THROWS_AS(DeltaGuard::parse("clamp:a,b"), ValidationError);
  CHECK_THROWS_AS(DeltaGuard::parse("clamp:5"), ValidationError);
  CHECK_THROWS_AS(DeltaGuard::parse("never"), ValidationError);
}

TEST_CASE("guard application") {
  DeltaGuard fail;  // default
  DeltaGuard clamp = DeltaGuard::parse("clamp:0.1,10");

  SUBCASE("a positive prediction inverts into the degree ratio") {
    auto out = apply_guard(800.0, 1.25, fail);
    CHECK(out.delta == 0.8);
    CHECK(out.adjusted == 1000.0);
    CHECK_FALSE(out.clamped);
    CHECK(out.note.empty());
  }
  SUBCASE("nonpositive predictions fail by default") {
    for (double bad : {-0.1, 0.0}) {
      auto out = apply_guard(800.0, bad, fail);
      CHECK_FALSE(out.delta.has_value());
      CHECK_FALSE(out.adjusted.has_value());
      CHECK(out.note.find("not positive") != std::string::npos);
    }
  }
  SUBCASE("clamping a nonpositive prediction pins the ratio at the upper bound") {
    auto out = apply_guard(800.0, -0.1, clamp);
    CHECK(out.delta == 10.0);
    CHECK(out.adjusted == 80.0);
    CHECK(out.clamped);
    CHECK_FALSE(out.note.empty());
  }
  SUBCASE("in-range ratios pass through a clamp guard untouched") {
    auto out = apply_guard(800.0, 1.25, clamp);
    CHECK(out.delta == 0.8);
    CHECK_FALSE(out.clamped);
  }
  SUBCASE("out-of-range ratios are pulled to the nearer bound") {
    auto high = apply_guard(100.0, 0.05, clamp);  // ratio 20
    CHECK(high.delta == 10.0);
    CHECK(high.adjusted == doctest::Approx(10.0));
    CHECK(high.clamped);

    auto low = apply_guard(100.0, 1.0, DeltaGuard::parse("clamp:2,3"));  // ratio 1
    CHECK(low.delta == 2.0);
    CHECK(low.adjusted == 50.0);
    CHECK(low.clamped);
  }
}

TEST_CASE("first-stage slopes on exactly proportional data") {
  // degrees 100,200,300; every column proportional to degree
  auto survey = make_survey({{10, 20, 5}, {20, 40, 10}, {30, 60, 15}}, {"a", "b", "h"},
                            {1000, 2000, std::nullopt}, 10000);
  auto degrees = estimate_degrees(survey);
  CHECK(degrees.full() == std::vector<double>{100.0, 200.0, 300.0});

  auto slopes = first_stage_slopes(survey, degrees);
  REQUIRE(slopes.size() == 3);
  for (const auto& s : slopes) {
    REQUIRE(s.fit.has_value());
    CHECK(s.error.empty());
    // z ranges over 0.5,1,1.5 while the regressor spans 100..300
    CHECK(s.fit->slope == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(s.fit->intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(s.fit->r_squared == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("first-stage failures are recorded per column, not thrown") {
  auto zero_hidden = make_survey({{1, 2, 0}, {3, 4, 0}, {2, 1, 0}}, {"a", "b", "h"},
                                 {100, 200, std::nullopt}, 1000);
  auto slopes = first_stage_slopes(zero_hidden, estimate_degrees(zero_hidden));
  REQUIRE(slopes.size() == 3);
  CHECK(slopes[0].fit.has_value());
  CHECK(slopes[1].fit.has_value());
  CHECK_FALSE(slopes[2].fit.has_value());
  CHECK(slopes[2].error.find("all zero") != std::string::npos);

  // a single known subpopulation has no leave-one-out degrees for itself
  auto single = make_survey({{1, 1}, {2, 3}, {3, 2}}, {"a", "h"}, {100, std::nullopt}, 1000);
  auto single_slopes = first_stage_slopes(single, estimate_degrees(single));
  CHECK_FALSE(single_slopes[0].fit.has_value());
  CHECK_FALSE(single_slopes[0].error.empty());
  CHECK(single_slopes[1].fit.has_value());
}

TEST_CASE("second-stage regression recovers an exact affine relation") {
  std::vector<double> slopes{0.001, 0.002, 0.003};
  std::vector<double> ratios{2.1, 2.2, 2.3};  // 2 + 100 * slope
  auto fit = fit_second_stage(slopes, ratios);
  CHECK(std::abs(fit.slope - 100.0) <= 1e-10 * 100.0);
  CHECK(std::abs(fit.intercept - 2.0) <= 1e-10 * 2.0);

  std::vector<double> one_slope{0.001}, one_ratio{2.1};
  CHECK_THROWS_AS(fit_second_stage(one_slope, one_ratio), ValidationError);
  std::vector<double> flat{0.002, 0.002}, two{2.1, 2.2};
  CHECK_THROWS_AS(fit_second_stage(flat, two), ValidationError);
}

TEST_CASE("the fitted line reproduces hand-computed adjustments") {
  auto survey = guard_survey();
  auto degrees = true_degree_estimates(survey, {1.0, 2.0, 3.0});
  auto fit = fit_adjustment(survey, degrees, DeltaGuard{});

  REQUIRE(fit.first_stage.size() == 3);
  CHECK(fit.first_stage[0].fit->slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.first_stage[1].fit->slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(fit.first_stage[2].fit->slope == doctest::Approx(-0.5).epsilon(1e-12));

  REQUIRE(fit.points.size() == 2);
  CHECK(fit.second_stage.intercept == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(fit.second_stage.slope == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(fit.second_stage.n_points == 2);

  REQUIRE(fit.subpopulations.size() == 3);
  // both known columns sit exactly on the two-point line, so the adjustment
  // returns their true sizes
  CHECK(*fit.subpopulations[0].adjusted == doctest::Approx(300.0).epsilon(1e-10));
  CHECK(*fit.subpopulations[1].adjusted == doctest::Approx(60.0).epsilon(1e-10));
  // the hidden column's prediction is negative, so no adjusted value
  CHECK_FALSE(fit.subpopulations[2].adjusted.has_value());
  CHECK_FALSE(fit.subpopulations[2].note.empty());
}

TEST_CASE("a hidden target with a nonpositive prediction is a guarded failure") {
  auto survey = guard_survey();
  auto degrees = true_degree_estimates(survey, {1.0, 2.0, 3.0});

  auto failed = adjust(survey, degrees, 2, DeltaGuard{});
  CHECK(failed.guard_failed);
  CHECK(failed.basic == doctest::Approx(600.0).epsilon(1e-12));
  CHECK(failed.predicted_inverse_ratio == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK_FALSE(failed.adjusted.has_value());
  CHECK_FALSE(failed.delta.has_value());
  CHECK(failed.note.find("not positive") != std::string::npos);

  auto clamped = adjust(survey, degrees, 2, DeltaGuard::parse("clamp:0.1,10"));
  CHECK_FALSE(clamped.guard_failed);
  CHECK(clamped.clamped);
  CHECK(*clamped.delta == 10.0);
  CHECK(*clamped.adjusted == doctest::Approx(60.0).epsilon(1e-12));
  CHECK_FALSE(clamped.note.empty());
}

TEST_CASE("adjusting a known target needs two other usable known columns") {
  auto survey = guard_survey();
  auto degrees = true_degree_estimates(survey, {1.0, 2.0, 3.0});
  // reclassifying A as hidden leaves only B known
  CHECK_THROWS_AS(adjust(survey, degrees, 0, DeltaGuard{}), ValidationError);
}

TEST_CASE("adjusting a known target excludes it from every stage") {
  BinomialSimConfig config;
  config.respondents = 400;
  config.subpopulations = 8;
  config.total_population = 100000;
  config.size_lo = 500;
  config.size_hi = 5000;
  config.seed = 11;
  auto world = simulate_binomial(config);
  const auto& survey = world.survey;
  auto degrees = estimate_degrees(survey);

  const std::size_t target = 3;
  auto run = adjust(survey, degrees, target, DeltaGuard{});
  CHECK(run.target == target);

  // the second stage never contains the target's own point
  CHECK(run.fit.points.size() == survey.known_count() - 1);
  for (const auto& point : run.fit.points) CHECK(point.subpopulation != target);

  // the basic estimate is the leave-one-out scale-up
  auto loo = scaleup_estimated_degrees(survey, degrees, target, true);
  CHECK(run.basic == loo.value);

  if (run.adjusted) {
    CHECK(*run.adjusted == doctest::Approx(run.basic * run.predicted_inverse_ratio));
    CHECK(*run.delta == doctest::Approx(1.0 / run.predicted_inverse_ratio));
  }

  // editing the target's known size changes nothing the adjustment reads
  IntMatrix copy = survey.responses();
  auto sizes = survey.sizes();
  sizes[target] = *sizes[target] * 7;
  ArdSurvey edited(std::move(copy), survey.labels(), std::move(sizes),
                   survey.total_population(), survey.row_ids(), survey.dropped_rows());
  auto rerun = adjust(edited, degrees, target, DeltaGuard{});
  CHECK(rerun.basic == run.basic);
  CHECK(rerun.predicted_inverse_ratio == run.predicted_inverse_ratio);
  REQUIRE(rerun.adjusted.has_value() == run.adjusted.has_value());
  if (run.adjusted) CHECK(*rerun.adjusted == *run.adjusted);
}

TEST_CASE("respondent order changes no adjustment output") {
  BinomialSimConfig config;
  config.respondents = 300;
  config.subpopulations = 10;
  config.total_population = 100000;
  config.size_lo = 500;
  config.size_hi = 5000;
  config.seed = 5;
  auto world = simulate_binomial(config);
  const auto& survey = world.survey;

  IntMatrix reversed(survey.respondents(), survey.subpopulations());
  for (std::size_t r = 0; r < survey.respondents(); ++r)
    for (std::size_t c = 0; c < survey.subpopulations(); ++c)
      reversed.at(r, c) = survey.responses().at(survey.respondents() - 1 - r, c);
  ArdSurvey permuted(std::move(reversed), survey.labels(), survey.sizes(),
                     survey.total_population());

  auto fit_a = fit_adjustment(survey, estimate_degrees(survey), DeltaGuard{});
  auto fit_b = fit_adjustment(permuted, estimate_degrees(permuted), DeltaGuard{});

  CHECK(fit_a.second_stage.slope == fit_b.second_stage.slope);
  CHECK(fit_a.second_stage.intercept == fit_b.second_stage.intercept);
  REQUIRE(fit_a.first_stage.size() == fit_b.first_stage.size());
  for (std::size_t k = 0; k < fit_a.first_stage.size(); ++k) {
    REQUIRE(fit_a.first_stage[k].fit.has_value() == fit_b.first_stage[k].fit.has_value());
    if (fit_a.first_stage[k].fit)
      CHECK(fit_a.first_stage[k].fit->slope == fit_b.first_stage[k].fit->slope);
  }
  for (std::size_t k = 0; k < fit_a.subpopulations.size(); ++k) {
    const auto& a = fit_a.subpopulations[k];
    const auto& b = fit_b.subpopulations[k];
    REQUIRE(a.adjusted.has_value() == b.adjusted.has_value());
    if (a.adjusted) CHECK(*a.adjusted == *b.adjusted);
  }
}

TEST_CASE("second-stage residuals shrink as the survey grows") {
  BinomialSimConfig small;
  small.respondents = 1000;
  small.subpopulations = 20;
  small.seed = 42;
  BinomialSimConfig large = small;
  large.respondents = 8000;

  auto world_small = simulate_binomial(small);
  auto world_large = simulate_binomial(large);
  auto fit_small = fit_adjustment(world_small.survey, estimate_degrees(world_small.survey),
                                  DeltaGuard{});
  auto fit_large = fit_adjustment(world_large.survey, estimate_degrees(world_large.survey),
                                  DeltaGuard{});

  CHECK(fit_large.second_stage.residual_variance < fit_small.second_stage.residual_variance);
  CHECK(fit_large.second_stage.r_squared > 0.9);
}
