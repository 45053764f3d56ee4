#include <vector>

#include "core/errors.hpp"
#include "core/estimators.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace nsum;
using testsupport::make_survey;

TEST_CASE("degree estimation is the ratio of row sums to known size sums") {
  auto survey = make_survey({{1, 2}, {3, 4}}, {"a", "b"}, {100, 200}, 1000);
  auto degrees = estimate_degrees(survey);
  CHECK_FALSE(degrees.from_true());
  CHECK(degrees.full()[0] == 10.0);  // 1000*3/300
  CHECK(degrees.full()[1] == doctest::Approx(70.0 / 3.0).epsilon(1e-14));  // 1000*7/300
  REQUIRE(degrees.has_loo(0));
  REQUIRE(degrees.has_loo(1));
  CHECK(degrees.loo(0) == std::vector<double>{10.0, 20.0});  // only column b counts
  CHECK(degrees.loo(1) == std::vector<double>{10.0, 30.0});  // only column a counts
}

TEST_CASE("hidden columns never contribute to degree estimation") {
  auto with_hidden = make_survey({{1, 2, 9}, {3, 4, 9}}, {"a", "b", "h"},
                                 {100, 200, std::nullopt}, 1000);
  auto without = make_survey({{1, 2}, {3, 4}}, {"a", "b"}, {100, 200}, 1000);
  CHECK(estimate_degrees(with_hidden).full() == estimate_degrees(without).full());
  CHECK_FALSE(with_hidden.is_known(2));
  CHECK_FALSE(estimate_degrees(with_hidden).has_loo(2));
}

TEST_CASE("all-zero responses give zero degrees") {
  auto survey = make_survey({{0, 0}, {0, 0}}, {"a", "b"}, {100, 200}, 1000);
  auto degrees = estimate_degrees(survey);
  CHECK(degrees.full() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("a single known subpopulation has no leave-one-out degrees") {
  auto survey = make_survey({{1, 0}, {2, 1}}, {"a", "h"}, {100, std::nullopt}, 1000);
  auto degrees = estimate_degrees(survey);
  CHECK(degrees.full() == std::vector<double>{10.0, 20.0});
  CHECK_FALSE(degrees.has_loo(0));
  CHECK_THROWS_AS(degrees.loo(0), ValidationError);
  CHECK_THROWS_AS(scaleup_estimated_degrees(survey, degrees, 0, true), ValidationError);
}

TEST_CASE("degree estimates scale linearly in the total population") {
  auto small = make_survey({{1, 2}, {3, 4}}, {"a", "b"}, {100, 200}, 1000);
  auto large = make_survey({{1, 2}, {3, 4}}, {"a", "b"}, {100, 200}, 2000);
  auto ds = estimate_degrees(small);
  auto dl = estimate_degrees(large);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(dl.full()[i] == 2.0 * ds.full()[i]);
    CHECK(dl.loo(0)[i] == 2.0 * ds.loo(0)[i]);
  }
}

TEST_CASE("known-degree scale-up") {
  auto survey = make_survey({{5, 1}, {10, 1}}, {"k", "other"}, {400, 50}, 1000);
  std::vector<double> degrees{100.0, 100.0};

  SUBCASE("hand value") {
    auto estimate = scaleup_known_degrees(survey, degrees, 0);
    CHECK(estimate.value == 75.0);  // 1000 * 15 / 200
    CHECK(estimate.subpopulation == 0);
    CHECK(estimate.variant == "known-degree");
  }
  SUBCASE("all-zero column gives zero") {
    auto zero = make_survey({{0, 1}, {0, 1}}, {"k", "other"}, {400, 50}, 1000);
    CHECK(scaleup_known_degrees(zero, degrees, 0).value == 0.0);
  }
  SUBCASE("zero degree sum is an error") {
    std::vector<double> none{0.0, 0.0};
    CHECK_THROWS_AS(scaleup_known_degrees(survey, none, 0), ValidationError);
  }
}

TEST_CASE("known-degree scale-up recovers the size of a proportionally reported column") {
  // y_ik = d_i * N_k / N exactly, N_k = 500
  auto survey = make_survey({{50, 1}, {150, 1}}, {"k", "other"}, {500, 50}, 1000);
  std::vector<double> degrees{100.0, 300.0};
  CHECK(scaleup_known_degrees(survey, degrees, 0).value == 500.0);

  // multiplying every degree by c divides the estimate by c
  std::vector<double> doubled{200.0, 600.0};
  CHECK(scaleup_known_degrees(survey, doubled, 0).value == 250.0);
}

TEST_CASE("estimated-degree scale-up for a hidden subpopulation") {
  auto survey = make_survey({{1, 2, 2}, {3, 4, 2}}, {"a", "b", "h"},
                            {100, 200, std::nullopt}, 1000);
  auto degrees = estimate_degrees(survey);
  CHECK(degrees.full()[0] == 10.0);
  CHECK(degrees.full()[1] == doctest::Approx(70.0 / 3.0).epsilon(1e-14));

  auto estimate = scaleup_estimated_degrees(survey, degrees, 2, false);
  CHECK(estimate.value == doctest::Approx(120.0).epsilon(1e-12));  // 1000*4/(10+70/3)
  CHECK(estimate.variant == "estimated-degree");

  CHECK_THROWS_AS(scaleup_estimated_degrees(survey, degrees, 2, true), ValidationError);
}

TEST_CASE("leave-one-out scale-up of a known subpopulation") {
  auto survey = make_survey({{1, 2, 2}, {3, 4, 2}}, {"a", "b", "h"},
                            {100, 200, std::nullopt}, 1000);
  auto degrees = estimate_degrees(survey);
  auto estimate = scaleup_estimated_degrees(survey, degrees, 0, true);
  // d excluding a: [10, 20]; 1000 * (1+3) / 30
  CHECK(estimate.value == doctest::Approx(1000.0 * 4.0 / 30.0).epsilon(1e-12));
  CHECK(estimate.variant == "estimated-degree-loo");
}

TEST_CASE("equal degrees and proportional reporting reproduce known sizes exactly") {
  // d = 30 for everyone, y_ik = d * N_k / N
  auto survey = make_survey({{3, 6}, {3, 6}}, {"a", "b"}, {100, 200}, 1000);
  auto degrees = estimate_degrees(survey);
  CHECK(degrees.full() == std::vector<double>{30.0, 30.0});
  CHECK(scaleup_estimated_degrees(survey, degrees, 0, true).value == 100.0);
  CHECK(scaleup_estimated_degrees(survey, degrees, 1, true).value == 200.0);
}

TEST_CASE("perturbing a column never reaches its own leave-one-out degrees") {
  auto base = make_survey({{1, 2, 0}, {3, 4, 1}, {5, 6, 2}}, {"a", "b", "h"},
                          {100, 200, std::nullopt}, 1000);
  auto tweaked = make_survey({{9, 2, 0}, {0, 4, 1}, {7, 6, 2}}, {"a", "b", "h"},
                             {100, 200, std::nullopt}, 1000);
  auto d0 = estimate_degrees(base);
  auto d1 = estimate_degrees(tweaked);
  CHECK(d0.loo(0) == d1.loo(0));
  CHECK(d0.full() != d1.full());
}

TEST_CASE("supplied true degrees bypass estimation") {
  auto survey = make_survey({{1, 2}, {3, 4}}, {"a", "b"}, {100, 200}, 1000);
  auto degrees = true_degree_estimates(survey, {15.0, 25.0});
  CHECK(degrees.from_true());
  CHECK(degrees.full() == std::vector<double>{15.0, 25.0});
  CHECK(degrees.has_loo(0));
  CHECK(degrees.loo(0) == degrees.full());
  CHECK(degrees.loo(1) == degrees.full());

  CHECK_THROWS_AS(true_degree_estimates(survey, {15.0}), ValidationError);
  CHECK_THROWS_AS(true_degree_estimates(survey, {15.0, -1.0}), ValidationError);
}
