#include "core/estimators.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/internal.hpp"

namespace nsum {

using internal::exact_ratio;
using internal::integral_vector;
using internal::known_row_sums;
using internal::KnownSums;

bool DegreeEstimates::has_loo(std::size_t k) const {
  if (from_true_) return true;
  return k < loo_.size() && !loo_[k].empty();
}

const std::vector<double>& DegreeEstimates::loo(std::size_t k) const {
  if (from_true_) return full_;
  if (!has_loo(k))
    throw ValidationError("leave-one-out degrees unavailable for subpopulation index " +
                          std::to_string(k));
  return loo_[k];
}

DegreeEstimates DegreeEstimates::estimated(std::vector<double> full,
                                           std::vector<std::vector<double>> loo) {
  DegreeEstimates d;
  d.full_ = std::move(full);
  d.loo_ = std::move(loo);
  d.from_true_ = false;
  return d;
}

DegreeEstimates DegreeEstimates::true_degrees(std::vector<double> degrees) {
  DegreeEstimates d;
  d.full_ = std::move(degrees);
  d.from_true_ = true;
  return d;
}

DegreeEstimates estimate_degrees(const ArdSurvey& survey) {
  const std::int64_t total = survey.total_population();
  const std::int64_t size_sum = survey.known_size_sum();
  KnownSums sums = known_row_sums(survey);

  std::vector<double> full(survey.respondents());
  for (std::size_t r = 0; r < survey.respondents(); ++r)
    full[r] = exact_ratio(total, sums.per_row[r], size_sum);

  std::vector<std::vector<double>> loo(survey.subpopulations());
  for (std::size_t k : survey.known_indices()) {
    std::int64_t rest = size_sum - survey.known_size(k);
    if (rest <= 0) continue;  // single known subpopulation: no leave-one-out variant
    auto& row = loo[k];
    row.resize(survey.respondents());
    for (std::size_t r = 0; r < survey.respondents(); ++r)
      row[r] = exact_ratio(total, sums.per_row[r] - survey.responses().at(r, k), rest);
  }
  return DegreeEstimates::estimated(std::move(full), std::move(loo));
}

DegreeEstimates true_degree_estimates(const ArdSurvey& survey, std::vector<double> degrees) {
  if (degrees.size() != survey.respondents())
    throw ValidationError("true degree vector has " + std::to_string(degrees.size()) +
                          " entries for " + std::to_string(survey.respondents()) +
                          " respondents");
  for (double d : degrees)
    if (!(d > 0.0) || !std::isfinite(d))
      throw ValidationError("true degrees must be positive and finite");
  return DegreeEstimates::true_degrees(std::move(degrees));
}

SizeEstimate scaleup_known_degrees(const ArdSurvey& survey,
                                   std::span<const double> degrees, std::size_t k) {
  if (k >= survey.subpopulations())
    throw ValidationError("subpopulation index out of range");
  if (degrees.size() != survey.respondents())
    throw ValidationError("degree vector length does not match respondent count");

  std::int64_t numerator = survey.responses().col_sum(k);
  double value = 0.0;
  if (integral_vector(degrees)) {
    std::int64_t degree_sum = 0;
    for (double d : degrees) degree_sum += static_cast<std::int64_t>(d);
    if (degree_sum <= 0)
      throw ValidationError("degree sum is zero; scale-up is undefined");
    value = exact_ratio(survey.total_population(), numerator, degree_sum);
  } else {
    long double degree_sum = 0.0L;
    for (double d : degrees) degree_sum += d;
    if (!(degree_sum > 0.0L))
      throw ValidationError("degree sum is zero; scale-up is undefined");
    value = static_cast<double>(static_cast<long double>(survey.total_population()) *
                                numerator / degree_sum);
  }
  return {k, value, "known-degree"};
}

SizeEstimate scaleup_estimated_degrees(const ArdSurvey& survey,
                                       const DegreeEstimates& degrees,
                                       std::size_t k, bool loo) {
  if (k >= survey.subpopulations())
    throw ValidationError("subpopulation index out of range");
  if (degrees.full().size() != survey.respondents())
    throw ValidationError("degree estimates do not match respondent count");
  if (loo && !survey.is_known(k))
    throw ValidationError("leave-one-out scale-up is undefined for hidden subpopulation '" +
                          survey.label(k) + "'");

  const std::int64_t numerator = survey.responses().col_sum(k);
  const std::string variant = loo ? "estimated-degree-loo" : "estimated-degree";

  if (degrees.from_true()) {
    SizeEstimate est = scaleup_known_degrees(survey, degrees.full(), k);
    return {k, est.value, variant};
  }

  // Estimated degrees are N * rowsum / sizesum; the population size cancels,
  // leaving an exact integer ratio.
  KnownSums sums = known_row_sums(survey);
  std::int64_t resp_sum = sums.total;
  std::int64_t size_sum = survey.known_size_sum();
  if (loo) {
    if (!degrees.has_loo(k))
      throw ValidationError("leave-one-out degrees unavailable for subpopulation '" +
                            survey.label(k) + "'");
    resp_sum -= numerator;
    size_sum -= survey.known_size(k);
  }
  if (resp_sum <= 0)
    throw ValidationError("estimated degree sum is zero; scale-up for '" +
                          survey.label(k) + "' is undefined");
  double value = exact_ratio(numerator, size_sum, resp_sum);
  return {k, value, variant};
}

}  // namespace nsum
