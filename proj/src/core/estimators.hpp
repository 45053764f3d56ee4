#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/survey.hpp"

namespace nsum {

/// Personal network size estimates for every respondent. `full` uses all
/// known subpopulations; `loo(k)` excludes subpopulation k from both sums so
/// that estimates about k never feed on k's own column. When built from true
/// degrees the leave-one-out variants equal `full`.
class DegreeEstimates {
 public:
  const std::vector<double>& full() const { return full_; }
  bool from_true() const { return from_true_; }
  bool has_loo(std::size_t k) const;
  const std::vector<double>& loo(std::size_t k) const;

  static DegreeEstimates estimated(std::vector<double> full,
                                   std::vector<std::vector<double>> loo);
  static DegreeEstimates true_degrees(std::vector<double> degrees);

 private:
  std::vector<double> full_;
  std::vector<std::vector<double>> loo_;  // indexed by subpopulation, empty = unavailable
  bool from_true_ = false;
};

/// d_i = N * (responses of i across known subpopulations) / (their size sum),
/// plus the leave-one-out variant per known subpopulation.
DegreeEstimates estimate_degrees(const ArdSurvey& survey);

/// Wraps an externally known degree vector (e.g. graph truth) in the same
/// interface. Values must be positive; length must match the respondent count.
DegreeEstimates true_degree_estimates(const ArdSurvey& survey, std::vector<double> degrees);

struct SizeEstimate {
  std::size_t subpopulation = 0;
  double value = 0.0;
  std::string variant;  // "known-degree" | "estimated-degree" | "estimated-degree-loo"
};

/// Basic scale-up with caller-supplied degrees:
/// N_k = N * sum_i y_ik / sum_i d_i.
SizeEstimate scaleup_known_degrees(const ArdSurvey& survey,
                                   std::span<const double> degrees, std::size_t k);

/// Basic scale-up with estimated degrees. With loo=true (known k only) the
/// denominator excludes k's column and size.
SizeEstimate scaleup_estimated_degrees(const ArdSurvey& survey,
                                       const DegreeEstimates& degrees,
                                       std::size_t k, bool loo);

}  // namespace nsum
