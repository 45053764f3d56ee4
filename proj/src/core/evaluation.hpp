#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/adjustment.hpp"
#include "core/survey.hpp"
#include "json.hpp"

namespace nsum {

/// Where respondent degrees come from during evaluation: re-estimated from
/// the survey inside every fold, or a fixed externally known vector.
struct DegreesSource {
  enum class Kind { Estimated, TrueVector };
  Kind kind = Kind::Estimated;
  std::vector<double> degrees;  // used when kind == TrueVector

  static DegreesSource estimated() { return {}; }
  static DegreesSource true_vector(std::vector<double> values);
  std::string name() const;
};

struct EvaluationOptions {
  SubpopulationFilter filter;
  DeltaGuard guard;
  DegreesSource degrees;
  std::uint64_t seed = 0;  // provenance only; evaluation itself draws nothing
  int threads = 1;
};

/// One known subpopulation held out and re-estimated. `error` is set when the
/// fold produced no comparable pair of estimates (including guard failures);
/// such folds are excluded from the aggregates but kept in the report.
struct FoldResult {
  std::size_t subpopulation = 0;
  std::string label;
  std::int64_t truth = 0;
  std::optional<double> basic;
  std::optional<double> adjusted;
  std::optional<double> delta;
  std::optional<double> relative_error_basic;     // 100 * (truth - estimate) / truth
  std::optional<double> relative_error_adjusted;
  bool adjusted_better = false;
  bool clamped = false;
  std::string error;
};

struct EvaluationReport {
  std::vector<FoldResult> folds;
  std::size_t evaluated = 0;  // folds contributing to the aggregates
  std::size_t failed = 0;
  double mape_basic = 0.0;
  double mape_adjusted = 0.0;
  double percent_reduction = 0.0;
  double rmse_basic = 0.0;  // diagnostic only; MAPE is the primary metric
  double rmse_adjusted = 0.0;
  std::size_t adjusted_better_count = 0;
  std::string degrees_source;
  std::string filter_spec;
  std::string guard_spec;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  /// Tidy table, one row per subpopulation per estimator.
  std::string to_csv() const;
};

/// Treats each known subpopulation in turn as unknown, estimates it with and
/// without the degree-ratio adjustment, and aggregates the errors. Needs at
/// least three known subpopulations after filtering, since every fold must
/// leave two or more points for the second-stage line.
EvaluationReport evaluate_loo(const ArdSurvey& survey, const EvaluationOptions& options);

/// Tidy CSV for a serialized evaluation report (the to_json form).
std::string evaluation_csv(const nlohmann::json& report);

/// Mean of 100 * |truth - estimate| / truth.
double mape(std::span<const double> truths, std::span<const double> estimates);

/// 100 * (mape_basic - mape_adjusted) / mape_basic; negative when the
/// adjustment makes things worse.
double percent_reduction(double mape_basic, double mape_adjusted);

}  // namespace nsum
