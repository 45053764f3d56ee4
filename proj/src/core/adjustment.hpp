#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/estimators.hpp"
#include "core/survey.hpp"

namespace nsum {

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual_variance = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

/// Ordinary least squares of y on x. Errors on fewer than two points or a
/// constant regressor.
OlsFit ols(std::span<const double> x, std::span<const double> y);

/// Divides a response column by its mean, so the result averages to one.
/// Errors when the column is all zero.
std::vector<double> scale_responses(std::span<const std::int64_t> column);

/// Policy for a nonpositive predicted inverse degree ratio (and for predicted
/// ratios outside plausible bounds). Default: fail with a diagnostic. A clamp
/// range can be configured instead; clamping is always reported, never silent.
struct DeltaGuard {
  enum class Mode { Fail, Clamp };
  Mode mode = Mode::Fail;
  double lo = 0.1;
  double hi = 10.0;

  static DeltaGuard parse(const std::string& spec);  // "fail" | "clamp:<lo>,<hi>"
  std::string spec() const;
};

struct GuardOutcome {
  std::optional<double> delta;     // degree ratio estimate
  std::optional<double> adjusted;  // adjusted size estimate
  bool clamped = false;
  std::string note;
};

/// Applies the guard to a basic estimate and the predicted inverse degree
/// ratio from the second-stage line.
GuardOutcome apply_guard(double basic, double inverse_ratio, const DeltaGuard& guard);

struct FirstStageSlope {
  std::size_t subpopulation = 0;
  std::optional<OlsFit> fit;
  std::string error;  // set when the regression is undefined for this column
};

/// Regresses each scaled response column on the degree estimates: known
/// columns on their leave-one-out degrees, hidden columns on the full ones.
/// Failures (all-zero column, degenerate regressor) are recorded, not thrown.
std::vector<FirstStageSlope> first_stage_slopes(const ArdSurvey& survey,
                                                const DegreeEstimates& degrees);

/// Regresses size ratios (true size over leave-one-out estimate) on the
/// first-stage slopes.
OlsFit fit_second_stage(std::span<const double> slopes, std::span<const double> ratios);

struct SecondStagePoint {
  std::size_t subpopulation = 0;
  double slope = 0.0;
  double ratio = 0.0;
};

struct SubpopulationAdjustment {
  std::size_t subpopulation = 0;
  std::optional<double> basic;   // size estimate before adjustment
  std::optional<double> delta;   // predicted degree ratio
  std::optional<double> adjusted;
  bool clamped = false;
  std::string note;
};

/// First stage, second stage and per-subpopulation adjusted sizes in one
/// bundle. The second stage uses every known subpopulation with a usable
/// slope and ratio.
struct AdjustmentFit {
  std::vector<FirstStageSlope> first_stage;
  OlsFit second_stage;
  std::vector<SecondStagePoint> points;
  std::vector<SubpopulationAdjustment> subpopulations;
};

AdjustmentFit fit_adjustment(const ArdSurvey& survey, const DegreeEstimates& degrees,
                             const DeltaGuard& guard);

struct TargetAdjustment {
  std::size_t target = 0;
  double basic = 0.0;
  double predicted_inverse_ratio = 0.0;
  std::optional<double> delta;
  std::optional<double> adjusted;
  bool clamped = false;
  bool guard_failed = false;
  std::string note;
  AdjustmentFit fit;
};

/// Adjusted scale-up for one target subpopulation. A hidden target uses the
/// fit as-is. A known target is first reclassified as hidden, so nothing about
/// it (its size, its column's role in degree estimation, its second-stage
/// point) leaks into its own estimate; with estimated degrees these are
/// re-derived on the reduced survey.
TargetAdjustment adjust(const ArdSurvey& survey, const DegreeEstimates& degrees,
                        std::size_t target, const DeltaGuard& guard);

}  // namespace nsum
