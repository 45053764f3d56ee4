#include "core/adjustment.hpp"

#include <cmath>
#include <sstream>

#include "core/errors.hpp"
#include "core/internal.hpp"

namespace nsum {

namespace {

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// Shared tail of a simple regression once the centered cross-moments are
// known. sxy/sxx/syy are the raw combinations n*sum_xy - sum_x*sum_y etc.;
// alpha scales the regressor, beta the response, whose scaled mean is exactly
// one (responses are scaled by their own mean).
OlsFit finish_first_stage(long double sxy, long double sxx, long double syy,
                          long double n, long double xbar_raw,
                          long double alpha, long double beta) {
  OlsFit fit;
  fit.n_points = static_cast<std::size_t>(n);
  if (!(sxx > 0.0L))
    throw ValidationError("regressor has zero variance");
  long double slope_raw = sxy / sxx;
  long double slope = slope_raw * (beta / alpha);
  fit.slope = static_cast<double>(slope);
  fit.intercept = static_cast<double>(1.0L - slope * alpha * xbar_raw);
  if (syy > 0.0L) {
    long double r2 = (sxy * sxy) / (sxx * syy);
    fit.r_squared = static_cast<double>(std::min(1.0L, r2));
    long double sse = beta * beta * (syy - sxy * sxy / sxx) / n;
    if (sse < 0.0L) sse = 0.0L;
    fit.residual_variance = n > 2 ? static_cast<double>(sse / (n - 2)) : 0.0;
  } else {
    fit.r_squared = 1.0;
    fit.residual_variance = 0.0;
  }
  return fit;
}

}  // namespace

OlsFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("regression inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw ValidationError("regression needs at least 2 points");

  long double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double xi = x[i], yi = y[i];
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
    syy += yi * yi;
  }
  const long double nn = static_cast<long double>(n);
  long double Sxx = nn * sxx - sx * sx;
  long double Sxy = nn * sxy - sx * sy;
  long double Syy = nn * syy - sy * sy;
  if (!(Sxx > 0.0L) || Sxx <= 1e-12L * sxx * nn)
    throw ValidationError("regressor is constant; slope is undefined");

  OlsFit fit;
  fit.n_points = n;
  long double slope = Sxy / Sxx;
  fit.slope = static_cast<double>(slope);
  fit.intercept = static_cast<double>((sy - slope * sx) / nn);
  if (Syy > 0.0L) {
    long double r2 = (Sxy * Sxy) / (Sxx * Syy);
    fit.r_squared = static_cast<double>(std::min(1.0L, r2));
    long double sse = (Syy - Sxy * Sxy / Sxx) / nn;
    if (sse < 0.0L) sse = 0.0L;
    fit.residual_variance = n > 2 ? static_cast<double>(sse / (nn - 2)) : 0.0;
  } else {
    fit.r_squared = 1.0;
    fit.residual_variance = 0.0;
  }
  return fit;
}

std::vector<double> scale_responses(std::span<const std::int64_t> column) {
  std::int64_t sum = 0;
  for (std::int64_t v : column) sum += v;
  if (sum == 0)
    throw ValidationError("response column is all zero; cannot scale to mean one");
  std::vector<double> z(column.size());
  for (std::size_t i = 0; i < column.size(); ++i)
    z[i] = internal::exact_ratio(column[i], static_cast<std::int64_t>(column.size()), sum);
  return z;
}

DeltaGuard DeltaGuard::parse(const std::string& spec) {
  DeltaGuard g;
  if (spec.empty() || spec == "fail") return g;
  if (spec == "clamp") {
    g.mode = Mode::Clamp;
    return g;
  }
  if (spec.rfind("clamp:", 0) == 0) {
    g.mode = Mode::Clamp;
    std::string rest = spec.substr(6);
    auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw ValidationError("guard spec '" + spec + "' needs 'clamp:<lo>,<hi>'");
    try {
      g.lo = std::stod(rest.substr(0, comma));
      g.hi = std::stod(rest.substr(comma + 1));
    } catch (const std::exception&) {
      throw ValidationError("guard spec '" + spec + "' has non-numeric bounds");
    }
    if (!(g.lo > 0.0) || !(g.hi > g.lo))
      throw ValidationError("guard bounds must satisfy 0 < lo < hi");
    return g;
  }
  throw ValidationError("unknown guard spec '" + spec + "' (expected 'fail' or 'clamp:<lo>,<hi>')");
}

std::string DeltaGuard::spec() const {
  if (mode == Mode::Fail) return "fail";
  return "clamp:" + format_number(lo) + "," + format_number(hi);
}

GuardOutcome apply_guard(double basic, double inverse_ratio, const DeltaGuard& guard) {
  GuardOutcome out;
  if (!std::isfinite(inverse_ratio) || inverse_ratio <= 0.0) {
    if (guard.mode == DeltaGuard::Mode::Fail) {
      out.note = "predicted inverse degree ratio " + format_number(inverse_ratio) +
                 " is not positive";
      return out;
    }
    out.delta = guard.hi;
    out.clamped = true;
    out.note = "inverse degree ratio " + format_number(inverse_ratio) +
               " is not positive; degree ratio clamped to " + format_number(guard.hi);
    out.adjusted = basic / *out.delta;
    return out;
  }
  double delta = 1.0 / inverse_ratio;
  if (guard.mode == DeltaGuard::Mode::Clamp && (delta < guard.lo || delta > guard.hi)) {
    double clamped = std::min(std::max(delta, guard.lo), guard.hi);
    out.delta = clamped;
    out.clamped = true;
    out.note = "degree ratio " + format_number(delta) + " clamped to " + format_number(clamped);
    out.adjusted = basic / clamped;
    return out;
  }
  out.delta = delta;
  out.adjusted = basic * inverse_ratio;
  return out;
}

std::vector<FirstStageSlope> first_stage_slopes(const ArdSurvey& survey,
                                                const DegreeEstimates& degrees) {
  if (degrees.full().size() != survey.respondents())
    throw ValidationError("degree estimates do not match respondent count");

  const std::size_t n = survey.respondents();
  const long double nn = static_cast<long double>(n);
  internal::KnownSums sums;
  bool have_sums = false;
  if (!degrees.from_true()) {
    sums = internal::known_row_sums(survey);
    have_sums = true;
  }
  const bool integral_true = degrees.from_true() && internal::integral_vector(degrees.full());

  std::vector<FirstStageSlope> out;
  out.reserve(survey.subpopulations());
  for (std::size_t k = 0; k < survey.subpopulations(); ++k) {
    FirstStageSlope item;
    item.subpopulation = k;
    std::int64_t col_sum = survey.responses().col_sum(k);
    if (col_sum == 0) {
      item.error = "column '" + survey.label(k) + "' is all zero; scaled responses undefined";
      out.push_back(std::move(item));
      continue;
    }
    const long double beta = nn / static_cast<long double>(col_sum);
    try {
      if (!degrees.from_true()) {
        // Degree estimates are affine in integer row sums, so the slope can be
        // assembled from exact integer cross-moments.
        const bool known = survey.is_known(k);
        if (known && !degrees.has_loo(k))
          throw ValidationError("no leave-one-out degrees for '" + survey.label(k) +
                                "' (single known subpopulation)");
        std::int64_t size_sum = survey.known_size_sum() - (known ? survey.known_size(k) : 0);
        const long double alpha =
            static_cast<long double>(survey.total_population()) / size_sum;
        internal::BilinearStats stats;
        for (std::size_t r = 0; r < n; ++r) {
          std::int64_t y = survey.responses().at(r, k);
          std::int64_t u = (have_sums ? sums.per_row[r] : 0) - (known ? y : 0);
          stats.add(u, y);
        }
        long double ubar = static_cast<long double>(static_cast<__int128>(stats.sum_x)) / nn;
        item.fit = finish_first_stage(stats.sxy(), stats.sxx(), stats.syy(), nn, ubar,
                                      alpha, beta);
      } else if (integral_true) {
        internal::BilinearStats stats;
        for (std::size_t r = 0; r < n; ++r)
          stats.add(static_cast<std::int64_t>(degrees.full()[r]),
                    survey.responses().at(r, k));
        long double ubar = static_cast<long double>(static_cast<__int128>(stats.sum_x)) / nn;
        item.fit = finish_first_stage(stats.sxy(), stats.sxx(), stats.syy(), nn, ubar,
                                      1.0L, beta);
      } else {
        long double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (std::size_t r = 0; r < n; ++r) {
          long double x = degrees.full()[r];
          long double y = static_cast<long double>(survey.responses().at(r, k));
          sx += x;
          sy += y;
          sxx += x * x;
          sxy += x * y;
          syy += y * y;
        }
        item.fit = finish_first_stage(nn * sxy - sx * sy, nn * sxx - sx * sx,
                                      nn * syy - sy * sy, nn, sx / nn, 1.0L, beta);
      }
    } catch (const ValidationError& e) {
      item.error = e.what();
    }
    out.push_back(std::move(item));
  }
  return out;
}

OlsFit fit_second_stage(std::span<const double> slopes, std::span<const double> ratios) {
  try {
    return ols(slopes, ratios);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("second stage: ") + e.what());
  }
}

AdjustmentFit fit_adjustment(const ArdSurvey& survey, const DegreeEstimates& degrees,
                             const DeltaGuard& guard) {
  AdjustmentFit fit;
  fit.first_stage = first_stage_slopes(survey, degrees);

  std::vector<double> slopes, ratios;
  std::vector<std::string> point_notes(survey.subpopulations());
  for (std::size_t k : survey.known_indices()) {
    const auto& stage = fit.first_stage[k];
    if (!stage.fit) continue;
    try {
      SizeEstimate loo = scaleup_estimated_degrees(survey, degrees, k, true);
      if (!(loo.value > 0.0)) {
        point_notes[k] = "leave-one-out estimate is zero";
        continue;
      }
      double ratio = static_cast<double>(survey.known_size(k)) / loo.value;
      fit.points.push_back({k, stage.fit->slope, ratio});
      slopes.push_back(stage.fit->slope);
      ratios.push_back(ratio);
    } catch (const ValidationError& e) {
      point_notes[k] = e.what();
    }
  }
  if (fit.points.size() < 2)
    throw ValidationError("second stage needs at least 2 usable known subpopulations, found " +
                          std::to_string(fit.points.size()));
  fit.second_stage = fit_second_stage(slopes, ratios);

  for (std::size_t k = 0; k < survey.subpopulations(); ++k) {
    SubpopulationAdjustment adj;
    adj.subpopulation = k;
    try {
      SizeEstimate basic = survey.is_known(k)
                               ? scaleup_estimated_degrees(survey, degrees, k, true)
                               : scaleup_estimated_degrees(survey, degrees, k, false);
      adj.basic = basic.value;
    } catch (const ValidationError& e) {
      adj.note = e.what();
    }
    const auto& stage = fit.first_stage[k];
    if (!stage.fit) {
      if (adj.note.empty()) adj.note = stage.error;
    } else if (adj.basic) {
      double inverse = fit.second_stage.intercept + fit.second_stage.slope * stage.fit->slope;
      GuardOutcome outcome = apply_guard(*adj.basic, inverse, guard);
      adj.delta = outcome.delta;
      adj.adjusted = outcome.adjusted;
      adj.clamped = outcome.clamped;
      if (!outcome.note.empty()) adj.note = outcome.note;
    }
    if (adj.note.empty() && !point_notes[k].empty()) adj.note = point_notes[k];
    fit.subpopulations.push_back(std::move(adj));
  }
  return fit;
}

TargetAdjustment adjust(const ArdSurvey& survey, const DegreeEstimates& degrees,
                        std::size_t target, const DeltaGuard& guard) {
  if (target >= survey.subpopulations())
    throw ValidationError("target subpopulation index out of range");

  TargetAdjustment result;
  result.target = target;
  if (survey.is_known(target)) {
    ArdSurvey reduced = survey.with_hidden(target);
    DegreeEstimates fold_degrees =
        degrees.from_true() ? degrees : estimate_degrees(reduced);
    result.fit = fit_adjustment(reduced, fold_degrees, guard);
  } else {
    result.fit = fit_adjustment(survey, degrees, guard);
  }

  const auto& stage = result.fit.first_stage[target];
  const auto& adj = result.fit.subpopulations[target];
  if (!adj.basic)
    throw ValidationError("cannot estimate '" + survey.label(target) + "': " +
                          (adj.note.empty() ? "no basic estimate" : adj.note));
  result.basic = *adj.basic;
  if (!stage.fit)
    throw ValidationError("cannot adjust '" + survey.label(target) + "': " + stage.error);
  result.predicted_inverse_ratio =
      result.fit.second_stage.intercept + result.fit.second_stage.slope * stage.fit->slope;
  result.delta = adj.delta;
  result.adjusted = adj.adjusted;
  result.clamped = adj.clamped;
  result.note = adj.note;
  result.guard_failed = !adj.delta.has_value();
  return result;
}

}  // namespace nsum
