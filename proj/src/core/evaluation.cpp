#include "core/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "core/errors.hpp"
#include "core/estimators.hpp"
#include "core/parallel.hpp"

namespace nsum {

namespace {

std::string format_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

nlohmann::json number_or_null(const std::optional<double>& value) {
  if (!value || !std::isfinite(*value)) return nullptr;
  return *value;
}

}  // namespace

DegreesSource DegreesSource::true_vector(std::vector<double> values) {
  DegreesSource source;
  source.kind = Kind::TrueVector;
  source.degrees = std::move(values);
  return source;
}

std::string DegreesSource::name() const {
  return kind == Kind::Estimated ? "estimated" : "true";
}

double mape(std::span<const double> truths, std::span<const double> estimates) {
  if (truths.empty() || truths.size() != estimates.size()) {
    throw ValidationError("mape: need equally long, nonempty truth and estimate vectors");
  }
  long double sum = 0.0L;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!(truths[i] > 0.0)) throw ValidationError("mape: truths must be positive");
    sum += std::abs(100.0L * (truths[i] - estimates[i]) / truths[i]);
  }
  return static_cast<double>(sum / static_cast<long double>(truths.size()));
}

double percent_reduction(double mape_basic, double mape_adjusted) {
  if (mape_basic == 0.0) {
    // Nothing to reduce; equal-and-zero counts as no change, anything else is
    // undefined rather than infinitely bad.
    return mape_adjusted == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return 100.0 * (mape_basic - mape_adjusted) / mape_basic;
}

EvaluationReport evaluate_loo(const ArdSurvey& survey, const EvaluationOptions& options) {
  const ArdSurvey filtered = filter_subpopulations(survey, options.filter);
  if (filtered.known_count() < 3) {
    throw ValidationError(
        "leave-one-out evaluation needs at least three known subpopulations; got " +
        std::to_string(filtered.known_count()));
  }
  const DegreeEstimates degrees =
      options.degrees.kind == DegreesSource::Kind::Estimated
          ? estimate_degrees(filtered)
          : true_degree_estimates(filtered, options.degrees.degrees);

  const std::vector<std::size_t>& known = filtered.known_indices();
  std::vector<FoldResult> folds(known.size());
  parallel_for(known.size(), options.threads, [&](std::size_t slot) {
    const std::size_t k = known[slot];
    FoldResult& fold = folds[slot];
    fold.subpopulation = k;
    fold.label = filtered.label(k);
    fold.truth = filtered.known_size(k);
    try {
      const TargetAdjustment run = adjust(filtered, degrees, k, options.guard);
      fold.basic = run.basic;
      fold.adjusted = run.adjusted;
      fold.delta = run.delta;
      fold.clamped = run.clamped;
      if (run.guard_failed) {
        fold.error = run.note.empty() ? "guard rejected the predicted ratio" : run.note;
      }
      const double truth = static_cast<double>(fold.truth);
      if (fold.basic) fold.relative_error_basic = 100.0 * (truth - *fold.basic) / truth;
      if (fold.adjusted) {
        fold.relative_error_adjusted = 100.0 * (truth - *fold.adjusted) / truth;
      }
      if (fold.relative_error_basic && fold.relative_error_adjusted) {
        fold.adjusted_better =
            std::abs(*fold.relative_error_adjusted) < std::abs(*fold.relative_error_basic);
      }
    } catch (const std::exception& e) {
      fold.error = e.what();
    }
  });

  EvaluationReport report;
  report.folds = std::move(folds);
  report.degrees_source = options.degrees.name();
  report.filter_spec = options.filter.spec();
  report.guard_spec = options.guard.spec();
  report.seed = options.seed;

  std::vector<double> truths;
  std::vector<double> basics;
  std::vector<double> adjusteds;
  for (const FoldResult& fold : report.folds) {
    if (fold.error.empty() && fold.basic && fold.adjusted) {
      truths.push_back(static_cast<double>(fold.truth));
      basics.push_back(*fold.basic);
      adjusteds.push_back(*fold.adjusted);
      if (fold.adjusted_better) ++report.adjusted_better_count;
    } else {
      ++report.failed;
    }
  }
  report.evaluated = truths.size();
  if (report.evaluated > 0) {
    report.mape_basic = mape(truths, basics);
    report.mape_adjusted = mape(truths, adjusteds);
    report.percent_reduction = percent_reduction(report.mape_basic, report.mape_adjusted);
    long double sb = 0.0L;
    long double sa = 0.0L;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      sb += (truths[i] - basics[i]) * (truths[i] - basics[i]);
      sa += (truths[i] - adjusteds[i]) * (truths[i] - adjusteds[i]);
    }
    report.rmse_basic =
        static_cast<double>(std::sqrt(sb / static_cast<long double>(truths.size())));
    report.rmse_adjusted =
        static_cast<double>(std::sqrt(sa / static_cast<long double>(truths.size())));
  } else {
    report.mape_basic = std::numeric_limits<double>::quiet_NaN();
    report.mape_adjusted = std::numeric_limits<double>::quiet_NaN();
    report.percent_reduction = std::numeric_limits<double>::quiet_NaN();
    report.rmse_basic = std::numeric_limits<double>::quiet_NaN();
    report.rmse_adjusted = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["degrees"] = degrees_source;
  j["filter"] = filter_spec;
  j["guard"] = guard_spec;
  j["seed"] = seed;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const FoldResult& fold : folds) {
    nlohmann::ordered_json f;
    f["subpopulation"] = fold.label;
    f["truth"] = fold.truth;
    f["basic"] = number_or_null(fold.basic);
    f["adjusted"] = number_or_null(fold.adjusted);
    f["delta"] = number_or_null(fold.delta);
    f["relative_error_basic"] = number_or_null(fold.relative_error_basic);
    f["relative_error_adjusted"] = number_or_null(fold.relative_error_adjusted);
    f["adjusted_better"] = fold.adjusted_better;
    f["clamped"] = fold.clamped;
    if (!fold.error.empty()) f["error"] = fold.error;
    list.push_back(std::move(f));
  }
  j["subpopulations"] = std::move(list);
  j["evaluated"] = evaluated;
  j["failed"] = failed;
  nlohmann::ordered_json aggregate;
  aggregate["mape_basic"] = number_or_null(mape_basic);
  aggregate["mape_adjusted"] = number_or_null(mape_adjusted);
  aggregate["percent_reduction"] = number_or_null(percent_reduction);
  aggregate["rmse_basic"] = number_or_null(rmse_basic);
  aggregate["rmse_adjusted"] = number_or_null(rmse_adjusted);
  aggregate["adjusted_better"] = adjusted_better_count;
  j["aggregate"] = std::move(aggregate);
  return j;
}

std::string evaluation_csv(const nlohmann::json& report) {
  if (!report.is_object() || !report.contains("subpopulations")) {
    throw ValidationError("evaluation csv: not an evaluation report");
  }
  std::string out = "subpopulation,estimator,truth,estimate,relative_error,note\n";
  for (const auto& fold : report.at("subpopulations")) {
    std::string note = fold.value("error", std::string());
    if (fold.value("clamped", false)) {
      note = note.empty() ? "clamped" : note + "; clamped";
    }
    for (const char* estimator : {"basic", "adjusted"}) {
      out += csv_escape(fold.at("subpopulation").get<std::string>());
      out += ',';
      out += estimator;
      out += ',';
      out += std::to_string(fold.at("truth").get<std::int64_t>());
      out += ',';
      const auto& estimate = fold.at(estimator);
      if (estimate.is_number()) out += format_number(estimate.get<double>());
      out += ',';
      const auto& error = fold.at(std::string("relative_error_") + estimator);
      if (error.is_number()) out += format_number(error.get<double>());
      out += ',';
      out += csv_escape(note);
      out += '\n';
    }
  }
  return out;
}

std::string EvaluationReport::to_csv() const { return evaluation_csv(to_json()); }

}  // namespace nsum
