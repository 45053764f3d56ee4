#include "nsum.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "core/adjustment.hpp"
#include "core/errors.hpp"
#include "core/estimators.hpp"
#include "core/evaluation.hpp"
#include "core/oracles.hpp"
#include "core/simulators.hpp"
#include "core/survey.hpp"
#include "json.hpp"

struct nsum_survey {
  nsum::ArdSurvey value;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out != nullptr) std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

nsum_status invalid(const char* message) {
  g_last_error = message;
  return NSUM_ERR_INVALID_ARGUMENT;
}

template <typename Fn>
nsum_status wrap(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NSUM_OK;
  } catch (const nsum::NumericGuardError& e) {
    g_last_error = e.what();
    return NSUM_ERR_NUMERIC_GUARD;
  } catch (const nsum::ValidationError& e) {
    g_last_error = e.what();
    return NSUM_ERR_VALIDATION;
  } catch (const nsum::IoError& e) {
    g_last_error = e.what();
    return NSUM_ERR_IO;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return NSUM_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NSUM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NSUM_ERR_INTERNAL;
  }
}

nlohmann::json parse_options(const char* options_json) {
  if (options_json == nullptr || *options_json == '\0') return nlohmann::json::object();
  nlohmann::json j = nlohmann::json::parse(options_json);
  if (!j.is_object()) throw nsum::ValidationError("options must be a JSON object");
  return j;
}

void check_option_keys(const nlohmann::json& options,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : options.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw nsum::ValidationError("unknown option \"" + item.key() + "\"");
    }
  }
}

// "estimated" (default) or {"values": [...]}.
std::vector<double> parse_true_degrees(const nlohmann::json& options, bool& is_true) {
  is_true = false;
  if (!options.contains("degrees")) return {};
  const auto& d = options.at("degrees");
  if (d.is_string()) {
    if (d.get<std::string>() != "estimated") {
      throw nsum::ValidationError("degrees must be \"estimated\" or {\"values\": [...]}");
    }
    return {};
  }
  if (d.is_object() && d.contains("values")) {
    is_true = true;
    return d.at("values").get<std::vector<double>>();
  }
  throw nsum::ValidationError("degrees must be \"estimated\" or {\"values\": [...]}");
}

nlohmann::json ols_json(const nsum::OlsFit& fit, std::size_t points) {
  nlohmann::ordered_json j;
  j["gamma0"] = fit.intercept;
  j["gamma1"] = fit.slope;
  j["r_squared"] = fit.r_squared;
  j["points"] = points;
  return j;
}

nlohmann::json number_or_null(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

nlohmann::json estimate_report(const nsum::ArdSurvey& survey, const nlohmann::json& options) {
  check_option_keys(options, {"adjust", "guard", "degrees", "target"});
  const bool adjust_flag = options.value("adjust", true);
  const nsum::DeltaGuard guard = nsum::DeltaGuard::parse(options.value("guard", "fail"));
  bool true_degrees = false;
  std::vector<double> degree_values = parse_true_degrees(options, true_degrees);
  const nsum::DegreeEstimates degrees =
      true_degrees ? nsum::true_degree_estimates(survey, std::move(degree_values))
                   : nsum::estimate_degrees(survey);

  std::vector<std::size_t> targets;
  if (options.contains("target")) {
    const std::string label = options.at("target").get<std::string>();
    const auto index = survey.find_label(label);
    if (!index) throw nsum::ValidationError("unknown target subpopulation \"" + label + "\"");
    targets.push_back(*index);
  } else {
    targets = survey.hidden_indices();
    if (targets.empty()) {
      throw nsum::ValidationError(
          "survey has no hidden subpopulation; pass a target to estimate");
    }
  }

  nlohmann::ordered_json report;
  report["degrees"] = true_degrees ? "true" : "estimated";
  report["guard"] = guard.spec();
  report["adjust"] = adjust_flag;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (std::size_t t : targets) {
    nlohmann::ordered_json entry;
    entry["subpopulation"] = survey.label(t);
    if (adjust_flag) {
      const nsum::TargetAdjustment run = nsum::adjust(survey, degrees, t, guard);
      entry["basic"] = run.basic;
      double slope = std::numeric_limits<double>::quiet_NaN();
      for (const nsum::FirstStageSlope& fs : run.fit.first_stage) {
        if (fs.subpopulation == t && fs.fit) slope = fs.fit->slope;
      }
      entry["first_stage_slope"] = number_or_null(slope);
      entry["predicted_inverse_ratio"] = run.predicted_inverse_ratio;
      entry["delta"] = run.delta ? nlohmann::json(*run.delta) : nlohmann::json(nullptr);
      entry["adjusted"] =
          run.adjusted ? nlohmann::json(*run.adjusted) : nlohmann::json(nullptr);
      entry["clamped"] = run.clamped;
      entry["guard_failed"] = run.guard_failed;
      if (!run.note.empty()) entry["note"] = run.note;
      entry["second_stage"] = ols_json(run.fit.second_stage, run.fit.points.size());
    } else {
      const nsum::SizeEstimate est =
          nsum::scaleup_estimated_degrees(survey, degrees, t, survey.is_known(t));
      entry["basic"] = est.value;
      entry["variant"] = est.variant;
    }
    list.push_back(std::move(entry));
  }
  report["targets"] = std::move(list);
  return report;
}

}  // namespace

extern "C" {

const char* nsum_version(void) { return "0.1.0"; }

const char* nsum_last_error(void) { return g_last_error.c_str(); }

nsum_status nsum_survey_load(const char* responses_csv_path, const char* metadata_json_path,
                             const char* missing_policy, nsum_survey** out_survey) {
  if (responses_csv_path == nullptr || metadata_json_path == nullptr || out_survey == nullptr) {
    return invalid("nsum_survey_load: paths and out pointer must be non-null");
  }
  *out_survey = nullptr;
  return wrap([&] {
    const nsum::MissingPolicy policy =
        nsum::MissingPolicy::parse(missing_policy == nullptr ? "drop-respondent"
                                                             : missing_policy);
    *out_survey = new nsum_survey{
        nsum::load_survey(responses_csv_path, metadata_json_path, policy)};
  });
}

nsum_status nsum_survey_save(const nsum_survey* survey, const char* responses_csv_path,
                             const char* metadata_json_path) {
  if (survey == nullptr || responses_csv_path == nullptr || metadata_json_path == nullptr) {
    return invalid("nsum_survey_save: survey and paths must be non-null");
  }
  return wrap([&] { nsum::save_survey(survey->value, responses_csv_path, metadata_json_path); });
}

nsum_status nsum_survey_filter(const nsum_survey* survey, const char* filter_spec,
                               nsum_survey** out_survey) {
  if (survey == nullptr || filter_spec == nullptr || out_survey == nullptr) {
    return invalid("nsum_survey_filter: survey, spec and out pointer must be non-null");
  }
  *out_survey = nullptr;
  return wrap([&] {
    *out_survey = new nsum_survey{nsum::filter_subpopulations(
        survey->value, nsum::SubpopulationFilter::parse(filter_spec))};
  });
}

void nsum_survey_free(nsum_survey* survey) { delete survey; }

nsum_status nsum_survey_shape(const nsum_survey* survey, size_t* respondents,
                              size_t* subpopulations, size_t* known_count,
                              size_t* dropped_rows) {
  if (survey == nullptr) return invalid("nsum_survey_shape: survey must be non-null");
  if (respondents != nullptr) *respondents = survey->value.respondents();
  if (subpopulations != nullptr) *subpopulations = survey->value.subpopulations();
  if (known_count != nullptr) *known_count = survey->value.known_count();
  if (dropped_rows != nullptr) *dropped_rows = survey->value.dropped_rows();
  g_last_error.clear();
  return NSUM_OK;
}

nsum_status nsum_survey_total_population(const nsum_survey* survey, int64_t* out_total) {
  if (survey == nullptr || out_total == nullptr) {
    return invalid("nsum_survey_total_population: survey and out pointer must be non-null");
  }
  *out_total = survey->value.total_population();
  g_last_error.clear();
  return NSUM_OK;
}

nsum_status nsum_survey_label(const nsum_survey* survey, size_t index,
                              const char** out_label) {
  if (survey == nullptr || out_label == nullptr) {
    return invalid("nsum_survey_label: survey and out pointer must be non-null");
  }
  if (index >= survey->value.subpopulations()) {
    g_last_error = "nsum_survey_label: index out of range";
    return NSUM_ERR_VALIDATION;
  }
  *out_label = survey->value.label(index).c_str();
  g_last_error.clear();
  return NSUM_OK;
}

nsum_status nsum_survey_is_known(const nsum_survey* survey, size_t index, int* out_known) {
  if (survey == nullptr || out_known == nullptr) {
    return invalid("nsum_survey_is_known: survey and out pointer must be non-null");
  }
  if (index >= survey->value.subpopulations()) {
    g_last_error = "nsum_survey_is_known: index out of range";
    return NSUM_ERR_VALIDATION;
  }
  *out_known = survey->value.is_known(index) ? 1 : 0;
  g_last_error.clear();
  return NSUM_OK;
}

nsum_status nsum_survey_known_size(const nsum_survey* survey, size_t index,
                                   int64_t* out_size) {
  if (survey == nullptr || out_size == nullptr) {
    return invalid("nsum_survey_known_size: survey and out pointer must be non-null");
  }
  return wrap([&] { *out_size = survey->value.known_size(index); });
}

nsum_status nsum_simulate(const char* kind, const char* config_json, uint64_t seed,
                          int threads, nsum_survey** out_survey, char** out_truth_json) {
  if (kind == nullptr || out_survey == nullptr) {
    return invalid("nsum_simulate: kind and out pointer must be non-null");
  }
  *out_survey = nullptr;
  if (out_truth_json != nullptr) *out_truth_json = nullptr;
  return wrap([&] {
    const nlohmann::json overrides = parse_options(config_json);
    const int workers = threads <= 0 ? 1 : threads;
    const std::string which = kind;
    nsum::SimulatedWorld world = [&] {
      if (which == "binomial" || which == "binomial-varp") {
        nsum::BinomialSimConfig base = which == "binomial"
                                           ? nsum::BinomialSimConfig::defaults()
                                           : nsum::BinomialSimConfig::varying_exponents();
        nsum::BinomialSimConfig config = nsum::BinomialSimConfig::from_json(base, overrides);
        config.seed = seed;
        return nsum::simulate_binomial(config, workers);
      }
      if (which == "sbm" || which == "sbm-small") {
        nsum::SbmConfig base =
            which == "sbm" ? nsum::SbmConfig::defaults() : nsum::SbmConfig::ci_defaults();
        nsum::SbmConfig config = nsum::SbmConfig::from_json(base, overrides);
        config.seed = seed;
        return nsum::simulate_sbm(config, workers);
      }
      throw nsum::ValidationError(
          "unknown simulation kind \"" + which +
          "\" (expected binomial, binomial-varp, sbm or sbm-small)");
    }();
    if (out_truth_json != nullptr) {
      *out_truth_json = dup_string(world.truth_json().dump(2) + "\n");
      if (*out_truth_json == nullptr) throw std::bad_alloc();
    }
    *out_survey = new nsum_survey{std::move(world.survey)};
  });
}

nsum_status nsum_estimate(const nsum_survey* survey, const char* options_json,
                          char** out_report_json) {
  if (survey == nullptr || out_report_json == nullptr) {
    return invalid("nsum_estimate: survey and out pointer must be non-null");
  }
  *out_report_json = nullptr;
  return wrap([&] {
    const nlohmann::json report = estimate_report(survey->value, parse_options(options_json));
    *out_report_json = dup_string(report.dump(2) + "\n");
    if (*out_report_json == nullptr) throw std::bad_alloc();
  });
}

nsum_status nsum_evaluate(const nsum_survey* survey, const char* options_json,
                          char** out_report_json) {
  if (survey == nullptr || out_report_json == nullptr) {
    return invalid("nsum_evaluate: survey and out pointer must be non-null");
  }
  *out_report_json = nullptr;
  return wrap([&] {
    const nlohmann::json options = parse_options(options_json);
    check_option_keys(options, {"filter", "guard", "degrees", "seed", "threads"});
    nsum::EvaluationOptions opts;
    opts.filter = nsum::SubpopulationFilter::parse(options.value("filter", "all"));
    opts.guard = nsum::DeltaGuard::parse(options.value("guard", "fail"));
    bool true_degrees = false;
    std::vector<double> values = parse_true_degrees(options, true_degrees);
    opts.degrees = true_degrees ? nsum::DegreesSource::true_vector(std::move(values))
                                : nsum::DegreesSource::estimated();
    opts.seed = options.value("seed", std::uint64_t{0});
    opts.threads = options.value("threads", 1);
    const nsum::EvaluationReport report = nsum::evaluate_loo(survey->value, opts);
    *out_report_json = dup_string(report.to_json().dump(2) + "\n");
    if (*out_report_json == nullptr) throw std::bad_alloc();
  });
}

nsum_status nsum_report_to_csv(const char* report_json, char** out_csv) {
  if (report_json == nullptr || out_csv == nullptr) {
    return invalid("nsum_report_to_csv: report and out pointer must be non-null");
  }
  *out_csv = nullptr;
  return wrap([&] {
    const nlohmann::json report = nlohmann::json::parse(report_json);
    *out_csv = dup_string(nsum::evaluation_csv(report));
    if (*out_csv == nullptr) throw std::bad_alloc();
  });
}

nsum_status nsum_verify(const char* options_json, char** out_report_json) {
  if (out_report_json == nullptr) {
    return invalid("nsum_verify: out pointer must be non-null");
  }
  *out_report_json = nullptr;
  return wrap([&] {
    const nlohmann::json options = parse_options(options_json);
    check_option_keys(options, {"seed", "threads", "quick", "estimate_scale"});
    nsum::VerifyOptions opts;
    opts.seed = options.value("seed", std::uint64_t{0});
    opts.threads = options.value("threads", 1);
    opts.quick = options.value("quick", false);
    opts.estimate_scale = options.value("estimate_scale", 1.0);
    const nsum::VerifyReport report = nsum::run_verification(opts);
    *out_report_json = dup_string(report.to_json().dump(2) + "\n");
    if (*out_report_json == nullptr) throw std::bad_alloc();
  });
}

void nsum_string_free(char* text) { std::free(text); }

}  // extern "C"
