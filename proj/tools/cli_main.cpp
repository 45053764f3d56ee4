// Command-line front end. Talks to the library exclusively through the C API;
// human-readable summaries go to stdout, machine artifacts to files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsum.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

int exit_code(nsum_status status) {
  if (status == NSUM_OK) return 0;
  return status == NSUM_ERR_NUMERIC_GUARD ? kExitNumeric : kExitValidation;
}

[[nodiscard]] int fail_status(nsum_status status) {
  std::fprintf(stderr, "error: %s\n", nsum_last_error());
  return exit_code(status);
}

int fail_message(const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return kExitValidation;
}

struct SurveyDeleter {
  void operator()(nsum_survey* s) const { nsum_survey_free(s); }
};
using SurveyPtr = std::unique_ptr<nsum_survey, SurveyDeleter>;

struct StringDeleter {
  void operator()(char* s) const { nsum_string_free(s); }
};
using StringPtr = std::unique_ptr<char, StringDeleter>;

bool write_file(const fs::path& path, const std::string& content, std::string& error) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    error = "cannot open " + path.string() + " for writing";
    return false;
  }
  out << content;
  out.flush();
  if (!out) {
    error = "failed while writing " + path.string();
    return false;
  }
  return true;
}

bool read_file(const fs::path& path, std::string& content, std::string& error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    error = "cannot read " + path.string();
    return false;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  content = buffer.str();
  return true;
}

// A degrees file is either a truth sidecar (JSON object with "true_degrees")
// or plain text with one number per whitespace-separated token.
bool load_degrees_file(const fs::path& path, std::vector<double>& values, std::string& error) {
  std::string content;
  if (!read_file(path, content, error)) return false;
  const auto start = content.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) {
    error = "degrees file " + path.string() + " is empty";
    return false;
  }
  if (content[start] == '{') {
    json truth = json::parse(content, nullptr, false);
    if (truth.is_discarded() || !truth.contains("true_degrees")) {
      error = "degrees file " + path.string() + " has no \"true_degrees\" array";
      return false;
    }
    values = truth.at("true_degrees").get<std::vector<double>>();
    return true;
  }
  std::istringstream in(content);
  double v = 0.0;
  while (in >> v) values.push_back(v);
  if (!in.eof()) {
    error = "degrees file " + path.string() + " has a non-numeric token";
    return false;
  }
  if (values.empty()) {
    error = "degrees file " + path.string() + " holds no numbers";
    return false;
  }
  return true;
}

std::string describe(const json& config) { return config.empty() ? "{}" : config.dump(); }

struct LoadArgs {
  std::string responses;
  std::string metadata;
  std::string missing = "drop-respondent";
  std::string filter = "all";
};

void add_load_options(CLI::App* cmd, LoadArgs& args, bool required) {
  auto* r = cmd->add_option("--responses", args.responses, "Response CSV path");
  auto* m = cmd->add_option("--metadata", args.metadata,
                            "Metadata JSON path (total population, known sizes, hidden)");
  if (required) {
    r->required();
    m->required();
  }
  cmd->add_option("--missing", args.missing,
                  "Missing-cell policy: drop-respondent or reject")
      ->check(CLI::IsMember({"drop-respondent", "drop", "reject"}));
  cmd->add_option("--filter", args.filter,
                  "Subpopulation filter: all, include:a,b or exclude:a,b");
}

int load_survey_cli(const LoadArgs& args, SurveyPtr& survey) {
  nsum_survey* raw = nullptr;
  nsum_status status =
      nsum_survey_load(args.responses.c_str(), args.metadata.c_str(), args.missing.c_str(), &raw);
  if (status != NSUM_OK) return fail_status(status);
  survey.reset(raw);
  if (args.filter != "all") {
    nsum_survey* filtered = nullptr;
    status = nsum_survey_filter(survey.get(), args.filter.c_str(), &filtered);
    if (status != NSUM_OK) return fail_status(status);
    survey.reset(filtered);
  }
  return 0;
}

void print_shape(const nsum_survey* survey) {
  size_t n = 0;
  size_t k = 0;
  size_t known = 0;
  size_t dropped = 0;
  nsum_survey_shape(survey, &n, &k, &known, &dropped);
  std::printf("survey: %zu respondents, %zu subpopulations (%zu known)", n, k, known);
  if (dropped > 0) std::printf(", %zu rows dropped for missing cells", dropped);
  std::printf("\n");
}

int run_simulate(const std::string& kind, const std::string& config_path, std::uint64_t seed,
                 int threads, const std::string& out_dir) {
  json config = json::object();
  if (!config_path.empty()) {
    std::string content;
    std::string error;
    if (!read_file(config_path, content, error)) return fail_message(error);
    config = json::parse(content, nullptr, false);
    if (config.is_discarded()) return fail_message("config file is not valid JSON");
  }
  nsum_survey* raw_survey = nullptr;
  char* raw_truth = nullptr;
  const nsum_status status = nsum_simulate(kind.c_str(), config.dump().c_str(), seed, threads,
                                           &raw_survey, &raw_truth);
  if (status != NSUM_OK) return fail_status(status);
  SurveyPtr survey(raw_survey);
  StringPtr truth(raw_truth);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return fail_message("cannot create output directory " + out_dir);
  const fs::path dir(out_dir);
  std::string error;
  if (!write_file(dir / "truth.json", truth.get(), error)) return fail_message(error);
  const nsum_status save = nsum_survey_save(survey.get(), (dir / "responses.csv").c_str(),
                                            (dir / "metadata.json").c_str());
  if (save != NSUM_OK) return fail_status(save);

  std::printf("run: simulate %s --seed %llu --threads %d --config %s --out %s\n", kind.c_str(),
              static_cast<unsigned long long>(seed), threads, describe(config).c_str(),
              out_dir.c_str());
  print_shape(survey.get());
  std::printf("wrote %s, %s, %s\n", (dir / "responses.csv").c_str(),
              (dir / "metadata.json").c_str(), (dir / "truth.json").c_str());
  return 0;
}

int run_estimate(const LoadArgs& load, const std::string& target, bool no_adjust,
                 const std::string& guard, const std::string& degrees_spec,
                 const std::string& out_path) {
  SurveyPtr survey;
  if (const int code = load_survey_cli(load, survey); code != 0) return code;

  json options;
  options["adjust"] = !no_adjust;
  options["guard"] = guard;
  if (!target.empty()) options["target"] = target;
  if (degrees_spec != "estimated") {
    if (degrees_spec.rfind("true:", 0) != 0) {
      return fail_message("--degrees must be 'estimated' or 'true:<path>'");
    }
    std::vector<double> values;
    std::string error;
    if (!load_degrees_file(degrees_spec.substr(5), values, error)) return fail_message(error);
    options["degrees"] = json{{"values", values}};
  }

  char* raw_report = nullptr;
  const nsum_status status =
      nsum_estimate(survey.get(), options.dump().c_str(), &raw_report);
  if (status != NSUM_OK) return fail_status(status);
  StringPtr report_text(raw_report);

  std::printf("run: estimate --responses %s --metadata %s --missing %s --filter %s --guard %s"
              " --degrees %s%s%s\n",
              load.responses.c_str(), load.metadata.c_str(), load.missing.c_str(),
              load.filter.c_str(), guard.c_str(), degrees_spec.c_str(),
              target.empty() ? "" : (" --target " + target).c_str(),
              no_adjust ? " --no-adjust" : "");
  print_shape(survey.get());

  const json report = json::parse(report_text.get());
  for (const json& entry : report.at("targets")) {
    const std::string label = entry.at("subpopulation").get<std::string>();
    std::printf("%s: basic=%.6g", label.c_str(), entry.at("basic").get<double>());
    if (entry.contains("adjusted")) {
      if (entry.at("adjusted").is_number()) {
        std::printf(" adjusted=%.6g delta=%.6g", entry.at("adjusted").get<double>(),
                    entry.at("delta").get<double>());
        if (entry.value("clamped", false)) std::printf(" (clamped)");
      } else {
        std::printf(" adjusted=unavailable (%s)",
                    entry.value("note", std::string("guard failed")).c_str());
      }
    }
    std::printf("\n");
  }
  if (!out_path.empty()) {
    std::string error;
    if (!write_file(out_path, report_text.get(), error)) return fail_message(error);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

int run_evaluate(const LoadArgs& load, const std::string& simulate_kind,
                 const std::string& config_path, const std::string& degrees_spec,
                 const std::string& guard, std::uint64_t seed, int threads,
                 const std::string& out_dir) {
  SurveyPtr survey;
  std::vector<double> true_degrees;
  json config = json::object();

  if (!simulate_kind.empty()) {
    if (!load.responses.empty() || !load.metadata.empty()) {
      return fail_message("--simulate replaces --responses/--metadata; pass one input form");
    }
    if (!config_path.empty()) {
      std::string content;
      std::string error;
      if (!read_file(config_path, content, error)) return fail_message(error);
      config = json::parse(content, nullptr, false);
      if (config.is_discarded()) return fail_message("config file is not valid JSON");
    }
    nsum_survey* raw_survey = nullptr;
    char* raw_truth = nullptr;
    const nsum_status status = nsum_simulate(simulate_kind.c_str(), config.dump().c_str(), seed,
                                             threads, &raw_survey, &raw_truth);
    if (status != NSUM_OK) return fail_status(status);
    survey.reset(raw_survey);
    StringPtr truth(raw_truth);
    if (degrees_spec == "true") {
      const json truth_json = json::parse(truth.get());
      true_degrees = truth_json.at("true_degrees").get<std::vector<double>>();
    }
  } else {
    if (load.responses.empty() || load.metadata.empty()) {
      return fail_message("pass --responses and --metadata, or --simulate <kind>");
    }
    LoadArgs plain = load;
    plain.filter = "all";  // the filter is applied inside the evaluation
    if (const int code = load_survey_cli(plain, survey); code != 0) return code;
  }

  if (degrees_spec.rfind("true:", 0) == 0) {
    std::string error;
    if (!load_degrees_file(degrees_spec.substr(5), true_degrees, error)) {
      return fail_message(error);
    }
  } else if (degrees_spec == "true" && simulate_kind.empty()) {
    return fail_message("--degrees true needs --simulate; otherwise pass true:<path>");
  } else if (degrees_spec != "estimated" && degrees_spec != "true") {
    return fail_message("--degrees must be 'estimated', 'true' or 'true:<path>'");
  }

  json options;
  options["filter"] = load.filter;
  options["guard"] = guard;
  options["seed"] = seed;
  options["threads"] = threads;
  if (!true_degrees.empty()) options["degrees"] = json{{"values", true_degrees}};

  char* raw_report = nullptr;
  const nsum_status status = nsum_evaluate(survey.get(), options.dump().c_str(), &raw_report);
  if (status != NSUM_OK) return fail_status(status);
  StringPtr report_text(raw_report);

  char* raw_csv = nullptr;
  const nsum_status csv_status = nsum_report_to_csv(report_text.get(), &raw_csv);
  if (csv_status != NSUM_OK) return fail_status(csv_status);
  StringPtr csv_text(raw_csv);

  if (!simulate_kind.empty()) {
    std::printf("run: evaluate --simulate %s --config %s --degrees %s --filter %s --guard %s"
                " --seed %llu --threads %d\n",
                simulate_kind.c_str(), describe(config).c_str(), degrees_spec.c_str(),
                load.filter.c_str(), guard.c_str(), static_cast<unsigned long long>(seed),
                threads);
  } else {
    std::printf("run: evaluate --responses %s --metadata %s --missing %s --degrees %s"
                " --filter %s --guard %s --seed %llu --threads %d\n",
                load.responses.c_str(), load.metadata.c_str(), load.missing.c_str(),
                degrees_spec.c_str(), load.filter.c_str(), guard.c_str(),
                static_cast<unsigned long long>(seed), threads);
  }
  print_shape(survey.get());

  const json report = json::parse(report_text.get());
  const json& aggregate = report.at("aggregate");
  const auto number = [](const json& v) { return v.is_number() ? v.get<double>() : 0.0; };
  std::printf("evaluated %zu folds (%zu failed): MAPE basic=%.4g%% adjusted=%.4g%%"
              " reduction=%.4g%%; adjusted better on %zu\n",
              report.at("evaluated").get<std::size_t>(), report.at("failed").get<std::size_t>(),
              number(aggregate.at("mape_basic")), number(aggregate.at("mape_adjusted")),
              number(aggregate.at("percent_reduction")),
              aggregate.at("adjusted_better").get<std::size_t>());

  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) return fail_message("cannot create output directory " + out_dir);
    const fs::path dir(out_dir);
    std::string error;
    if (!write_file(dir / "report.json", report_text.get(), error)) return fail_message(error);
    if (!write_file(dir / "report.csv", csv_text.get(), error)) return fail_message(error);
    std::printf("wrote %s, %s\n", (dir / "report.json").c_str(), (dir / "report.csv").c_str());
  }
  return 0;
}

int run_verify(std::uint64_t seed, int threads, bool quick, double estimate_scale,
               const std::string& out_path) {
  json options;
  options["seed"] = seed;
  options["threads"] = threads;
  options["quick"] = quick;
  if (estimate_scale != 1.0) options["estimate_scale"] = estimate_scale;

  char* raw_report = nullptr;
  const nsum_status status = nsum_verify(options.dump().c_str(), &raw_report);
  if (status != NSUM_OK) return fail_status(status);
  StringPtr report_text(raw_report);

  std::printf("run: verify --seed %llu --threads %d%s\n",
              static_cast<unsigned long long>(seed), threads, quick ? " --quick" : "");
  const json report = json::parse(report_text.get());
  std::size_t failed = 0;
  for (const json& check : report.at("checks")) {
    const bool passed = check.at("passed").get<bool>();
    if (!passed) ++failed;
    std::printf("[%s] %s observed=%.10g expected=%.10g tolerance=%.3g%s%s\n",
                passed ? "pass" : "FAIL", check.at("name").get<std::string>().c_str(),
                check.at("observed").get<double>(), check.at("expected").get<double>(),
                check.at("tolerance").get<double>(),
                check.contains("detail") ? " | " : "",
                check.contains("detail") ? check.at("detail").get<std::string>().c_str() : "");
  }
  if (!out_path.empty()) {
    std::string error;
    if (!write_file(out_path, report_text.get(), error)) return fail_message(error);
    std::printf("wrote %s\n", out_path.c_str());
  }
  if (failed > 0) {
    std::printf("%zu of %zu checks failed\n", failed, report.at("checks").size());
    return kExitNumeric;
  }
  std::printf("all %zu checks passed\n", report.at("checks").size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden-population size estimation from aggregated relational data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(nsum_version()));

  std::uint64_t seed = 0;
  int threads = 1;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic survey");
  std::string sim_kind;
  std::string sim_config;
  std::string sim_out;
  simulate->add_option("kind", sim_kind, "binomial, binomial-varp, sbm or sbm-small")
      ->required()
      ->check(CLI::IsMember({"binomial", "binomial-varp", "sbm", "sbm-small"}));
  simulate->add_option("--config", sim_config, "JSON file overriding the kind's defaults");
  simulate->add_option("--seed", seed, "Root seed for all randomness");
  simulate->add_option("--threads", threads, "Worker threads (results do not depend on this)");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  auto* estimate = app.add_subcommand("estimate", "Estimate hidden subpopulation sizes");
  LoadArgs est_load;
  add_load_options(estimate, est_load, true);
  std::string est_target;
  bool est_no_adjust = false;
  std::string est_guard = "fail";
  std::string est_degrees = "estimated";
  std::string est_out;
  estimate->add_option("--target", est_target, "Subpopulation to estimate (default: hidden)");
  estimate->add_flag("--no-adjust", est_no_adjust, "Report only the basic estimate");
  estimate->add_option("--guard", est_guard, "Degree-ratio guard: fail or clamp:<lo>,<hi>");
  estimate->add_option("--degrees", est_degrees, "estimated or true:<path>");
  estimate->add_option("--out", est_out, "Write the report JSON here");

  auto* evaluate = app.add_subcommand(
      "evaluate", "Hold out each known subpopulation and score both estimators");
  LoadArgs eval_load;
  add_load_options(evaluate, eval_load, false);
  std::string eval_simulate;
  std::string eval_config;
  std::string eval_degrees = "estimated";
  std::string eval_guard = "fail";
  std::string eval_out;
  evaluate->add_option("--simulate", eval_simulate,
                       "Evaluate a fresh synthetic world of this kind instead of files")
      ->check(CLI::IsMember({"binomial", "binomial-varp", "sbm", "sbm-small"}));
  evaluate->add_option("--config", eval_config, "JSON file overriding simulation defaults");
  evaluate->add_option("--degrees", eval_degrees,
                       "estimated, true (simulated worlds) or true:<path>");
  evaluate->add_option("--guard", eval_guard, "Degree-ratio guard: fail or clamp:<lo>,<hi>");
  evaluate->add_option("--seed", seed, "Root seed for all randomness");
  evaluate->add_option("--threads", threads, "Worker threads (results do not depend on this)");
  evaluate->add_option("--out", eval_out, "Directory for report.json and report.csv");

  auto* verify = app.add_subcommand("verify", "Cross-check estimators against closed forms");
  bool verify_quick = false;
  double verify_scale = 1.0;
  std::string verify_out;
  verify->add_option("--seed", seed, "Root seed for all randomness");
  verify->add_option("--threads", threads, "Worker threads (results do not depend on this)");
  verify->add_flag("--quick", verify_quick,
                   "Smaller populations and replicate counts, wider sampling tolerances");
  verify->add_option("--estimate-scale", verify_scale,
                     "Corrupt the checked estimator by this factor (negative-control hook)")
      ->group("");
  verify->add_option("--out", verify_out, "Write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (simulate->parsed()) return run_simulate(sim_kind, sim_config, seed, threads, sim_out);
  if (estimate->parsed()) {
    return run_estimate(est_load, est_target, est_no_adjust, est_guard, est_degrees, est_out);
  }
  if (evaluate->parsed()) {
    return run_evaluate(eval_load, eval_simulate, eval_config, eval_degrees, eval_guard, seed,
                        threads, eval_out);
  }
  if (verify->parsed()) {
    return run_verify(seed, threads, verify_quick, verify_scale, verify_out);
  }
  return kExitValidation;
}
