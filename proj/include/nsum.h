#ifndef NSUM_H
#define NSUM_H

/*
 * C interface to the scale-up estimation library. All functions return a
 * status code; on failure nsum_last_error() holds a message for the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with nsum_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nsum_status {
  NSUM_OK = 0,
  NSUM_ERR_INVALID_ARGUMENT = 1,
  NSUM_ERR_VALIDATION = 2,
  NSUM_ERR_NUMERIC_GUARD = 3,
  NSUM_ERR_IO = 4,
  NSUM_ERR_INTERNAL = 5
} nsum_status;

typedef struct nsum_survey nsum_survey;

const char* nsum_version(void);

/* Message for the most recent failure on this thread; empty after success. */
const char* nsum_last_error(void);

/*
 * Loads a survey from a response CSV (header of subpopulation labels,
 * optional leading "id" column, integer cells, empty or "NA" = missing) and
 * a metadata JSON file {"total_population", "known_sizes", "hidden"}.
 * missing_policy is "drop-respondent" (default when NULL) or "reject".
 */
nsum_status nsum_survey_load(const char* responses_csv_path, const char* metadata_json_path,
                             const char* missing_policy, nsum_survey** out_survey);

/* Writes the canonical CSV + metadata JSON pair for a survey. */
nsum_status nsum_survey_save(const nsum_survey* survey, const char* responses_csv_path,
                             const char* metadata_json_path);

/* Column subset: spec is "all", "include:a,b" or "exclude:a,b". */
nsum_status nsum_survey_filter(const nsum_survey* survey, const char* filter_spec,
                               nsum_survey** out_survey);

void nsum_survey_free(nsum_survey* survey);

nsum_status nsum_survey_shape(const nsum_survey* survey, size_t* respondents,
                              size_t* subpopulations, size_t* known_count,
                              size_t* dropped_rows);
nsum_status nsum_survey_total_population(const nsum_survey* survey, int64_t* out_total);
/* Borrowed pointer, valid while the survey lives. */
nsum_status nsum_survey_label(const nsum_survey* survey, size_t index, const char** out_label);
nsum_status nsum_survey_is_known(const nsum_survey* survey, size_t index, int* out_known);
nsum_status nsum_survey_known_size(const nsum_survey* survey, size_t index, int64_t* out_size);

/*
 * Generates a synthetic world. kind is "binomial", "binomial-varp" (exponents
 * cycling -2,-1,1,2) or "sbm". config_json optionally overrides the kind's
 * defaults; the seed argument overrides any seed inside config_json. The
 * survey has every subpopulation size known. out_truth_json (optional)
 * receives generation truth: true degrees plus the bias profile or the block
 * structure.
 */
nsum_status nsum_simulate(const char* kind, const char* config_json, uint64_t seed,
                          int threads, nsum_survey** out_survey, char** out_truth_json);

/*
 * Size estimation. options_json (optional):
 *   {
 *     "adjust": bool (default true),
 *     "guard": "fail" | "clamp:<lo>,<hi>" (default "fail"),
 *     "degrees": "estimated" | {"values": [per-respondent degrees]},
 *     "target": "<label>"  // default: every hidden subpopulation
 *   }
 * The report JSON carries basic and adjusted estimates, first-stage slopes
 * and the second-stage line per target.
 */
nsum_status nsum_estimate(const nsum_survey* survey, const char* options_json,
                          char** out_report_json);

/*
 * Leave-one-out evaluation over the known subpopulations. options_json
 * (optional):
 *   {
 *     "filter": "all" | "include:a,b" | "exclude:a,b",
 *     "guard": "fail" | "clamp:<lo>,<hi>",
 *     "degrees": "estimated" | {"values": [...]},
 *     "seed": uint64 (provenance only),
 *     "threads": int
 *   }
 */
nsum_status nsum_evaluate(const nsum_survey* survey, const char* options_json,
                          char** out_report_json);

/* Tidy CSV (one row per subpopulation per estimator) for an evaluation
 * report produced by nsum_evaluate. */
nsum_status nsum_report_to_csv(const char* report_json, char** out_csv);

/*
 * Runs the built-in estimator cross-checks. options_json (optional):
 *   {"seed": uint64, "threads": int, "quick": bool, "estimate_scale": double}
 * estimate_scale deliberately corrupts the checked estimator and exists for
 * negative-control tests. The report lists each check with expected vs
 * observed values and the tolerance applied; "all_passed" summarizes.
 */
nsum_status nsum_verify(const char* options_json, char** out_report_json);

void nsum_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* NSUM_H */
