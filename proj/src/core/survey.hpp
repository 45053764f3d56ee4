#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/matrix.hpp"

namespace nsum {

/// How rows with missing response cells are handled at load time.
struct MissingPolicy {
  enum class Mode { DropRespondent, Reject };
  Mode mode = Mode::DropRespondent;

  static MissingPolicy parse(const std::string& text);
  std::string name() const;
};

/// Keeps or drops subpopulation columns by label. An empty filter keeps all.
class SubpopulationFilter {
 public:
  SubpopulationFilter() = default;

  /// Accepts "all", "include:a,b,c" or "exclude:a,b,c".
  static SubpopulationFilter parse(const std::string& spec);
  static SubpopulationFilter include(std::vector<std::string> labels);
  static SubpopulationFilter exclude(std::vector<std::string> labels);

  bool empty() const { return include_.empty() && exclude_.empty(); }
  bool keeps(const std::string& label) const;
  const std::vector<std::string>& included() const { return include_; }
  const std::vector<std::string>& excluded() const { return exclude_; }
  std::string spec() const;

 private:
  std::vector<std::string> include_;
  std::vector<std::string> exclude_;
};

/// Aggregated relational data: one row per respondent, one column per
/// subpopulation, cell (i,k) = how many members of subpopulation k
/// respondent i reports knowing. Column sizes are known for some
/// subpopulations and unknown (hidden) for the rest. Immutable after
/// construction; copies share the response matrix.
class ArdSurvey {
 public:
  ArdSurvey(IntMatrix responses, std::vector<std::string> labels,
            std::vector<std::optional<std::int64_t>> known_sizes,
            std::int64_t total_population,
            std::vector<std::string> row_ids = {}, std::size_t dropped_rows = 0);

  std::size_t respondents() const { return responses_->rows(); }
  std::size_t subpopulations() const { return responses_->cols(); }
  std::size_t known_count() const { return known_.size(); }

  const IntMatrix& responses() const { return *responses_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t k) const { return labels_[k]; }
  std::optional<std::size_t> find_label(const std::string& label) const;

  bool is_known(std::size_t k) const { return sizes_[k].has_value(); }
  std::int64_t known_size(std::size_t k) const;
  const std::vector<std::optional<std::int64_t>>& sizes() const { return sizes_; }
  std::int64_t total_population() const { return total_; }
  std::int64_t known_size_sum() const { return known_size_sum_; }

  const std::vector<std::size_t>& known_indices() const { return known_; }
  const std::vector<std::size_t>& hidden_indices() const { return hidden_; }

  std::size_t dropped_rows() const { return dropped_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }

  /// Same survey with subpopulation k reclassified as hidden (its size is
  /// forgotten). Shares the response matrix.
  ArdSurvey with_hidden(std::size_t k) const;

 private:
  std::shared_ptr<const IntMatrix> responses_;
  std::vector<std::string> labels_;
  std::vector<std::optional<std::int64_t>> sizes_;
  std::int64_t total_ = 0;
  std::vector<std::string> row_ids_;
  std::size_t dropped_ = 0;
  std::vector<std::size_t> known_;
  std::vector<std::size_t> hidden_;
  std::int64_t known_size_sum_ = 0;
};

/// Reads a response CSV (header row of labels, optional leading "id" column,
/// integer cells, empty or "NA" marks a missing answer) plus a metadata JSON
/// file ({"total_population", "known_sizes", "hidden"}).
ArdSurvey load_survey(const std::string& responses_csv_path,
                      const std::string& metadata_json_path,
                      MissingPolicy policy);

/// Writes the canonical CSV + metadata JSON pair for a survey. Reloading the
/// written files reproduces them byte for byte.
void save_survey(const ArdSurvey& survey, const std::string& responses_csv_path,
                 const std::string& metadata_json_path);

/// Column subset of a survey. Errors if a filter label does not exist or if
/// fewer than two known subpopulations would remain.
ArdSurvey filter_subpopulations(const ArdSurvey& survey, const SubpopulationFilter& filter);

}  // namespace nsum
