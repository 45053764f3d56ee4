#include "core/survey.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "core/errors.hpp"
#include "json.hpp"

namespace nsum {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

MissingPolicy MissingPolicy::parse(const std::string& text) {
  if (text == "drop-respondent" || text == "drop") return {Mode::DropRespondent};
  if (text == "reject") return {Mode::Reject};
  throw ValidationError("unknown missing policy '" + text +
                        "' (expected 'drop-respondent' or 'reject')");
}

std::string MissingPolicy::name() const {
  return mode == Mode::DropRespondent ? "drop-respondent" : "reject";
}

SubpopulationFilter SubpopulationFilter::parse(const std::string& spec) {
  std::string s = trim(spec);
  if (s.empty() || s == "all") return {};
  auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ValidationError("bad filter spec '" + spec +
                          "' (expected 'all', 'include:...' or 'exclude:...')");
  std::string verb = s.substr(0, colon);
  std::vector<std::string> labels;
  std::stringstream ss(s.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) labels.push_back(item);
  }
  if (labels.empty())
    throw ValidationError("filter spec '" + spec + "' lists no labels");
  if (verb == "include") return include(std::move(labels));
  if (verb == "exclude") return exclude(std::move(labels));
  throw ValidationError("bad filter verb '" + verb + "' in '" + spec + "'");
}

SubpopulationFilter SubpopulationFilter::include(std::vector<std::string> labels) {
  SubpopulationFilter f;
  f.include_ = std::move(labels);
  return f;
}

SubpopulationFilter SubpopulationFilter::exclude(std::vector<std::string> labels) {
  SubpopulationFilter f;
  f.exclude_ = std::move(labels);
  return f;
}

bool SubpopulationFilter::keeps(const std::string& label) const {
  if (!include_.empty() &&
      std::find(include_.begin(), include_.end(), label) == include_.end())
    return false;
  return std::find(exclude_.begin(), exclude_.end(), label) == exclude_.end();
}

std::string SubpopulationFilter::spec() const {
  if (empty()) return "all";
  std::string out;
  if (!include_.empty()) out += "include:" + join(include_, ",");
  if (!exclude_.empty()) {
    if (!out.empty()) out += ";";
    out += "exclude:" + join(exclude_, ",");
  }
  return out;
}

ArdSurvey::ArdSurvey(IntMatrix responses, std::vector<std::string> labels,
                     std::vector<std::optional<std::int64_t>> known_sizes,
                     std::int64_t total_population,
                     std::vector<std::string> row_ids, std::size_t dropped_rows)
    : responses_(std::make_shared<IntMatrix>(std::move(responses))),
      labels_(std::move(labels)),
      sizes_(std::move(known_sizes)),
      total_(total_population),
      row_ids_(std::move(row_ids)),
      dropped_(dropped_rows) {
  const std::size_t n = responses_->rows();
  const std::size_t k = responses_->cols();
  if (n < 2) throw ValidationError("survey needs at least 2 respondents, got " + std::to_string(n));
  if (k == 0) throw ValidationError("survey has no subpopulation columns");
  if (labels_.size() != k)
    throw ValidationError("label count does not match response columns");
  if (sizes_.size() != k)
    throw ValidationError("size count does not match response columns");
  if (!row_ids_.empty() && row_ids_.size() != n)
    throw ValidationError("row id count does not match respondent rows");
  if (total_ <= 0) throw ValidationError("total population must be positive");

  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ValidationError("empty subpopulation label");
    if (!seen.insert(l).second)
      throw ValidationError("duplicate subpopulation label '" + l + "'");
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes_[c]) {
      if (*sizes_[c] <= 0)
        throw ValidationError("size of '" + labels_[c] + "' must be positive");
      if (*sizes_[c] > total_)
        throw ValidationError("size of '" + labels_[c] + "' exceeds the total population");
      known_.push_back(c);
      known_size_sum_ += *sizes_[c];
    } else {
      hidden_.push_back(c);
    }
  }
  if (known_.empty())
    throw ValidationError("survey needs at least one subpopulation of known size");
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c)
      if (responses_->at(r, c) < 0)
        throw ValidationError("negative response at row " + std::to_string(r + 1) +
                              ", column '" + labels_[c] + "'");
}

std::optional<std::size_t> ArdSurvey::find_label(const std::string& label) const {
  for (std::size_t c = 0; c < labels_.size(); ++c)
    if (labels_[c] == label) return c;
  return std::nullopt;
}

std::int64_t ArdSurvey::known_size(std::size_t k) const {
  if (k >= sizes_.size() || !sizes_[k])
    throw ValidationError("subpopulation '" + (k < labels_.size() ? labels_[k] : "?") +
                          "' has no known size");
  return *sizes_[k];
}

ArdSurvey ArdSurvey::with_hidden(std::size_t k) const {
  if (k >= sizes_.size()) throw ValidationError("subpopulation index out of range");
  ArdSurvey copy = *this;
  copy.sizes_[k] = std::nullopt;
  copy.known_.clear();
  copy.hidden_.clear();
  copy.known_size_sum_ = 0;
  for (std::size_t c = 0; c < copy.sizes_.size(); ++c) {
    if (copy.sizes_[c]) {
      copy.known_.push_back(c);
      copy.known_size_sum_ += *copy.sizes_[c];
    } else {
      copy.hidden_.push_back(c);
    }
  }
  if (copy.known_.empty())
    throw ValidationError("cannot hide '" + labels_[k] + "': no known subpopulation would remain");
  return copy;
}

namespace {

struct ParsedCsv {
  bool has_id = false;
  std::vector<std::string> labels;
  std::vector<std::string> ids;
  IntMatrix cells;                        // kept rows only
  std::size_t dropped = 0;
};

std::optional<std::int64_t> parse_cell(const std::string& text, std::size_t row,
                                       const std::string& label) {
  if (text.empty() || text == "NA") return std::nullopt;
  std::int64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ValidationError("row " + std::to_string(row) + ", column '" + label +
                          "': cell '" + text + "' is not an integer");
  if (value < 0)
    throw ValidationError("row " + std::to_string(row) + ", column '" + label +
                          "': negative response " + text);
  return value;
}

ParsedCsv parse_responses_csv(const std::string& path, MissingPolicy policy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open responses file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("responses file '" + path + "' is empty");
  ParsedCsv out;
  out.labels = split_csv_line(line);
  if (out.labels.empty()) throw ValidationError("responses header is empty");
  if (out.labels.front() == "id") {
    out.has_id = true;
    out.labels.erase(out.labels.begin());
  }
  if (out.labels.empty())
    throw ValidationError("responses header has no subpopulation columns");
  const std::size_t width = out.labels.size() + (out.has_id ? 1 : 0);

  std::vector<std::vector<std::int64_t>> kept;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() && in.eof()) break;
    auto cells = split_csv_line(line);
    if (cells.size() != width)
      throw ValidationError("row " + std::to_string(row_number) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(width));
    std::string id;
    std::size_t offset = 0;
    if (out.has_id) {
      id = cells[0];
      offset = 1;
    }
    std::vector<std::int64_t> row(out.labels.size(), 0);
    bool missing = false;
    for (std::size_t c = 0; c < out.labels.size(); ++c) {
      auto value = parse_cell(cells[c + offset], row_number, out.labels[c]);
      if (!value) {
        if (policy.mode == MissingPolicy::Mode::Reject)
          throw ValidationError("row " + std::to_string(row_number) + ", column '" +
                                out.labels[c] + "': missing response");
        missing = true;
        break;
      }
      row[c] = *value;
    }
    if (missing) {
      ++out.dropped;
      continue;
    }
    kept.push_back(std::move(row));
    if (out.has_id) out.ids.push_back(id);
  }
  if (kept.empty())
    throw ValidationError("every respondent row was dropped for missing answers");
  out.cells = IntMatrix(kept.size(), out.labels.size());
  for (std::size_t r = 0; r < kept.size(); ++r)
    for (std::size_t c = 0; c < out.labels.size(); ++c)
      out.cells.at(r, c) = kept[r][c];
  return out;
}

}  // namespace

ArdSurvey load_survey(const std::string& responses_csv_path,
                      const std::string& metadata_json_path,
                      MissingPolicy policy) {
  ParsedCsv csv = parse_responses_csv(responses_csv_path, policy);

  std::ifstream meta_in(metadata_json_path);
  if (!meta_in) throw IoError("cannot open metadata file '" + metadata_json_path + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("metadata '" + metadata_json_path + "' is not valid JSON: " + e.what());
  }
  if (!meta.contains("total_population") || !meta["total_population"].is_number_integer())
    throw ValidationError("metadata needs an integer 'total_population'");
  if (!meta.contains("known_sizes") || !meta["known_sizes"].is_object())
    throw ValidationError("metadata needs a 'known_sizes' object");
  std::int64_t total = meta["total_population"].get<std::int64_t>();

  std::set<std::string> header(csv.labels.begin(), csv.labels.end());
  std::vector<std::optional<std::int64_t>> sizes(csv.labels.size());
  for (auto& [label, value] : meta["known_sizes"].items()) {
    if (!header.count(label))
      throw ValidationError("metadata lists unknown label '" + label + "'");
    if (!value.is_number_integer())
      throw ValidationError("size of '" + label + "' must be an integer");
    auto idx = std::find(csv.labels.begin(), csv.labels.end(), label) - csv.labels.begin();
    sizes[static_cast<std::size_t>(idx)] = value.get<std::int64_t>();
  }
  std::set<std::string> hidden_set;
  if (meta.contains("hidden")) {
    if (!meta["hidden"].is_array())
      throw ValidationError("metadata 'hidden' must be an array of labels");
    for (const auto& h : meta["hidden"]) {
      std::string label = h.get<std::string>();
      if (!header.count(label))
        throw ValidationError("metadata lists unknown hidden label '" + label + "'");
      hidden_set.insert(label);
    }
  }
  for (std::size_t c = 0; c < csv.labels.size(); ++c) {
    bool known = sizes[c].has_value();
    bool hidden = hidden_set.count(csv.labels[c]) > 0;
    if (known && hidden)
      throw ValidationError("label '" + csv.labels[c] + "' is both known and hidden");
    if (!known && !hidden)
      throw ValidationError("label '" + csv.labels[c] +
                            "' is neither in known_sizes nor listed as hidden");
  }

  return ArdSurvey(std::move(csv.cells), std::move(csv.labels), std::move(sizes),
                   total, std::move(csv.ids), csv.dropped);
}

void save_survey(const ArdSurvey& survey, const std::string& responses_csv_path,
                 const std::string& metadata_json_path) {
  std::ofstream csv(responses_csv_path);
  if (!csv) throw IoError("cannot write responses file '" + responses_csv_path + "'");
  const bool has_id = !survey.row_ids().empty();
  if (has_id) csv << "id,";
  csv << join(survey.labels(), ",") << "\n";
  for (std::size_t r = 0; r < survey.respondents(); ++r) {
    if (has_id) csv << survey.row_ids()[r] << ",";
    auto row = survey.responses().row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) csv << ",";
      csv << row[c];
    }
    csv << "\n";
  }
  if (!csv) throw IoError("failed while writing '" + responses_csv_path + "'");

  nlohmann::ordered_json meta;
  meta["total_population"] = survey.total_population();
  nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
  for (std::size_t k : survey.known_indices()) sizes[survey.label(k)] = survey.known_size(k);
  meta["known_sizes"] = std::move(sizes);
  nlohmann::ordered_json hidden = nlohmann::ordered_json::array();
  for (std::size_t k : survey.hidden_indices()) hidden.push_back(survey.label(k));
  meta["hidden"] = std::move(hidden);

  std::ofstream json_out(metadata_json_path);
  if (!json_out) throw IoError("cannot write metadata file '" + metadata_json_path + "'");
  json_out << meta.dump(2) << "\n";
  if (!json_out) throw IoError("failed while writing '" + metadata_json_path + "'");
}

ArdSurvey filter_subpopulations(const ArdSurvey& survey, const SubpopulationFilter& filter) {
  for (const auto& label : filter.included())
    if (!survey.find_label(label))
      throw ValidationError("filter names unknown label '" + label + "'");
  for (const auto& label : filter.excluded())
    if (!survey.find_label(label))
      throw ValidationError("filter names unknown label '" + label + "'");

  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < survey.subpopulations(); ++c)
    if (filter.keeps(survey.label(c))) kept.push_back(c);

  std::size_t known_kept = 0;
  for (std::size_t c : kept)
    if (survey.is_known(c)) ++known_kept;
  if (known_kept < 2)
    throw ValidationError("filter leaves " + std::to_string(known_kept) +
                          " known subpopulations; at least 2 are required");

  IntMatrix cells(survey.respondents(), kept.size());
  std::vector<std::string> labels;
  std::vector<std::optional<std::int64_t>> sizes;
  for (std::size_t j = 0; j < kept.size(); ++j) {
    labels.push_back(survey.label(kept[j]));
    sizes.push_back(survey.sizes()[kept[j]]);
    for (std::size_t r = 0; r < survey.respondents(); ++r)
      cells.at(r, j) = survey.responses().at(r, kept[j]);
  }
  return ArdSurvey(std::move(cells), std::move(labels), std::move(sizes),
                   survey.total_population(), survey.row_ids(), survey.dropped_rows());
}

}  // namespace nsum
