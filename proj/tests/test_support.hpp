#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/survey.hpp"

namespace testsupport {

inline nsum::ArdSurvey make_survey(const std::vector<std::vector<std::int64_t>>& rows,
                                   std::vector<std::string> labels,
                                   std::vector<std::optional<std::int64_t>> sizes,
                                   std::int64_t total_population) {
  nsum::IntMatrix m(rows.size(), labels.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < labels.size(); ++c) m.at(r, c) = rows[r][c];
  return nsum::ArdSurvey(std::move(m), std::move(labels), std::move(sizes), total_population);
}

/// Unique writable directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path = base / ("nsum-tests-" + std::to_string(counter.fetch_add(1)) + "-" +
                   std::to_string(std::hash<std::string>{}(base.string()) % 100000));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace testsupport
