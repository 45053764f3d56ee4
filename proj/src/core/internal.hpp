#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "core/survey.hpp"

namespace nsum::internal {

// Row sums over the known columns and their grand total, kept as integers so
// ratio estimates are exact and independent of respondent order.
struct KnownSums {
  std::vector<std::int64_t> per_row;
  std::int64_t total = 0;
};

inline KnownSums known_row_sums(const ArdSurvey& survey) {
  KnownSums sums;
  sums.per_row.assign(survey.respondents(), 0);
  for (std::size_t r = 0; r < survey.respondents(); ++r) {
    auto row = survey.responses().row(r);
    std::int64_t s = 0;
    for (std::size_t k : survey.known_indices()) s += row[k];
    sums.per_row[r] = s;
    sums.total += s;
  }
  return sums;
}

inline bool integral_vector(std::span<const double> values) {
  for (double v : values)
    if (std::floor(v) != v || std::abs(v) > 9.0e15) return false;
  return true;
}

// (a * b) / c with an exact 128-bit product.
inline double exact_ratio(std::int64_t a, std::int64_t b, std::int64_t c) {
  __int128 num = static_cast<__int128>(a) * b;
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(c));
}

// Exact cross-moments of two integer sequences.
struct BilinearStats {
  std::int64_t n = 0;
  __int128 sum_x = 0, sum_y = 0, sum_xx = 0, sum_xy = 0, sum_yy = 0;

  void add(std::int64_t x, std::int64_t y) {
    ++n;
    sum_x += x;
    sum_y += y;
    sum_xx += static_cast<__int128>(x) * x;
    sum_xy += static_cast<__int128>(x) * y;
    sum_yy += static_cast<__int128>(y) * y;
  }
  // n*sum_xy - sum_x*sum_y etc., exact.
  long double sxy() const {
    return static_cast<long double>(static_cast<__int128>(n) * sum_xy - sum_x * sum_y);
  }
  long double sxx() const {
    return static_cast<long double>(static_cast<__int128>(n) * sum_xx - sum_x * sum_x);
  }
  long double syy() const {
    return static_cast<long double>(static_cast<__int128>(n) * sum_yy - sum_y * sum_y);
  }
};

}  // namespace nsum::internal
