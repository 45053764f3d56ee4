#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nsum {

/// Dense row-major matrix of counts.
class IntMatrix {
 public:
  IntMatrix() = default;
  IntMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::int64_t& at(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }
  std::int64_t at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }

  std::span<const std::int64_t> row(std::size_t r) const {
    return {cells_.data() + r * cols_, cols_};
  }
  std::span<std::int64_t> row(std::size_t r) {
    return {cells_.data() + r * cols_, cols_};
  }

  std::int64_t col_sum(std::size_t c) const {
    std::int64_t s = 0;
    for (std::size_t r = 0; r < rows_; ++r) s += at(r, c);
    return s;
  }

  bool operator==(const IntMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> cells_;
};

}  // namespace nsum
