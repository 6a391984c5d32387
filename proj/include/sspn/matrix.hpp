#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace sspn {

// Dense column-major matrix. Columns are contiguous so a row range of one
// column is a plain span, which is what the batched kernels consume.
class ColMatrix {
 public:
  ColMatrix() = default;
  ColMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[c * rows_ + r];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[c * rows_ + r];
  }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  std::vector<double> row(std::size_t r) const {
    std::vector<double> out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
    return out;
  }

  // Copy of the listed rows, in the given order.
  ColMatrix select_rows(std::span<const std::size_t> rows) const {
    ColMatrix out(rows.size(), cols_);
    for (std::size_t c = 0; c < cols_; ++c) {
      auto src = col(c);
      auto dst = out.col(c);
      for (std::size_t i = 0; i < rows.size(); ++i) dst[i] = src[rows[i]];
    }
    return out;
  }

  // Vertical concatenation (same column count).
  static ColMatrix stack(const ColMatrix& top, const ColMatrix& bottom) {
    if (top.rows() == 0) return bottom;
    if (bottom.rows() == 0) return top;
    assert(top.cols() == bottom.cols());
    ColMatrix out(top.rows() + bottom.rows(), top.cols());
    for (std::size_t c = 0; c < top.cols(); ++c) {
      auto dst = out.col(c);
      auto a = top.col(c);
      auto b = bottom.col(c);
      std::copy(a.begin(), a.end(), dst.begin());
      std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
    }
    return out;
  }

  static ColMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    ColMatrix out(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      assert(rows[r].size() == out.cols());
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = rows[r][c];
    }
    return out;
  }

  bool operator==(const ColMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace sspn
