#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "causalfuse/error.hpp"

namespace causalfuse {

/// Row-major dense matrix of doubles; rows are samples or dictionary entries.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c)
      throw DimensionError("matrix " + std::to_string(r) + "x" + std::to_string(c) + " given " +
                           std::to_string(data.size()) + " values");
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in) {
    if (rows_in.empty()) return {};
    Matrix m(rows_in.size(), rows_in.front().size());
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (rows_in[i].size() != m.cols) throw DimensionError("ragged rows in matrix literal");
      std::copy(rows_in[i].begin(), rows_in[i].end(), m.data.begin() + static_cast<long>(i * m.cols));
    }
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace causalfuse
