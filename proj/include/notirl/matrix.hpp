#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "notirl/errors.hpp"

namespace notirl {

// Row-major dense matrix of doubles. Deliberately minimal: the networks and
// fitters below need storage, shape checks and row views, nothing else.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols entries, row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool same_shape(const DenseMatrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

// log(sum_i exp(v_i)) with the max subtracted first so large magnitudes do
// not overflow; exact identity for a single element.
inline double logsumexp(std::span<const double> values) {
  if (values.empty()) throw NumericError("logsumexp: empty input");
  double m = values[0];
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) throw NumericError("logsumexp: non-finite input");
  if (values.size() == 1) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

// Solves A x = b by Gaussian elimination with partial pivoting. A is square;
// near-singular systems (pivot below `min_pivot` * max |A|) are reported via
// NumericError so callers can decide on regularization.
inline std::vector<double> solve_linear_system(DenseMatrix a,
                                               std::vector<double> b,
                                               double min_pivot = 1e-12) {
  if (a.rows != a.cols || a.rows != b.size())
    throw NumericError("solve_linear_system: shape mismatch");
  const std::size_t n = a.rows;
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw NumericError("solve_linear_system: zero matrix");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (std::abs(a.at(pivot, col)) < min_pivot * scale)
      throw NumericError("solve_linear_system: near-singular matrix at column " +
                         std::to_string(col));
    if (pivot != col) {
      for (std::size_t c = col; c < n; ++c)
        std::swap(a.at(pivot, c), a.at(col, c));
      std::swap(b[pivot], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) / a.at(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a.at(ri, c) * x[c];
    x[ri] = s / a.at(ri, ri);
  }
  return x;
}

}  // namespace notirl
