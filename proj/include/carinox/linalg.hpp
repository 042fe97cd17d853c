#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "carinox/errors.hpp"

namespace carinox {

using Vec = std::vector<double>;

// Dense row-major matrix. Small sizes only; no attempt at blocking.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // rows * cols entries, row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline Vec matvec(const Mat& m, const Vec& x) {
  if (x.size() != m.cols)
    throw contract_error("matvec: expected vector of size " +
                         std::to_string(m.cols) + ", got " +
                         std::to_string(x.size()));
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// y += A^T g, the vector-Jacobian product of matvec.
inline void matvec_transpose_accumulate(const Mat& m, const Vec& g, Vec& y) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += gr * row[c];
  }
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw contract_error("dot: size mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw contract_error("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec scaled(const Vec& x, double alpha) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i];
  return y;
}

inline bool all_finite(const Vec& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace carinox
