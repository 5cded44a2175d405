#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matreg/error.hpp"

namespace matreg {

/// Dense real matrix, row-major, 64-bit. Dimensions are at least 1x1 and all
/// entries are finite when the matrix is built from external data.
class Mat {
 public:
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    check_shape(rows, cols);
    data_.assign(rows * cols, 0.0);
  }

  Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape(rows, cols);
    if (data_.size() != rows * cols)
      throw ArgumentError("Mat: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    for (double v : data_)
      if (!std::isfinite(v)) throw ArgumentError("Mat: non-finite entry");
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Mat diagonal(std::span<const double> d, std::size_t rows,
                      std::size_t cols) {
    Mat m(rows, cols);
    for (std::size_t i = 0; i < d.size() && i < rows && i < cols; ++i)
      m(i, i) = d[i];
    return m;
  }

  static Mat diagonal(std::span<const double> d) {
    return diagonal(d, d.size(), d.size());
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Mat& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat& operator+=(const Mat& o) {
    require_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    require_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Mat& operator*=(double a) {
    for (double& v : data_) v *= a;
    return *this;
  }

  /// this += a * o
  void add_scaled(double a, const Mat& o) {
    require_same(o);
    const double* src = o.data_.data();
    double* dst = data_.data();
    const std::size_t n = data_.size();
    for (std::size_t k = 0; k < n; ++k) dst[k] += a * src[k];
  }

  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double s) { return a *= s; }
  friend Mat operator*(double s, Mat a) { return a *= s; }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0)
      throw ArgumentError("Mat: dimensions must be at least 1x1");
  }
  void require_same(const Mat& o) const {
    if (!same_shape(o))
      throw ArgumentError("Mat: shape mismatch " + std::to_string(rows_) + "x" +
                          std::to_string(cols_) + " vs " +
                          std::to_string(o.rows_) + "x" +
                          std::to_string(o.cols_));
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows())
    throw ArgumentError("matmul: inner dimensions differ");
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline double frobenius_sq(const Mat& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

/// ||a - b||_F^2 without materialising the difference.
inline double frobenius_dist_sq(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ArgumentError("frobenius_dist_sq: shape mismatch");
  const auto x = a.data();
  const auto y = b.data();
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

inline bool all_finite(const Mat& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace matreg
