#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "matreg/dataset.hpp"
#include "matreg/error.hpp"
#include "matreg/mat.hpp"

namespace matreg {

/// Number of windows of length `window` taken every `stride` rows of a
/// series with `length` rows.
inline std::size_t window_count(std::size_t length, std::size_t window,
                                std::size_t stride) {
  if (window < 2) throw ArgumentError("sliding window must hold at least 2 rows");
  if (stride < 1) throw ArgumentError("sliding stride must be at least 1");
  if (window > length)
    throw ArgumentError("window " + std::to_string(window) + " exceeds series length " +
                        std::to_string(length));
  return (length - window) / stride + 1;
}

/// Sample covariance (divisor window - 1) of each window of a T x d series.
/// Window t covers rows [t * stride, t * stride + window); its covariate is
/// the window centre divided by T - 1, so it lies in [0, 1].
inline Dataset sliding_covariance(const Mat& series, std::size_t window,
                                  std::size_t stride) {
  const std::size_t length = series.rows();
  const std::size_t d = series.cols();
  const std::size_t count = window_count(length, window, stride);
  const double denom = static_cast<double>(window - 1);
  const double span = length > 1 ? static_cast<double>(length - 1) : 1.0;

  std::vector<Sample> out;
  out.reserve(count);
  std::vector<double> mean(d);
  std::vector<double> centred(window * d);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t t = 0; t < window; ++t)
      for (std::size_t a = 0; a < d; ++a) mean[a] += series(start + t, a);
    for (double& m : mean) m /= static_cast<double>(window);
    for (std::size_t t = 0; t < window; ++t)
      for (std::size_t a = 0; a < d; ++a)
        centred[t * d + a] = series(start + t, a) - mean[a];

    Mat cov(d, d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        double s = 0.0;
        for (std::size_t t = 0; t < window; ++t) s += centred[t * d + a] * centred[t * d + b];
        cov(a, b) = s / denom;
        cov(b, a) = cov(a, b);
      }
    const double centre = static_cast<double>(start) + 0.5 * denom;
    out.push_back(Sample{{centre / span}, std::move(cov)});
  }
  return Dataset(std::move(out));
}

}  // namespace matreg
