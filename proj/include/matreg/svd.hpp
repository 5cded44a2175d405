#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "matreg/error.hpp"
#include "matreg/lapack.hpp"
#include "matreg/mat.hpp"

namespace matreg {

/// Thin singular value decomposition m = u * diag(sigma) * v^T with
/// r = min(p, q) components; zero singular values are kept.
struct Svd {
  Mat u;                      // p x r, orthonormal columns
  std::vector<double> sigma;  // r values, nonincreasing, nonnegative
  Mat v;                      // q x r, orthonormal columns

  std::size_t rank_capacity() const noexcept { return sigma.size(); }
};

/// Thin SVD through LAPACK's divide-and-conquer driver (dgesdd).
inline Svd svd(const Mat& m) {
  if (!all_finite(m)) throw ArgumentError("svd: non-finite input");
  const std::size_t p = m.rows();
  const std::size_t q = m.cols();
  const std::size_t r = std::min(p, q);
  // The row-major buffer of m is the column-major q x p matrix m^T, whose
  // SVD is v diag(sigma) u^T.
  std::vector<double> a(m.data().begin(), m.data().end());
  std::vector<double> sigma(r);
  std::vector<double> left(q * r);   // v, column-major q x r
  std::vector<double> right(r * p);  // u^T, column-major r x p
  const int info =
      detail::gesdd_thin(q, p, a.data(), sigma.data(), left.data(), right.data());
  if (info != 0)
    throw ConvergenceError("svd: LAPACK dgesdd failed with info = " +
                               std::to_string(info),
                           static_cast<double>(info));
  Mat u(p, r);
  Mat v(q, r);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < r; ++k) u(i, k) = right[k + i * r];
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t k = 0; k < r; ++k) v(j, k) = left[j + k * q];
  for (double& sv : sigma) sv = std::max(sv, 0.0);
  return Svd{std::move(u), std::move(sigma), std::move(v)};
}

/// u * diag(weights) * v^T using the leading weights.size() components.
inline Mat reconstruct(const Svd& d, std::span<const double> weights) {
  const std::size_t p = d.u.rows();
  const std::size_t q = d.v.rows();
  Mat out(p, q);
  const std::size_t r = std::min(weights.size(), d.sigma.size());
  for (std::size_t k = 0; k < r; ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < p; ++i) {
      const double ui = w * d.u(i, k);
      if (ui == 0.0) continue;
      double* row = &out(i, 0);
      for (std::size_t j = 0; j < q; ++j) row[j] += ui * d.v(j, k);
    }
  }
  return out;
}

inline Mat reconstruct(const Svd& d) { return reconstruct(d, d.sigma); }

}  // namespace matreg
