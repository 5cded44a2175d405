#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "matreg/error.hpp"
#include "matreg/mat.hpp"
#include "matreg/svd.hpp"

namespace matreg {

inline constexpr double kRankTolerance = 1e-8;
inline constexpr double kRankFloor = 1e-12;

inline void require_nonneg_threshold(double tau, const char* who) {
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw ArgumentError(std::string(who) + ": threshold must be finite and >= 0");
}

/// (sigma_j - tau)_+ for each singular value. A value equal to tau is dropped.
inline std::vector<double> shrink_singular_values(std::span<const double> sigma,
                                                  double tau) {
  std::vector<double> out(sigma.size());
  for (std::size_t j = 0; j < sigma.size(); ++j)
    out[j] = sigma[j] > tau ? sigma[j] - tau : 0.0;
  return out;
}

/// Singular value soft-thresholding D_tau applied to a precomputed SVD.
inline Mat soft_threshold_nuclear(const Svd& d, double tau) {
  require_nonneg_threshold(tau, "soft_threshold_nuclear");
  return reconstruct(d, shrink_singular_values(d.sigma, tau));
}

/// argmin_X 1/2 ||m - X||_F^2 + tau ||X||_*.
inline Mat soft_threshold_nuclear(const Mat& m, double tau) {
  require_nonneg_threshold(tau, "soft_threshold_nuclear");
  if (tau == 0.0) return m;
  return soft_threshold_nuclear(svd(m), tau);
}

/// argmin_X 1/2 ||m - X||_F^2 + tau ||X||_1, entry by entry.
inline Mat soft_threshold_elementwise(const Mat& m, double tau) {
  require_nonneg_threshold(tau, "soft_threshold_elementwise");
  Mat out = m;
  for (double& y : out.data()) {
    const double mag = std::abs(y) - tau;
    y = mag > 0.0 ? std::copysign(mag, y) : 0.0;
  }
  return out;
}

/// Count of singular values above tol * sigma[0] and above 1e-12.
inline std::size_t numeric_rank(std::span<const double> sigma, double tol) {
  if (!(tol >= 0.0)) throw ArgumentError("numeric_rank: tol must be >= 0");
  if (sigma.empty()) return 0;
  const double top = *std::max_element(sigma.begin(), sigma.end());
  if (top <= 0.0) return 0;
  const double cut = std::max(tol * top, kRankFloor);
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cut; }));
}

inline std::size_t numeric_rank(const Mat& m, double tol = kRankTolerance) {
  return numeric_rank(svd(m).sigma, tol);
}

struct MatrixNorms {
  double frobenius = 0.0;
  double nuclear = 0.0;
  double spectral = 0.0;
  double l1 = 0.0;
};

inline MatrixNorms norms(const Mat& m) {
  MatrixNorms out;
  out.frobenius = std::sqrt(frobenius_sq(m));
  for (double v : m.data()) out.l1 += std::abs(v);
  const Svd d = svd(m);
  for (double s : d.sigma) out.nuclear += s;
  out.spectral = d.sigma.empty() ? 0.0 : d.sigma.front();
  return out;
}

inline double nuclear_norm(std::span<const double> sigma) {
  double s = 0.0;
  for (double v : sigma) s += v;
  return s;
}

inline double l1_norm(const Mat& m) {
  double s = 0.0;
  for (double v : m.data()) s += std::abs(v);
  return s;
}

}  // namespace matreg
