#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matreg/error.hpp"

namespace matreg {

enum class KernelFamily { gaussian, epanechnikov };

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::gaussian ? "gaussian" : "epanechnikov";
}

inline KernelFamily parse_kernel_family(std::string_view s) {
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "epanechnikov") return KernelFamily::epanechnikov;
  throw ArgumentError("unknown kernel family '" + std::string(s) + "'");
}

/// Isotropic kernel: one bandwidth h for all s covariate coordinates.
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, double bandwidth, std::size_t dim)
      : family_(family), bandwidth_(bandwidth), dim_(dim) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw ArgumentError("KernelSpec: bandwidth must be positive and finite");
    if (dim == 0) throw ArgumentError("KernelSpec: dimension must be >= 1");
  }

  KernelFamily family() const noexcept { return family_; }
  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t dim() const noexcept { return dim_; }

  KernelSpec with_bandwidth(double h) const { return {family_, h, dim_}; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelFamily family_;
  double bandwidth_;
  std::size_t dim_;
};

/// K(u): (2 pi)^(-s/2) exp(-|u|^2 / 2) or the product of 0.75 (1 - u_j^2)_+.
inline double kernel_value(const KernelSpec& spec, std::span<const double> u) {
  if (u.size() != spec.dim())
    throw ArgumentError("kernel_value: expected " + std::to_string(spec.dim()) +
                        " coordinates, got " + std::to_string(u.size()));
  if (spec.family() == KernelFamily::gaussian) {
    double r2 = 0.0;
    for (double c : u) r2 += c * c;
    const double norm =
        std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(u.size()));
    return norm * std::exp(-0.5 * r2);
  }
  double k = 1.0;
  for (double c : u) {
    const double t = 1.0 - c * c;
    if (t <= 0.0) return 0.0;
    k *= 0.75 * t;
  }
  return k;
}

/// K_H(x - xi) = h^(-s) K((x - xi) / h).
inline double kernel_weight(const KernelSpec& spec, std::span<const double> x,
                            std::span<const double> xi) {
  const std::size_t s = spec.dim();
  if (x.size() != s || xi.size() != s)
    throw ArgumentError("kernel_weight: covariate dimension mismatch");
  const double h = spec.bandwidth();
  if (spec.family() == KernelFamily::gaussian) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      const double d = (x[j] - xi[j]) / h;
      r2 += d * d;
    }
    const double norm = std::pow(2.0 * std::numbers::pi * h * h,
                                 -0.5 * static_cast<double>(s));
    return norm * std::exp(-0.5 * r2);
  }
  double k = 1.0;
  for (std::size_t j = 0; j < s; ++j) {
    const double d = (x[j] - xi[j]) / h;
    const double t = 1.0 - d * d;
    if (t <= 0.0) return 0.0;
    k *= 0.75 * t / h;
  }
  return k;
}

/// K_H(0).
inline double kernel_peak(const KernelSpec& spec) {
  const std::vector<double> zero(spec.dim(), 0.0);
  return kernel_weight(spec, zero, zero);
}

/// K_H(x - X_i) for every covariate in xs.
inline std::vector<double> weights(const KernelSpec& spec,
                                   std::span<const double> x,
                                   std::span<const std::vector<double>> xs) {
  std::vector<double> w(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) w[i] = kernel_weight(spec, x, xs[i]);
  return w;
}

}  // namespace matreg
