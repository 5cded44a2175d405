#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "matreg/dataset.hpp"
#include "matreg/error.hpp"
#include "matreg/kernels.hpp"
#include "matreg/lapack.hpp"
#include "matreg/mat.hpp"
#include "matreg/parallel.hpp"
#include "matreg/prox.hpp"
#include "matreg/svd.hpp"

namespace matreg {

enum class Penalty { none, nuclear, lasso };

inline std::string_view to_string(Penalty p) {
  switch (p) {
    case Penalty::none: return "none";
    case Penalty::nuclear: return "nuclear";
    case Penalty::lasso: return "lasso";
  }
  return "?";
}

inline Penalty parse_penalty(std::string_view s) {
  if (s == "none") return Penalty::none;
  if (s == "nuclear") return Penalty::nuclear;
  if (s == "lasso") return Penalty::lasso;
  throw ArgumentError("unknown penalty '" + std::string(s) + "'");
}

/// Which scale FitConfig::lambda is on: the penalty weight lambda_n of the
/// kernel-weighted objective, or the effective threshold tau applied to the
/// Nadaraya-Watson fit directly.
enum class LambdaScale { penalty, threshold };

struct FitConfig {
  KernelSpec kernel;
  double lambda = 0.0;
  Penalty penalty = Penalty::nuclear;
  LambdaScale scale = LambdaScale::penalty;
};

struct FitResult {
  Mat estimate;
  std::vector<double> singular_values;  // of estimate, nonincreasing
  std::size_t rank = 0;                 // numeric_rank(estimate, 1e-8)
  double effective_tau = 0.0;           // n lambda_n / sum_i w_i
  double weight_sum = 0.0;
  double objective = 0.0;
};

/// Kernel-weighted mean at x plus the pieces needed for objectives.
struct NwEstimate {
  Mat estimate;
  double weight_sum = 0.0;
  double weighted_rss = 0.0;  // sum_i w_i ||Y_i - estimate||_F^2
};

namespace detail {

inline std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t j = 0; j < x.size(); ++j) os << (j ? ", " : "") << x[j];
  os << ')';
  return os.str();
}

[[noreturn]] inline void throw_degenerate(std::span<const double> x, double h) {
  std::ostringstream os;
  os.precision(17);
  os << "all kernel weights are zero at x = " << format_point(x)
     << " with bandwidth h = " << h;
  throw DegenerateNeighborhoodError(os.str(), {x.begin(), x.end()}, h);
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ArgumentError("lambda must be finite and >= 0");
}

/// Row r of the result is sum_i (w[r, i] / totals[r]) Y_i for a row-major
/// weight block w (rows x n), formed as one matrix product.
inline std::vector<Mat> weighted_means(const Dataset& data,
                                       std::span<const double> w,
                                       std::span<const double> totals) {
  const std::size_t n = data.size();
  const std::size_t rows = totals.size();
  const std::size_t len = data.p() * data.q();
  std::vector<double> scaled(rows * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) scaled[r * n + i] = w[r * n + i] / totals[r];
  std::vector<double> stacked(n * len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = data[i].y.data();
    std::copy(y.begin(), y.end(), stacked.begin() + static_cast<std::ptrdiff_t>(i * len));
  }
  std::vector<double> prod(rows * len);
  gemm_row_major(rows, len, n, scaled.data(), stacked.data(), prod.data());
  std::vector<Mat> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r)
    out.emplace_back(data.p(), data.q(),
                     std::vector<double>(prod.begin() + static_cast<std::ptrdiff_t>(r * len),
                                         prod.begin() + static_cast<std::ptrdiff_t>((r + 1) * len)));
  return out;
}

}  // namespace detail

inline NwEstimate nw_estimate(const Dataset& data, const KernelSpec& kernel,
                              std::span<const double> x,
                              bool with_weighted_rss = true) {
  if (x.size() != data.s() || kernel.dim() != data.s())
    throw ArgumentError("evaluation point has dimension " +
                        std::to_string(x.size()) + ", data has " +
                        std::to_string(data.s()));
  const std::vector<double> w = weights(kernel, x, data.covariates());
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) detail::throw_degenerate(x, kernel.bandwidth());
  const double totals[] = {total};
  NwEstimate out{std::move(detail::weighted_means(data, w, totals).front()), total, 0.0};
  if (with_weighted_rss)
    for (std::size_t i = 0; i < data.size(); ++i)
      if (w[i] != 0.0)
        out.weighted_rss += w[i] * frobenius_dist_sq(data[i].y, out.estimate);
  return out;
}

/// tau = n lambda_n / sum_i w_i, or lambda itself on the threshold scale.
inline double effective_threshold(const FitConfig& cfg, std::size_t n,
                                  double weight_sum) {
  if (cfg.penalty == Penalty::none) return 0.0;
  detail::check_lambda(cfg.lambda);
  if (cfg.scale == LambdaScale::threshold) return cfg.lambda;
  return static_cast<double>(n) * cfg.lambda / weight_sum;
}

/// lambda_n implied by a threshold tau at a point with the given weight sum.
inline double penalty_weight(const FitConfig& cfg, std::size_t n,
                             double weight_sum) {
  if (cfg.penalty == Penalty::none) return 0.0;
  if (cfg.scale == LambdaScale::penalty) return cfg.lambda;
  return cfg.lambda * weight_sum / static_cast<double>(n);
}

/// Nadaraya-Watson fit. objective = sum_i w_i ||Y_i - estimate||_F^2.
inline FitResult fit_nw(const Dataset& data, const KernelSpec& kernel,
                        std::span<const double> x) {
  NwEstimate nw = nw_estimate(data, kernel, x);
  const Svd d = svd(nw.estimate);
  FitResult r{std::move(nw.estimate), d.sigma, 0, 0.0, nw.weight_sum,
              nw.weighted_rss};
  r.rank = numeric_rank(r.singular_values, kRankTolerance);
  return r;
}

/// Nuclear-norm penalised fit: singular value soft-thresholding of the
/// Nadaraya-Watson fit at tau = n lambda_n / sum_i w_i. objective is
/// 1/(2n) sum_i w_i ||Y_i - g||_F^2 + lambda_n ||g||_*.
inline FitResult fit_nuclear(const Dataset& data, const FitConfig& cfg,
                             std::span<const double> x) {
  if (cfg.penalty != Penalty::nuclear)
    throw ArgumentError("fit_nuclear: penalty must be nuclear");
  detail::check_lambda(cfg.lambda);
  NwEstimate nw = nw_estimate(data, cfg.kernel, x);
  const std::size_t n = data.size();
  const double tau = effective_threshold(cfg, n, nw.weight_sum);
  const Svd d = svd(nw.estimate);
  std::vector<double> shrunk = shrink_singular_values(d.sigma, tau);

  double removed_sq = 0.0;  // ||NW - g||_F^2
  for (std::size_t k = 0; k < d.sigma.size(); ++k) {
    const double m = d.sigma[k] - shrunk[k];
    removed_sq += m * m;
  }
  const double lambda_n = penalty_weight(cfg, n, nw.weight_sum);
  const double objective =
      (nw.weighted_rss + nw.weight_sum * removed_sq) / (2.0 * static_cast<double>(n)) +
      lambda_n * nuclear_norm(shrunk);

  Mat g = tau == 0.0 ? std::move(nw.estimate) : reconstruct(d, shrunk);
  FitResult r{std::move(g), shrunk, 0, tau, nw.weight_sum, objective};
  r.rank = numeric_rank(r.singular_values, kRankTolerance);
  return r;
}

/// Entrywise l1 penalised fit: soft-thresholding of the Nadaraya-Watson
/// fit at the same tau. objective is
/// 1/(2n) sum_i w_i ||Y_i - g||_F^2 + lambda_n ||g||_1.
inline FitResult fit_lasso(const Dataset& data, const FitConfig& cfg,
                           std::span<const double> x) {
  if (cfg.penalty != Penalty::lasso)
    throw ArgumentError("fit_lasso: penalty must be lasso");
  detail::check_lambda(cfg.lambda);
  NwEstimate nw = nw_estimate(data, cfg.kernel, x);
  const std::size_t n = data.size();
  const double tau = effective_threshold(cfg, n, nw.weight_sum);
  Mat g = soft_threshold_elementwise(nw.estimate, tau);
  const double lambda_n = penalty_weight(cfg, n, nw.weight_sum);
  const double objective =
      (nw.weighted_rss + nw.weight_sum * frobenius_dist_sq(nw.estimate, g)) /
          (2.0 * static_cast<double>(n)) +
      lambda_n * l1_norm(g);
  const Svd d = svd(g);
  FitResult r{std::move(g), d.sigma, 0, tau, nw.weight_sum, objective};
  r.rank = numeric_rank(r.singular_values, kRankTolerance);
  return r;
}

inline FitResult fit(const Dataset& data, const FitConfig& cfg,
                     std::span<const double> x) {
  switch (cfg.penalty) {
    case Penalty::none: return fit_nw(data, cfg.kernel, x);
    case Penalty::nuclear: return fit_nuclear(data, cfg, x);
    case Penalty::lasso: return fit_lasso(data, cfg, x);
  }
  throw ArgumentError("fit: unknown penalty");
}

/// Estimate only (no singular values, no objective); the fast path used by
/// simulations and cross-validation.
inline Mat predict(const Dataset& data, const FitConfig& cfg,
                   std::span<const double> x) {
  NwEstimate nw = nw_estimate(data, cfg.kernel, x, false);
  const double tau = effective_threshold(cfg, data.size(), nw.weight_sum);
  switch (cfg.penalty) {
    case Penalty::none: return std::move(nw.estimate);
    case Penalty::nuclear: return soft_threshold_nuclear(nw.estimate, tau);
    case Penalty::lasso: return soft_threshold_elementwise(nw.estimate, tau);
  }
  throw ArgumentError("predict: unknown penalty");
}

/// predict() at every point, with the weighted sums formed as one matrix
/// product.
inline std::vector<Mat> predict_many(const Dataset& data, const FitConfig& cfg,
                                     std::span<const std::vector<double>> xs) {
  const std::size_t n = data.size();
  std::vector<double> w(xs.size() * n);
  std::vector<double> totals(xs.size());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    if (xs[r].size() != data.s() || cfg.kernel.dim() != data.s())
      throw ArgumentError("evaluation point has dimension " +
                          std::to_string(xs[r].size()) + ", data has " +
                          std::to_string(data.s()));
    const std::vector<double> row = weights(cfg.kernel, xs[r], data.covariates());
    double total = 0.0;
    for (double v : row) total += v;
    if (!(total > 0.0)) detail::throw_degenerate(xs[r], cfg.kernel.bandwidth());
    std::copy(row.begin(), row.end(), w.begin() + static_cast<std::ptrdiff_t>(r * n));
    totals[r] = total;
  }
  std::vector<Mat> out = detail::weighted_means(data, w, totals);
  if (cfg.penalty == Penalty::none) return out;
  const auto errors = parallel_for(out.size(), [&](std::size_t r) {
    const double tau = effective_threshold(cfg, n, totals[r]);
    out[r] = cfg.penalty == Penalty::nuclear
                 ? soft_threshold_nuclear(out[r], tau)
                 : soft_threshold_elementwise(out[r], tau);
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// fit() at every point, in order. Failures are collected and reported
/// together with their indices.
inline std::vector<FitResult> fit_path(const Dataset& data, const FitConfig& cfg,
                                       std::span<const std::vector<double>> xs) {
  std::vector<std::optional<FitResult>> slots(xs.size());
  const auto errors =
      parallel_for(xs.size(), [&](std::size_t i) { slots[i] = fit(data, cfg, xs[i]); });
  std::vector<IndexedFailure> failures;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) failures.push_back({i, describe(errors[i])});
  if (!failures.empty()) throw PathError(std::move(failures));
  std::vector<FitResult> out;
  out.reserve(xs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace matreg
