#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "matreg/dataset.hpp"
#include "matreg/error.hpp"
#include "matreg/estimators.hpp"
#include "matreg/kernels.hpp"
#include "matreg/parallel.hpp"
#include "matreg/prox.hpp"
#include "matreg/svd.hpp"

namespace matreg {

/// Candidate bandwidths and penalty weights (lambda_n scale).
class TuneGrid {
 public:
  TuneGrid(std::vector<double> bandwidths, std::vector<double> lambdas)
      : bandwidths_(std::move(bandwidths)), lambdas_(std::move(lambdas)) {
    check(bandwidths_, "bandwidths");
    check(lambdas_, "lambdas");
    if (bandwidths_.front() <= 0.0)
      throw ArgumentError("TuneGrid: bandwidths must be positive");
    if (lambdas_.front() < 0.0)
      throw ArgumentError("TuneGrid: lambdas must be nonnegative");
  }

  const std::vector<double>& bandwidths() const noexcept { return bandwidths_; }
  const std::vector<double>& lambdas() const noexcept { return lambdas_; }

 private:
  static void check(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw ArgumentError(std::string("TuneGrid: no ") + what);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]))
        throw ArgumentError(std::string("TuneGrid: non-finite ") + what);
      if (i > 0 && !(v[i] > v[i - 1]))
        throw ArgumentError(std::string("TuneGrid: ") + what +
                            " must be strictly increasing");
    }
  }

  std::vector<double> bandwidths_;
  std::vector<double> lambdas_;
};

/// `count` values log-spaced on [lo, hi].
inline std::vector<double> log_space(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count == 0)
    throw ArgumentError("log_space: need 0 < lo <= hi and count >= 1");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) /
                              static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

struct DfOptions {
  /// Raise DegenerateSpectrumError on (near-)tied surviving singular values
  /// instead of using the continuous limit.
  bool strict = false;
};

/// Relative tie threshold on squared singular values.
inline constexpr double kTieTolerance = 1e-10;

/// Divergence of the singular value thresholding map at a matrix with
/// singular values `sigma` (length min(p, q)), threshold tau:
///   sum over surviving k of
///     1 + sum_{j<=p, j!=k} s_k (s_k - tau) / (s_k^2 - s_j^2)
///       + sum_{j<=q, j!=k} s_k (s_k - tau) / (s_k^2 - s_j^2)
/// with s_j = 0 beyond min(p, q). For two survivors the two ordered terms
/// add up to (s_k + s_j - tau) / (s_k + s_j); that form is used so tied
/// values have a finite, continuous contribution.
inline double svt_divergence(std::span<const double> sigma, double tau,
                             std::size_t p, std::size_t q, DfOptions opts = {},
                             std::size_t sample = 0) {
  if (tau == 0.0) return static_cast<double>(p * q);  // D_0 is the identity
  const std::size_t r = sigma.size();
  const double extra = static_cast<double>(std::max(p, q) - std::min(p, q));
  const double top = r ? sigma[0] : 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    const double sk = sigma[k];
    if (!(sk > tau) || sk <= 0.0) continue;
    double term = 1.0 + extra * (sk - tau) / sk;
    double cross = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      if (j == k) continue;
      const double sj = sigma[j];
      if (sj > tau) {
        if (opts.strict && std::abs(sk * sk - sj * sj) < kTieTolerance * top * top)
          throw DegenerateSpectrumError(
              "tied singular values " + std::to_string(k) + " and " +
                  std::to_string(j) + " at sample " + std::to_string(sample),
              sample, k, j);
        cross += 0.5 * (sk + sj - tau) / (sk + sj);
      } else {
        cross += sk * (sk - tau) / ((sk - sj) * (sk + sj));
      }
    }
    total += term + 2.0 * cross;
  }
  return total;
}

namespace detail {

/// In-sample Nadaraya-Watson fits for one bandwidth, with the spectral
/// pieces needed to evaluate any threshold cheaply.
class InSampleCache {
 public:
  InSampleCache(const Dataset& data, const KernelSpec& kernel, bool spectral)
      : kernel_(kernel) {
    const std::size_t n = data.size();
    const auto& xs = data.covariates();
    std::vector<double> w(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i * n + i] = kernel_weight(kernel, xs[i], xs[i]);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = kernel_weight(kernel, xs[i], xs[j]);
        w[i * n + j] = v;
        w[j * n + i] = v;
      }
    }
    const double peak = kernel_peak(kernel);
    weight_sum_.resize(n);
    self_ratio_.resize(n);
    rss_nw_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += w[i * n + j];
      if (!(total > 0.0)) throw_degenerate(xs[i], kernel.bandwidth());
      weight_sum_[i] = total;
      self_ratio_[i] = peak / total;
    }
    nw_ = weighted_means(data, w, weight_sum_);
    y_sq_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rss_nw_[i] = frobenius_dist_sq(data[i].y, nw_[i]);
      y_sq_[i] = frobenius_sq(data[i].y);
    }
    if (!spectral) return;
    svd_.reserve(n);
    proj_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      svd_.push_back(svd(nw_[i]));
      const Svd& d = svd_.back();
      const Mat resid = data[i].y - nw_[i];
      const std::size_t r = d.sigma.size();
      std::vector<double> rv(resid.rows() * r);  // resid * v, p x r
      gemm_row_major(resid.rows(), r, resid.cols(), resid.data().data(),
                     d.v.data().data(), rv.data());
      std::vector<double>& c = proj_[i];
      c.assign(r, 0.0);
      for (std::size_t a = 0; a < resid.rows(); ++a)
        for (std::size_t k = 0; k < r; ++k) c[k] += d.u(a, k) * rv[a * r + k];
    }
  }

  std::size_t size() const noexcept { return nw_.size(); }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const Mat& nw(std::size_t i) const { return nw_[i]; }
  double weight_sum(std::size_t i) const { return weight_sum_[i]; }
  double self_ratio(std::size_t i) const { return self_ratio_[i]; }
  double rss_nw(std::size_t i) const { return rss_nw_[i]; }
  const Svd& spectrum(std::size_t i) const { return svd_.at(i); }

  double tau(std::size_t i, double lambda) const {
    return static_cast<double>(size()) * lambda / weight_sum_[i];
  }

  /// ||Y_i - D_tau(NW_i)||_F^2 from the cached spectrum.
  double rss_nuclear(std::size_t i, double tau) const {
    const Svd& d = svd_[i];
    if (d.sigma.empty() || tau >= d.sigma.front()) return y_sq_[i];  // zero fit
    double rss = rss_nw_[i];
    for (std::size_t k = 0; k < d.sigma.size(); ++k) {
      const double m = std::min(d.sigma[k], tau);
      rss += m * m + 2.0 * m * proj_[i][k];
    }
    return std::max(rss, 0.0);
  }

 private:
  KernelSpec kernel_;
  std::vector<Mat> nw_;
  std::vector<double> weight_sum_;
  std::vector<double> self_ratio_;
  std::vector<double> rss_nw_;
  std::vector<double> y_sq_;
  std::vector<Svd> svd_;
  std::vector<std::vector<double>> proj_;  // u_k^T (Y_i - NW_i) v_k
};

}  // namespace detail

struct BicEntry {
  double bandwidth = 0.0;
  double lambda = 0.0;
  double rss = 0.0;       // sum_i ||Y_i - Yhat_i||_F^2
  double rss_term = 0.0;  // npq log(rss / npq)
  double df = 0.0;
  double bic = 0.0;
  std::optional<double> mean_rank;      // nuclear only
  std::vector<double> per_sample_rss;   // ||Y_i - Yhat_i||_F^2
  std::vector<std::size_t> per_sample_rank;  // nuclear only
};

struct BicReport {
  Penalty penalty = Penalty::nuclear;
  KernelFamily family = KernelFamily::gaussian;
  std::vector<BicEntry> entries;
  std::size_t selected = 0;
  std::vector<ExhaustedGridError::Cell> failures;

  const BicEntry& best() const { return entries.at(selected); }
};

namespace detail {

inline double npq(const Dataset& data) {
  return static_cast<double>(data.size()) * static_cast<double>(data.p()) *
         static_cast<double>(data.q());
}

inline void finish_entry(const Dataset& data, BicEntry& e) {
  const double size = npq(data);
  if (!(size > 1.0))
    throw ArgumentError("bic: need n * p * q > 1");
  double rss = 0.0;
  for (double v : e.per_sample_rss) rss += v;
  e.rss = rss;
  if (!(rss > 0.0))
    throw DegenerateFitError("bic: residual sum of squares is zero at h = " +
                             std::to_string(e.bandwidth) +
                             ", lambda = " + std::to_string(e.lambda));
  e.df = std::clamp(e.df, 0.0, size);
  e.rss_term = size * std::log(rss / size);
  e.bic = e.rss_term + std::log(size) * e.df;
}

/// Evaluates one cell from a cache. `lambda` is ignored for penalty none.
inline BicEntry evaluate_cell(const Dataset& data, const InSampleCache& cache,
                              Penalty penalty, double lambda, DfOptions opts) {
  const std::size_t n = data.size();
  const std::size_t p = data.p();
  const std::size_t q = data.q();
  BicEntry e;
  e.bandwidth = cache.kernel().bandwidth();
  e.lambda = penalty == Penalty::none ? 0.0 : lambda;
  e.per_sample_rss.resize(n);
  double df = 0.0;
  switch (penalty) {
    case Penalty::none:
      for (std::size_t i = 0; i < n; ++i) {
        e.per_sample_rss[i] = cache.rss_nw(i);
        df += cache.self_ratio(i) * static_cast<double>(p * q);
      }
      break;
    case Penalty::nuclear: {
      e.per_sample_rank.resize(n);
      double rank_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double tau = cache.tau(i, lambda);
        const Svd& d = cache.spectrum(i);
        e.per_sample_rss[i] = cache.rss_nuclear(i, tau);
        df += cache.self_ratio(i) * svt_divergence(d.sigma, tau, p, q, opts, i);
        const auto shrunk = shrink_singular_values(d.sigma, tau);
        e.per_sample_rank[i] = numeric_rank(shrunk, kRankTolerance);
        rank_sum += static_cast<double>(e.per_sample_rank[i]);
      }
      e.mean_rank = rank_sum / static_cast<double>(n);
      break;
    }
    case Penalty::lasso:
      for (std::size_t i = 0; i < n; ++i) {
        const double tau = cache.tau(i, lambda);
        const auto nw = cache.nw(i).data();
        const auto y = data[i].y.data();
        double rss = 0.0;
        std::size_t nonzero = 0;
        for (std::size_t k = 0; k < nw.size(); ++k) {
          const double mag = std::abs(nw[k]) - tau;
          const double fitted = mag > 0.0 ? std::copysign(mag, nw[k]) : 0.0;
          nonzero += fitted != 0.0;
          const double r = y[k] - fitted;
          rss += r * r;
        }
        e.per_sample_rss[i] = rss;
        df += cache.self_ratio(i) * static_cast<double>(nonzero);
      }
      break;
  }
  e.df = df;
  finish_entry(data, e);
  return e;
}

}  // namespace detail

/// Degrees of freedom of the nuclear-penalised smoother:
/// K_H(0) sum_i df_i / sum_j K_H(X_i - X_j), df_i the SVT divergence at the
/// in-sample fit with tau_i = n lambda / sum_j K_H(X_i - X_j).
inline double df_nuclear(const Dataset& data, const KernelSpec& kernel,
                         double lambda, DfOptions opts = {}) {
  detail::check_lambda(lambda);
  const detail::InSampleCache cache(data, kernel, true);
  double df = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    df += cache.self_ratio(i) * svt_divergence(cache.spectrum(i).sigma,
                                               cache.tau(i, lambda), data.p(),
                                               data.q(), opts, i);
  return std::clamp(df, 0.0, detail::npq(data));
}

/// Degrees of freedom of the lasso smoother:
/// sum_i K_H(0) / sum_j K_H(X_i - X_j) * (number of nonzero fitted entries).
inline double df_lasso(const Dataset& data, const KernelSpec& kernel,
                       double lambda) {
  detail::check_lambda(lambda);
  const detail::InSampleCache cache(data, kernel, false);
  double df = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double tau = cache.tau(i, lambda);
    std::size_t nonzero = 0;
    for (double v : cache.nw(i).data()) nonzero += std::abs(v) > tau;
    df += cache.self_ratio(i) * static_cast<double>(nonzero);
  }
  return std::clamp(df, 0.0, detail::npq(data));
}

/// BIC of one (h, lambda) cell:
///   npq log(rss / npq) + log(npq) df.
inline BicEntry bic(const Dataset& data, const KernelSpec& kernel, double lambda,
                    Penalty penalty, DfOptions opts = {}) {
  detail::check_lambda(lambda);
  const detail::InSampleCache cache(data, kernel, penalty == Penalty::nuclear);
  return detail::evaluate_cell(data, cache, penalty, lambda, opts);
}

/// True when a is preferred over b: smaller bic, then smaller df, smaller
/// lambda, smaller bandwidth.
inline bool bic_preferred(const BicEntry& a, const BicEntry& b) {
  return std::tie(a.bic, a.df, a.lambda, a.bandwidth) <
         std::tie(b.bic, b.df, b.lambda, b.bandwidth);
}

/// Tunes several penalties over one grid; the in-sample fits for each
/// bandwidth are computed once and shared. Reports follow `penalties`.
inline std::vector<BicReport> tune_all(const Dataset& data, const TuneGrid& grid,
                                       std::span<const Penalty> penalties,
                                       KernelFamily family = KernelFamily::gaussian,
                                       DfOptions opts = {}) {
  const auto& hs = grid.bandwidths();
  const std::vector<double> none_lambdas{0.0};
  const auto lambdas_for = [&](Penalty pen) -> const std::vector<double>& {
    return pen == Penalty::none ? none_lambdas : grid.lambdas();
  };
  const bool spectral =
      std::find(penalties.begin(), penalties.end(), Penalty::nuclear) != penalties.end();

  struct Slot {
    std::optional<BicEntry> entry;
    std::string error;
  };
  // slots[k][a * |lambdas| + b] for penalty k.
  std::vector<std::vector<Slot>> slots;
  for (Penalty pen : penalties) slots.emplace_back(hs.size() * lambdas_for(pen).size());

  const auto errors = parallel_for(hs.size(), [&](std::size_t a) {
    std::optional<detail::InSampleCache> cache;
    std::string cache_error;
    try {
      cache.emplace(data, KernelSpec(family, hs[a], data.s()), spectral);
    } catch (const std::exception& ex) {
      cache_error = ex.what();
    }
    for (std::size_t k = 0; k < penalties.size(); ++k) {
      const auto& ls = lambdas_for(penalties[k]);
      for (std::size_t b = 0; b < ls.size(); ++b) {
        Slot& slot = slots[k][a * ls.size() + b];
        if (!cache) {
          slot.error = cache_error;
          continue;
        }
        try {
          slot.entry = detail::evaluate_cell(data, *cache, penalties[k], ls[b], opts);
        } catch (const std::exception& ex) {
          slot.error = ex.what();
        }
      }
    }
  });

  std::vector<BicReport> reports;
  for (std::size_t k = 0; k < penalties.size(); ++k) {
    const auto& ls = lambdas_for(penalties[k]);
    for (std::size_t a = 0; a < errors.size(); ++a)
      if (errors[a])
        for (std::size_t b = 0; b < ls.size(); ++b)
          slots[k][a * ls.size() + b].error = describe(errors[a]);

    BicReport report;
    report.penalty = penalties[k];
    report.family = family;
    for (std::size_t a = 0; a < hs.size(); ++a)
      for (std::size_t b = 0; b < ls.size(); ++b) {
        Slot& slot = slots[k][a * ls.size() + b];
        if (slot.entry)
          report.entries.push_back(std::move(*slot.entry));
        else
          report.failures.push_back({hs[a], ls[b], slot.error});
      }
    if (report.entries.empty()) throw ExhaustedGridError(report.failures);
    for (std::size_t i = 1; i < report.entries.size(); ++i)
      if (bic_preferred(report.entries[i], report.entries[report.selected]))
        report.selected = i;
    reports.push_back(std::move(report));
  }
  return reports;
}

/// Grid search over every (h, lambda). For penalty none the lambda axis is
/// irrelevant and each bandwidth is evaluated once with lambda = 0.
inline BicReport tune(const Dataset& data, const TuneGrid& grid, Penalty penalty,
                      KernelFamily family = KernelFamily::gaussian,
                      DfOptions opts = {}) {
  const Penalty one[] = {penalty};
  return std::move(tune_all(data, grid, one, family, opts).front());
}

/// Fit configuration of the selected cell.
inline FitConfig selected_config(const BicReport& report, std::size_t s) {
  const BicEntry& e = report.best();
  return FitConfig{KernelSpec(report.family, e.bandwidth, s), e.lambda,
                   report.penalty, LambdaScale::penalty};
}

/// Default grid: bandwidths log-spaced over
/// [c_lo n^(-1/(4+s)), c_hi n^(-1/(4+s))], lambdas log-spaced over three
/// decades up to the value that zeros the fit at every sample when the
/// middle bandwidth is used.
struct DefaultGridOptions {
  double bandwidth_lo = 0.5;
  double bandwidth_hi = 4.0;
  std::size_t bandwidth_count = 8;
  std::size_t lambda_count = 8;
  double lambda_decades = 3.0;
};

inline TuneGrid default_grid(const Dataset& data, Penalty penalty,
                             KernelFamily family = KernelFamily::gaussian,
                             DefaultGridOptions opt = {}) {
  const double n = static_cast<double>(data.size());
  const double rate = std::pow(n, -1.0 / (4.0 + static_cast<double>(data.s())));
  auto hs = log_space(opt.bandwidth_lo * rate, opt.bandwidth_hi * rate,
                      opt.bandwidth_count);
  const double h_mid = hs[hs.size() / 2];
  const detail::InSampleCache cache(data, KernelSpec(family, h_mid, data.s()),
                                    penalty == Penalty::nuclear);
  double zero_at = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double top = 0.0;
    if (penalty == Penalty::nuclear)
      top = cache.spectrum(i).sigma.front();
    else
      for (double v : cache.nw(i).data()) top = std::max(top, std::abs(v));
    zero_at = std::max(zero_at, top * cache.weight_sum(i) / n);
  }
  if (!(zero_at > 0.0)) zero_at = 1.0;
  auto ls = log_space(zero_at * std::pow(10.0, -opt.lambda_decades), zero_at,
                      opt.lambda_count);
  return TuneGrid(std::move(hs), std::move(ls));
}

enum class CvMode { fixed, retune };

struct CvResult {
  std::vector<double> per_sample_errors;  // ||Y_i - Yhat_{-i}(X_i)||_F^2
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (divisor n - 1)
  std::optional<FitConfig> config;  // the fixed configuration, if any
};

namespace detail {
inline void summarise(CvResult& r) {
  const auto& e = r.per_sample_errors;
  const double n = static_cast<double>(e.size());
  double sum = 0.0;
  for (double v : e) sum += v;
  r.mean = sum / n;
  double ss = 0.0;
  for (double v : e) ss += (v - r.mean) * (v - r.mean);
  r.sd = e.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

inline CvResult run_folds(const Dataset& data,
                          const std::function<FitConfig(const Dataset&)>& config_for) {
  if (data.size() < 2) throw ArgumentError("loocv: need at least two samples");
  CvResult out;
  out.per_sample_errors.resize(data.size());
  const auto errors = parallel_for(data.size(), [&](std::size_t i) {
    const Dataset rest = data.without(i);
    const FitConfig cfg = config_for(rest);
    out.per_sample_errors[i] =
        frobenius_dist_sq(data[i].y, predict(rest, cfg, data[i].x));
  });
  std::vector<IndexedFailure> failures;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) failures.push_back({i, describe(errors[i])});
  if (!failures.empty()) throw PathError(std::move(failures));
  summarise(out);
  return out;
}
}  // namespace detail

/// Leave-one-out prediction error with a fixed configuration.
inline CvResult loocv(const Dataset& data, const FitConfig& cfg) {
  CvResult r = detail::run_folds(data, [&](const Dataset&) { return cfg; });
  r.config = cfg;
  return r;
}

/// Leave-one-out prediction error. `fixed` tunes once on the full data;
/// `retune` tunes again on every fold.
inline CvResult loocv(const Dataset& data, const TuneGrid& grid, Penalty penalty,
                      CvMode mode = CvMode::fixed,
                      KernelFamily family = KernelFamily::gaussian) {
  if (mode == CvMode::fixed)
    return loocv(data, selected_config(tune(data, grid, penalty, family), data.s()));
  return detail::run_folds(data, [&](const Dataset& rest) {
    return selected_config(tune(rest, grid, penalty, family), rest.s());
  });
}

}  // namespace matreg
