#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matreg/dataset.hpp"
#include "matreg/error.hpp"
#include "matreg/estimators.hpp"
#include "matreg/kernels.hpp"
#include "matreg/mat.hpp"
#include "matreg/parallel.hpp"
#include "matreg/prox.hpp"
#include "matreg/random.hpp"
#include "matreg/tuning.hpp"

namespace matreg {

enum class Setting { I, II, III, IV };
enum class ShapeKind { cross, square, tshape };
enum class ErrorModel { iid, separable_ar };

inline std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::I: return "I";
    case Setting::II: return "II";
    case Setting::III: return "III";
    case Setting::IV: return "IV";
  }
  return "?";
}

inline Setting parse_setting(std::string_view s) {
  if (s == "I") return Setting::I;
  if (s == "II") return Setting::II;
  if (s == "III") return Setting::III;
  if (s == "IV") return Setting::IV;
  throw ArgumentError("unknown setting '" + std::string(s) + "'");
}

inline std::string_view to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::cross: return "cross";
    case ShapeKind::square: return "square";
    case ShapeKind::tshape: return "tshape";
  }
  return "?";
}

inline ShapeKind parse_shape(std::string_view s) {
  if (s == "cross") return ShapeKind::cross;
  if (s == "square") return ShapeKind::square;
  if (s == "tshape") return ShapeKind::tshape;
  throw ArgumentError("unknown shape '" + std::string(s) + "'");
}

inline std::string_view to_string(ErrorModel m) {
  return m == ErrorModel::iid ? "iid" : "separable_ar";
}

inline std::size_t covariate_dim(Setting s) {
  return (s == Setting::III || s == Setting::IV) ? 2 : 1;
}

inline ErrorModel error_model_for(Setting s) {
  return (s == Setting::II || s == Setting::IV) ? ErrorModel::separable_ar
                                                : ErrorModel::iid;
}

/// Inclusive 1-indexed pixel rectangle.
struct Rect {
  std::size_t row_lo, row_hi, col_lo, col_hi;
};

/// Planted image B: fill_value on the union of the rectangles, 0 elsewhere.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::square;
  std::size_t size = 64;
  double fill_value = 5.0;
  std::vector<Rect> geometry;

  Mat mask() const {
    Mat b(size, size);
    for (const Rect& r : geometry)
      for (std::size_t i = r.row_lo; i <= r.row_hi; ++i)
        for (std::size_t j = r.col_lo; j <= r.col_hi; ++j)
          b(i - 1, j - 1) = fill_value;
    return b;
  }

  std::size_t true_rank() const { return kind == ShapeKind::square ? 2 : 4; }
};

inline Mat make_signal(const ShapeSpec& shape, Setting setting,
                       std::span<const double> x);

/// Shape on a size x size image. The 64x64 layouts are
///   square: rows 21-44 x cols 21-44
///   cross:  rows 29-36 x cols 9-56  and rows 9-56 x cols 29-36
///   tshape: rows 9-16  x cols 9-56  and rows 9-56 x cols 29-36
/// and other sizes scale them. The signal rank at a generic covariate is
/// checked against true_rank() for both signal families.
inline ShapeSpec make_shape(ShapeKind kind, std::size_t size = 64,
                            double fill_value = 5.0) {
  if (size < 8) throw ArgumentError("make_shape: size must be at least 8");
  const auto lo = [&](std::size_t v) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(v - 1) *
                                                static_cast<double>(size) / 64.0)) + 1;
  };
  const auto hi = [&](std::size_t v) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(v) *
                                                static_cast<double>(size) / 64.0));
  };
  const auto rect = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    return Rect{lo(r0), hi(r1), lo(c0), hi(c1)};
  };
  ShapeSpec s;
  s.kind = kind;
  s.size = size;
  s.fill_value = fill_value;
  switch (kind) {
    case ShapeKind::square: s.geometry = {rect(21, 44, 21, 44)}; break;
    case ShapeKind::cross:
      s.geometry = {rect(29, 36, 9, 56), rect(9, 56, 29, 36)};
      break;
    case ShapeKind::tshape:
      s.geometry = {rect(9, 16, 9, 56), rect(9, 56, 29, 36)};
      break;
  }
  if (fill_value != 0.0) {
    const double x1[] = {0.13};
    const double x2[] = {0.13, 0.37};
    const std::size_t r1 = numeric_rank(make_signal(s, Setting::I, x1));
    const std::size_t r2 = numeric_rank(make_signal(s, Setting::III, x2));
    if (r1 != s.true_rank() || r2 != s.true_rank())
      throw ArgumentError("make_shape: geometry for " + std::string(to_string(kind)) +
                          " gives signal rank " + std::to_string(r1) + "/" +
                          std::to_string(r2) + ", expected " +
                          std::to_string(s.true_rank()));
  }
  return s;
}

/// g(x)_{jk} = (sin(10 pi x) + cos(10 pi x) + 0.1 (j + k)) B_{jk} for
/// settings I/II and (sin(2 pi |x|) + cos(2 pi |x|) + 0.5 (j + k)) B_{jk}
/// for settings III/IV, j and k 1-indexed.
inline Mat make_signal(const ShapeSpec& shape, Setting setting,
                       std::span<const double> x) {
  if (x.size() != covariate_dim(setting))
    throw ArgumentError("make_signal: covariate dimension does not match setting");
  double base = 0.0;
  double slope = 0.0;
  if (covariate_dim(setting) == 1) {
    const double a = 10.0 * std::numbers::pi * x[0];
    base = std::sin(a) + std::cos(a);
    slope = 0.1;
  } else {
    const double a = 2.0 * std::numbers::pi * std::hypot(x[0], x[1]);
    base = std::sin(a) + std::cos(a);
    slope = 0.5;
  }
  Mat g = shape.mask();
  for (std::size_t j = 0; j < g.rows(); ++j)
    for (std::size_t k = 0; k < g.cols(); ++k) {
      double& v = g(j, k);
      if (v != 0.0) v *= base + slope * static_cast<double>(j + k + 2);
    }
  return g;
}

/// Correlation matrix with entries rho^|i - j|.
inline Mat ar_correlation(std::size_t n, double rho) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m(i, j) = std::pow(rho, static_cast<double>(i > j ? i - j : j - i));
  return m;
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
inline Mat cholesky(const Mat& a) {
  if (a.rows() != a.cols()) throw ArgumentError("cholesky: matrix is not square");
  const std::size_t n = a.rows();
  Mat l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw ArgumentError("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Noise matrices for n subjects. iid: independent N(0, 1) entries.
/// separable_ar: cov(vec) = AR_n(rho) (x) AR_p(rho) (x) AR_q(rho), drawn by
/// applying the Cholesky factors of the three AR correlation matrices to an
/// iid tensor, along columns, then rows, then subjects.
inline std::vector<Mat> sample_errors(ErrorModel model, double rho, std::size_t n,
                                      std::size_t p, std::size_t q,
                                      SplitMix64& rng) {
  std::vector<Mat> z;
  z.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Mat e(p, q);
    for (double& v : e.data()) v = rng.normal();
    z.push_back(std::move(e));
  }
  if (model == ErrorModel::iid || n == 0) return z;
  if (!(std::abs(rho) < 1.0))
    throw ArgumentError("sample_errors: AR coefficient must satisfy |rho| < 1");

  const Mat lq = cholesky(ar_correlation(q, rho));
  const Mat lp = cholesky(ar_correlation(p, rho));
  const Mat ln = cholesky(ar_correlation(n, rho));
  std::vector<double> buf(std::max({n, p, q}));
  for (Mat& e : z) {
    for (std::size_t a = 0; a < p; ++a) {  // each row: z_row <- L_q z_row
      for (std::size_t k = 0; k < q; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l <= k; ++l) s += lq(k, l) * e(a, l);
        buf[k] = s;
      }
      for (std::size_t k = 0; k < q; ++k) e(a, k) = buf[k];
    }
    for (std::size_t b = 0; b < q; ++b) {  // each column: z_col <- L_p z_col
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l <= j; ++l) s += lp(j, l) * e(l, b);
        buf[j] = s;
      }
      for (std::size_t j = 0; j < p; ++j) e(j, b) = buf[j];
    }
  }
  // Subjects: E_i <- sum_{l <= i} L_n(i, l) E_l, last subject first so each
  // update only reads untouched inputs.
  for (std::size_t i = n; i-- > 0;) {
    Mat acc(p, q);
    for (std::size_t l = 0; l <= i; ++l) {
      const double c = ln(i, l);
      if (c != 0.0) acc.add_scaled(c, z[l]);
    }
    z[i] = std::move(acc);
  }
  return z;
}

struct SimSpec {
  Setting setting = Setting::I;
  ShapeSpec shape = make_shape(ShapeKind::square);
  std::size_t n_train = 200;
  std::size_t n_test = 500;
  std::uint64_t seed = 0;
  ErrorModel error_model = ErrorModel::iid;
  double ar_rho = 0.5;
  std::size_t replicate_count = 1;
  /// Multiplies every noise draw; 0 gives noise-free responses.
  double noise_scale = 1.0;

  std::size_t dim() const { return covariate_dim(setting); }

  void validate() const {
    if (error_model != error_model_for(setting))
      throw ArgumentError("SimSpec: settings II and IV use separable AR noise, "
                          "settings I and III use iid noise");
    if (n_train == 0 || n_test == 0)
      throw ArgumentError("SimSpec: sample sizes must be positive");
    if (replicate_count == 0)
      throw ArgumentError("SimSpec: replicate_count must be positive");
    if (!(std::abs(ar_rho) < 1.0))
      throw ArgumentError("SimSpec: |ar_rho| must be below 1");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
      throw ArgumentError("SimSpec: noise_scale must be finite and >= 0");
  }
};

inline SimSpec make_sim_spec(Setting setting, ShapeKind shape, std::size_t n_train,
                             std::size_t replicates, std::uint64_t seed,
                             std::size_t image_size = 64) {
  SimSpec s;
  s.setting = setting;
  s.shape = make_shape(shape, image_size);
  s.n_train = n_train;
  s.seed = seed;
  s.error_model = error_model_for(setting);
  s.replicate_count = replicates;
  return s;
}

inline std::vector<Mat> sample_errors(const SimSpec& spec, std::size_t n,
                                      SplitMix64& rng) {
  return sample_errors(spec.error_model, spec.ar_rho, n, spec.shape.size,
                       spec.shape.size, rng);
}

/// Rows x cols of the two-dimensional training grid: 20 x 25 for n = 500,
/// otherwise the smallest r x (r + 1) grid holding n points (filled row by
/// row and truncated to n).
inline std::pair<std::size_t, std::size_t> covariate_grid_shape(std::size_t n) {
  if (n == 500) return {20, 25};
  std::size_t r = 1;
  while (r * (r + 1) < n) ++r;
  return {r, r + 1};
}

inline std::vector<std::vector<double>> training_covariates(std::size_t n,
                                                            std::size_t dim) {
  std::vector<std::vector<double>> xs;
  xs.reserve(n);
  const auto at = [](std::size_t i, std::size_t count) {
    return count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
  };
  if (dim == 1) {
    for (std::size_t i = 0; i < n; ++i) xs.push_back({at(i, n)});
    return xs;
  }
  const auto [rows, cols] = covariate_grid_shape(n);
  for (std::size_t j = 0; j < rows && xs.size() < n; ++j)
    for (std::size_t k = 0; k < cols && xs.size() < n; ++k)
      xs.push_back({at(j, rows), at(k, cols)});
  return xs;
}

/// Smallest distance between neighbouring training covariates along an axis.
inline double design_spacing(std::size_t n, std::size_t dim) {
  if (n < 2) return 1.0;
  if (dim == 1) return 1.0 / static_cast<double>(n - 1);
  const auto [rows, cols] = covariate_grid_shape(n);
  return 1.0 / static_cast<double>(std::max(rows, cols) - 1);
}

/// Grid used for simulation studies when none is given: 16 bandwidths
/// log-spaced from half the design spacing to a quarter of the unit domain,
/// and 25 lambdas log-spaced over [0.05, 500] (unit-variance noise scale).
inline TuneGrid simulation_grid(const SimSpec& spec) {
  const double lo = 0.5 * design_spacing(spec.n_train, spec.dim());
  const double hi = std::max(0.25, 2.0 * lo);
  return TuneGrid(log_space(lo, hi, 16), log_space(0.05, 500.0, 25));
}

struct SimData {
  Dataset train;
  Dataset test;
  std::uint64_t seed;  // replicate seed
};

inline std::uint64_t replicate_seed(std::uint64_t base, std::size_t replicate) {
  return base ^ static_cast<std::uint64_t>(replicate);
}

namespace detail {
enum Stream : std::uint64_t { train_noise = 1, test_covariates = 2, test_noise = 3 };

inline Dataset assemble(const SimSpec& spec, std::vector<std::vector<double>> xs,
                        SplitMix64& noise_rng) {
  std::vector<Mat> noise;
  if (spec.noise_scale != 0.0) noise = sample_errors(spec, xs.size(), noise_rng);
  std::vector<Sample> samples;
  samples.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Mat y = make_signal(spec.shape, spec.setting, xs[i]);
    if (!noise.empty()) y.add_scaled(spec.noise_scale, noise[i]);
    samples.push_back({std::move(xs[i]), std::move(y)});
  }
  return Dataset(std::move(samples));
}
}  // namespace detail

/// Training set on the equispaced design and a test set at uniform random
/// covariates, both Y = g(x) + E. Deterministic in (spec.seed, replicate).
inline SimData generate(const SimSpec& spec, std::size_t replicate = 0) {
  spec.validate();
  const std::uint64_t seed = replicate_seed(spec.seed, replicate);
  const std::size_t dim = spec.dim();

  SplitMix64 train_rng(seed, detail::train_noise);
  Dataset train = detail::assemble(spec, training_covariates(spec.n_train, dim),
                                   train_rng);

  SplitMix64 cov_rng(seed, detail::test_covariates);
  std::vector<std::vector<double>> test_x(spec.n_test, std::vector<double>(dim));
  for (auto& x : test_x)
    for (double& c : x) c = cov_rng.uniform();
  SplitMix64 test_rng(seed, detail::test_noise);
  Dataset test = detail::assemble(spec, std::move(test_x), test_rng);
  return SimData{std::move(train), std::move(test), seed};
}

/// (1 / n_test) sum_i ||Yhat(x_i) - Y_i||_F^2.
inline double integrated_error(std::span<const Mat> fits, const Dataset& test) {
  if (fits.size() != test.size())
    throw ArgumentError("integrated_error: " + std::to_string(fits.size()) +
                        " fits for " + std::to_string(test.size()) + " test samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i)
    sum += frobenius_dist_sq(fits[i], test[i].y);
  return sum / static_cast<double>(fits.size());
}

inline double integrated_error(std::span<const FitResult> fits, const Dataset& test) {
  std::vector<Mat> mats;
  mats.reserve(fits.size());
  for (const FitResult& f : fits) mats.push_back(f.estimate);
  return integrated_error(std::span<const Mat>(mats), test);
}

struct ReplicateResult {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double err_ours = 0.0;
  double err_nw = 0.0;
  double err_lasso = 0.0;
  double avg_selected_rank = 0.0;
  FitConfig ours{KernelSpec(KernelFamily::gaussian, 1.0, 1)};
  FitConfig nw{KernelSpec(KernelFamily::gaussian, 1.0, 1)};
  FitConfig lasso{KernelSpec(KernelFamily::gaussian, 1.0, 1)};
};

struct ColumnSummary {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(count)
};

struct SimResult {
  std::vector<ReplicateResult> per_replicate;
  ColumnSummary ours, nw, lasso, rank;
  std::vector<IndexedFailure> failures;
};

inline ColumnSummary summarise_column(std::span<const double> v) {
  ColumnSummary c;
  if (v.empty()) return c;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  c.mean = sum / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - c.mean) * (x - c.mean);
    c.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return c;
}

/// One Monte Carlo replicate: BIC-tune all three estimators on the training
/// set, then score them on the test set.
inline ReplicateResult run_replicate(const SimSpec& spec, const TuneGrid& grid,
                                     std::size_t replicate) {
  const SimData data = generate(spec, replicate);
  const std::size_t s = spec.dim();
  const Penalty penalties[] = {Penalty::nuclear, Penalty::lasso, Penalty::none};
  const std::vector<BicReport> reports = tune_all(data.train, grid, penalties);
  const BicReport& nuclear = reports[0];
  const BicReport& lasso = reports[1];
  const BicReport& plain = reports[2];

  ReplicateResult r;
  r.replicate = replicate;
  r.seed = data.seed;
  r.ours = selected_config(nuclear, s);
  r.lasso = selected_config(lasso, s);
  r.nw = selected_config(plain, s);
  r.avg_selected_rank = nuclear.best().mean_rank.value_or(0.0);

  const auto score = [&](const FitConfig& cfg) {
    const std::vector<Mat> fits = predict_many(data.train, cfg, data.test.covariates());
    return integrated_error(std::span<const Mat>(fits), data.test);
  };
  r.err_ours = score(r.ours);
  r.err_nw = score(r.nw);
  r.err_lasso = score(r.lasso);
  return r;
}

/// Runs every replicate (in parallel when threads allow) and aggregates.
/// Failed replicates are reported; the study fails only if all of them do.
inline SimResult run_study(const SimSpec& spec, const TuneGrid& grid) {
  spec.validate();
  std::vector<std::optional<ReplicateResult>> slots(spec.replicate_count);
  const auto errors = parallel_for(spec.replicate_count, [&](std::size_t r) {
    slots[r] = run_replicate(spec, grid, r);
  });
  SimResult out;
  for (std::size_t r = 0; r < slots.size(); ++r) {
    if (errors[r])
      out.failures.push_back({r, describe(errors[r])});
    else
      out.per_replicate.push_back(std::move(*slots[r]));
  }
  if (out.per_replicate.empty())
    throw Error("run_study: every replicate failed; first: " +
                out.failures.front().message);
  std::vector<double> a, b, c, d;
  for (const auto& r : out.per_replicate) {
    a.push_back(r.err_ours);
    b.push_back(r.err_nw);
    c.push_back(r.err_lasso);
    d.push_back(r.avg_selected_rank);
  }
  out.ours = summarise_column(a);
  out.nw = summarise_column(b);
  out.lasso = summarise_column(c);
  out.rank = summarise_column(d);
  return out;
}

}  // namespace matreg
