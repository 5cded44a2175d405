#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "matreg/matreg.hpp"
#include "oracles.hpp"

using namespace matreg;

namespace {

// Central-difference divergence of the SVT map alone.
double fd_svt_divergence(const Mat& y, double tau, double step = 1e-5) {
  double div = 0.0;
  Mat w = y;
  for (std::size_t e = 0; e < w.size(); ++e) {
    const double orig = w.data()[e];
    w.data()[e] = orig + step;
    const double up = soft_threshold_nuclear(w, tau).data()[e];
    w.data()[e] = orig - step;
    const double down = soft_threshold_nuclear(w, tau).data()[e];
    w.data()[e] = orig;
    div += (up - down) / (2.0 * step);
  }
  return div;
}

Mat in_sample(const Dataset& d, const FitConfig& cfg, std::size_t i) {
  return fit(d, cfg, d[i].x).estimate;
}

Dataset scalar_pair(double y1, double y2) {
  return Dataset({Sample{{0.0}, Mat(1, 1, {y1})}, Sample{{1.0}, Mat(1, 1, {y2})}});
}

}  // namespace

TEST(TuneGridTest, Validation) {
  EXPECT_THROW(TuneGrid({}, {1.0}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.1}, {}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.2, 0.1}, {1.0}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.1, 0.1}, {1.0}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.0, 0.1}, {1.0}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.1}, {-1.0, 1.0}), ArgumentError);
  EXPECT_THROW(TuneGrid({0.1, INFINITY}, {1.0}), ArgumentError);
  EXPECT_NO_THROW(TuneGrid({0.1}, {0.0, 1.0}));
}

TEST(LogSpaceTest, EndpointsAndRatio) {
  const auto v = log_space(0.05, 500.0, 25);
  EXPECT_EQ(v.front(), 0.05);
  EXPECT_EQ(v.back(), 500.0);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_NEAR(v[i] / v[i - 1], std::pow(1e4, 1.0 / 24), 1e-12);
}

TEST(SvtDivergenceTest, SingleSampleMatchesFiniteDifference) {
  const double diag[] = {5.0, 3.0};
  const Mat y = Mat::diagonal(diag);
  for (double tau : {0.0, 1.0, 2.5, 4.0, 6.0}) {
    const auto sigma = svd(y).sigma;
    EXPECT_NEAR(svt_divergence(sigma, tau, 2, 2), fd_svt_divergence(y, tau), 1e-6) << tau;
  }
  // n = 1: weight ratio is one, so df equals the divergence itself.
  const Dataset d({Sample{{0.5}, y}});
  const KernelSpec k(KernelFamily::gaussian, 0.3, 1);
  EXPECT_NEAR(df_nuclear(d, k, 0.0), fd_svt_divergence(y, 0.0), 1e-6);
  EXPECT_EQ(df_nuclear(d, k, 0.0), 4.0);
}

TEST(SvtDivergenceTest, RandomRectangularMatchesFiniteDifference) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    const Mat y = oracle::random_mat(4 + t % 3, 3 + t % 4, rng, 2.0);
    const auto sigma = svd(y).sigma;
    const double tau = 0.5 * (sigma[0] + sigma.back()) * (0.2 + 0.05 * (t % 10));
    bool near_kink = false;
    for (double s : sigma) near_kink |= std::abs(s - tau) < 1e-3;
    if (near_kink) continue;
    const double want = fd_svt_divergence(y, tau);
    EXPECT_NEAR(svt_divergence(sigma, tau, y.rows(), y.cols()), want, 1e-6 * std::max(1.0, want));
  }
}

TEST(SvtDivergenceTest, TiedValuesUseContinuousLimit) {
  const double diag[] = {3.0, 3.0, 1.0};
  const Mat y = Mat::diagonal(diag);
  const double sigma[] = {3.0, 3.0, 1.0};
  const double tau = 0.5;
  EXPECT_NEAR(svt_divergence(sigma, tau, 3, 3), fd_svt_divergence(y, tau), 1e-6);
  EXPECT_THROW(svt_divergence(sigma, tau, 3, 3, DfOptions{true}), DegenerateSpectrumError);
  // Nearly tied values converge to the same limit.
  const double near[] = {3.0 + 1e-9, 3.0, 1.0};
  EXPECT_NEAR(svt_divergence(near, tau, 3, 3), svt_divergence(sigma, tau, 3, 3), 1e-8);
}

TEST(DfNuclearTest, MicroInstanceMatchesSmootherDivergence) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = oracle::micro_instance(seed);
    const FitConfig cfg{KernelSpec(KernelFamily::gaussian, 0.1, 1), 0.02, Penalty::nuclear};
    const double want = oracle::fd_divergence(
        d, [&](const Dataset& w, std::size_t i) { return in_sample(w, cfg, i); }, 1e-5);
    const double got = df_nuclear(d, cfg.kernel, cfg.lambda);
    EXPECT_NEAR(got, want, 1e-3 * want) << seed;
    EXPECT_EQ(bic(d, cfg.kernel, cfg.lambda, Penalty::nuclear).df, got);
  }
}

TEST(DfNuclearTest, RangeAndMonotonicity) {
  const Dataset d = oracle::micro_instance(4);
  const KernelSpec k(KernelFamily::gaussian, 0.08, 1);
  double prev = INFINITY;
  for (double lambda : {0.0, 0.001, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 100.0}) {
    const double df = df_nuclear(d, k, lambda);
    EXPECT_GE(df, 0.0);
    EXPECT_LE(df, 20.0 * 64.0);
    EXPECT_LE(df, prev + 1e-12);
    prev = df;
  }
  EXPECT_EQ(df_nuclear(d, k, 100.0), 0.0);
}

TEST(DfLassoTest, ZeroLambdaCountsNonzeros) {
  const Dataset d = oracle::micro_instance(5);
  const KernelSpec k(KernelFamily::gaussian, 0.1, 1);
  double want = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double total = 0.0;
    const Mat nw = oracle::naive_nw(d.samples(), d[i].x, 0.1, &total);
    std::size_t nonzero = 0;
    for (double v : nw.data()) nonzero += v != 0.0;
    want += (1.0 / (std::sqrt(2.0 * std::numbers::pi) * 0.1)) / total * static_cast<double>(nonzero);
  }
  EXPECT_NEAR(df_lasso(d, k, 0.0), want, 1e-10 * want);
  EXPECT_EQ(df_lasso(d, k, 1e6), 0.0);
}

TEST(DfLassoTest, MicroInstanceMatchesSmootherDivergence) {
  const Dataset d = oracle::micro_instance(6);
  const FitConfig cfg{KernelSpec(KernelFamily::gaussian, 0.1, 1), 0.05, Penalty::lasso};
  // Keep away from kinks: every in-sample |NW| must be clear of its tau.
  for (std::size_t i = 0; i < d.size(); ++i) {
    const FitResult f = fit(d, cfg, d[i].x);
    const Mat nw = fit_nw(d, cfg.kernel, d[i].x).estimate;
    for (double v : nw.data()) ASSERT_GT(std::abs(std::abs(v) - f.effective_tau), 1e-4);
  }
  const double want = oracle::fd_divergence(
      d, [&](const Dataset& w, std::size_t i) { return in_sample(w, cfg, i); }, 1e-6);
  EXPECT_NEAR(df_lasso(d, cfg.kernel, cfg.lambda), want, 1e-3 * want);
}

TEST(BicTest, ScalarClosedForm) {
  const Dataset d = scalar_pair(1.0, 4.0);
  const double w0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double w1 = w0 * std::exp(-0.5);
  const double f1 = (w0 * 1.0 + w1 * 4.0) / (w0 + w1);
  const double f2 = (w1 * 1.0 + w0 * 4.0) / (w0 + w1);
  const double rss = (1.0 - f1) * (1.0 - f1) + (4.0 - f2) * (4.0 - f2);
  const double df = 2.0 * w0 / (w0 + w1);
  const double want = 2.0 * std::log(rss / 2.0) + std::log(2.0) * df;
  const KernelSpec k(KernelFamily::gaussian, 1.0, 1);
  for (Penalty p : {Penalty::none, Penalty::nuclear, Penalty::lasso}) {
    const BicEntry e = bic(d, k, 0.0, p);
    EXPECT_NEAR(e.rss, rss, 1e-14);
    EXPECT_NEAR(e.df, df, 1e-14);
    EXPECT_NEAR(e.bic, want, 1e-13);
  }
}

TEST(BicTest, DoublingResponsesShiftsResidualTerm) {
  const Dataset d = oracle::micro_instance(7);
  std::vector<Sample> twice = d.samples();
  for (auto& s : twice) s.y *= 2.0;
  const KernelSpec k(KernelFamily::gaussian, 0.1, 1);
  for (Penalty p : {Penalty::none, Penalty::nuclear}) {
    const BicEntry a = bic(d, k, 0.0, p);
    const BicEntry b = bic(Dataset(twice), k, 0.0, p);
    EXPECT_NEAR(b.rss_term - a.rss_term, 20.0 * 64.0 * std::log(4.0), 1e-9);
  }
}

TEST(BicTest, ZeroResidualRaises) {
  // One sample: the in-sample Nadaraya-Watson fit reproduces it exactly.
  const Dataset d({Sample{{0.5}, Mat::identity(2)}});
  for (Penalty p : {Penalty::none, Penalty::nuclear, Penalty::lasso})
    EXPECT_THROW(bic(d, KernelSpec(KernelFamily::gaussian, 0.3, 1), 0.0, p), DegenerateFitError);
}

TEST(TuneTest, EntriesRecomputeAndRunsRepeat) {
  const Dataset d = oracle::micro_instance(8);
  const TuneGrid grid(log_space(0.03, 0.3, 5), log_space(0.001, 1.0, 6));
  for (Penalty p : {Penalty::none, Penalty::nuclear, Penalty::lasso}) {
    const BicReport a = tune(d, grid, p);
    const BicReport b = tune(d, grid, p);
    EXPECT_EQ(a.entries.size(), p == Penalty::none ? 5u : 30u);
    EXPECT_EQ(a.selected, b.selected);
    const double npq = 20.0 * 64.0;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      const BicEntry& e = a.entries[i];
      EXPECT_NEAR(e.bic, e.rss_term + std::log(npq) * e.df, 1e-12 * std::abs(e.bic));
      EXPECT_NEAR(e.rss_term, npq * std::log(e.rss / npq), 1e-12 * std::abs(e.rss_term));
      EXPECT_EQ(e.bic, b.entries[i].bic);
      EXPECT_FALSE(bic_preferred(e, a.best()));
    }
  }
}

TEST(TuneTest, SingleCellSelected) {
  const Dataset d = oracle::micro_instance(9);
  const BicReport r = tune(d, TuneGrid({0.1}, {0.05}), Penalty::nuclear);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.selected, 0u);
  EXPECT_EQ(selected_config(r, 1).kernel.bandwidth(), 0.1);
  EXPECT_EQ(selected_config(r, 1).lambda, 0.05);
}

TEST(TuneTest, TieBreakOrder) {
  BicEntry a, b;
  a.bic = b.bic = 10.0;
  a.df = 3.0;
  b.df = 2.0;
  EXPECT_TRUE(bic_preferred(b, a));
  b.df = 3.0;
  a.lambda = 0.5;
  b.lambda = 0.4;
  EXPECT_TRUE(bic_preferred(b, a));
  b.lambda = 0.5;
  a.bandwidth = 0.2;
  b.bandwidth = 0.1;
  EXPECT_TRUE(bic_preferred(b, a));
  EXPECT_FALSE(bic_preferred(a, a));

  // Every cell zeroes every fit: bic and df tie, smallest lambda and h win.
  const Dataset d = oracle::micro_instance(10);
  const BicReport r = tune(d, TuneGrid({0.05, 0.1}, {1e3, 1e4}), Penalty::nuclear);
  for (const auto& e : r.entries) EXPECT_EQ(e.bic, r.entries.front().bic);
  EXPECT_EQ(r.best().lambda, 1e3);
  EXPECT_EQ(r.best().bandwidth, 0.05);
}

TEST(TuneTest, PlantedRankOneRecovered) {
  std::mt19937_64 rng(77);
  const Mat a = oracle::random_mat(6, 1, rng), b = oracle::random_mat(1, 6, rng);
  const Mat base = matmul(a, b);
  std::normal_distribution<double> nd(0.0, 0.01);
  std::vector<Sample> s;
  for (int i = 0; i < 40; ++i) {
    const double x = i / 39.0;
    Mat y = (2.0 + std::sin(2.0 * std::numbers::pi * x)) * base;
    for (double& v : y.data()) v += nd(rng);
    s.push_back({{x}, std::move(y)});
  }
  const Dataset d(std::move(s));
  const TuneGrid grid = default_grid(d, Penalty::nuclear);
  EXPECT_NEAR(grid.lambdas().back() / grid.lambdas().front(), 1e3, 1e-9);
  const BicReport r = tune(d, grid, Penalty::nuclear);
  ASSERT_TRUE(r.best().mean_rank.has_value());
  EXPECT_EQ(*r.best().mean_rank, 1.0);
}

TEST(TuneTest, ExhaustedGridReportsCells) {
  const Dataset d({Sample{{0.5}, Mat::identity(2)}});
  try {
    tune(d, TuneGrid({0.1, 0.2}, {0.0}), Penalty::nuclear);
    FAIL() << "expected ExhaustedGridError";
  } catch (const ExhaustedGridError& e) {
    EXPECT_EQ(e.cells().size(), 2u);
  }
}

TEST(TuneTest, TuneAllMatchesSeparateRuns) {
  const Dataset d = oracle::micro_instance(12);
  const TuneGrid grid(log_space(0.04, 0.2, 3), log_space(0.01, 1.0, 4));
  const Penalty ps[] = {Penalty::nuclear, Penalty::lasso, Penalty::none};
  const auto all = tune_all(d, grid, ps);
  for (std::size_t k = 0; k < 3; ++k) {
    const BicReport one = tune(d, grid, ps[k]);
    ASSERT_EQ(all[k].entries.size(), one.entries.size());
    for (std::size_t i = 0; i < one.entries.size(); ++i) EXPECT_EQ(all[k].entries[i].bic, one.entries[i].bic);
    EXPECT_EQ(all[k].selected, one.selected);
  }
}

TEST(TuneTest, InSampleRssMatchesDirectFits) {
  const Dataset d = oracle::micro_instance(13);
  const KernelSpec k(KernelFamily::gaussian, 0.07, 1);
  for (Penalty p : {Penalty::nuclear, Penalty::lasso})
    for (double lambda : {0.0, 0.02, 0.2}) {
      const BicEntry e = bic(d, k, lambda, p);
      double rss = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i)
        rss += frobenius_dist_sq(d[i].y, fit(d, FitConfig{k, lambda, p}, d[i].x).estimate);
      EXPECT_NEAR(e.rss, rss, 1e-10 * rss);
    }
}

TEST(DefaultGridTest, FollowsRule) {
  const Dataset d = oracle::micro_instance(14);
  const TuneGrid g = default_grid(d, Penalty::nuclear);
  const double rate = std::pow(20.0, -1.0 / 5.0);
  EXPECT_NEAR(g.bandwidths().front(), 0.5 * rate, 1e-14);
  EXPECT_NEAR(g.bandwidths().back(), 4.0 * rate, 1e-14);
  EXPECT_EQ(g.bandwidths().size(), 8u);
  EXPECT_EQ(g.lambdas().size(), 8u);
  // Largest lambda zeroes every in-sample fit at the middle bandwidth.
  const KernelSpec mid(KernelFamily::gaussian, g.bandwidths()[4], 1);
  EXPECT_EQ(df_nuclear(d, mid, g.lambdas().back() * (1 + 1e-12)), 0.0);
}

TEST(LoocvTest, IdenticalResponsesGiveZero) {
  std::vector<Sample> s;
  for (int i = 0; i < 6; ++i) s.push_back({{i / 5.0}, Mat::identity(3)});
  const CvResult r = loocv(Dataset(s), FitConfig{KernelSpec(KernelFamily::gaussian, 0.2, 1), 0.0});
  for (double e : r.per_sample_errors) EXPECT_LE(e, 1e-28);
}

TEST(LoocvTest, ScalarPair) {
  const CvResult r = loocv(scalar_pair(0.0, 2.0),
                           FitConfig{KernelSpec(KernelFamily::gaussian, 1.0, 1), 0.0});
  ASSERT_EQ(r.per_sample_errors.size(), 2u);
  EXPECT_EQ(r.per_sample_errors[0], 4.0);
  EXPECT_EQ(r.per_sample_errors[1], 4.0);
  EXPECT_EQ(r.mean, 4.0);
  EXPECT_EQ(r.sd, 0.0);
}

TEST(LoocvTest, MatchesNaiveDoubleLoop) {
  const Dataset d = oracle::micro_instance(15);
  const double h = 0.09, lambda = 0.03;
  const CvResult r = loocv(d, FitConfig{KernelSpec(KernelFamily::gaussian, h, 1), lambda});
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<Sample> rest;
    for (std::size_t j = 0; j < d.size(); ++j)
      if (j != i) rest.push_back(d[j]);
    double w = 0.0;
    const Mat nw = oracle::naive_nw(rest, d[i].x, h, &w);
    const Mat g = oracle::svt(nw, static_cast<double>(rest.size()) * lambda / w);
    const double err = frobenius_dist_sq(d[i].y, g);
    EXPECT_NEAR(r.per_sample_errors[i], err, 1e-9 * err);
    sum += err;
  }
  EXPECT_NEAR(r.mean, sum / static_cast<double>(d.size()), 1e-9 * r.mean);
}

TEST(LoocvTest, PermutationInvariantMean) {
  const Dataset d = oracle::micro_instance(16);
  std::vector<Sample> shuffled = d.samples();
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const FitConfig cfg{KernelSpec(KernelFamily::gaussian, 0.1, 1), 0.05};
  EXPECT_NEAR(loocv(d, cfg).mean, loocv(Dataset(shuffled), cfg).mean, 1e-12 * loocv(d, cfg).mean);
}

TEST(LoocvTest, ModesAgreeOnSingleCellGrid) {
  const Dataset d = oracle::micro_instance(17);
  const TuneGrid grid({0.1}, {0.05});
  const CvResult fixed = loocv(d, grid, Penalty::nuclear, CvMode::fixed);
  const CvResult retune = loocv(d, grid, Penalty::nuclear, CvMode::retune);
  EXPECT_EQ(fixed.per_sample_errors, retune.per_sample_errors);
  ASSERT_TRUE(fixed.config.has_value());
  EXPECT_FALSE(retune.config.has_value());
  EXPECT_THROW(loocv(Dataset({d[0]}), FitConfig{KernelSpec(KernelFamily::gaussian, 0.1, 1)}), ArgumentError);
}
