#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "matreg/matreg.hpp"
#include "matreg/report.hpp"
#include "oracles.hpp"

using namespace matreg;

namespace {

Dataset three_samples() {
  std::mt19937_64 rng(3);
  std::vector<Sample> s;
  for (int i = 0; i < 3; ++i) s.push_back({{i * 0.5, -1.0 * i}, oracle::random_mat(2, 3, rng)});
  return Dataset(std::move(s));
}

std::size_t parse_offset(const std::string& bytes) {
  try {
    decode_stack(bytes);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected ParseError";
  return 0;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("matreg_test_" + name);
}

}  // namespace

TEST(StackTest, RoundTripThroughFile) {
  const Dataset d = three_samples();
  const auto path = temp_path("rt.mrs");
  write_stack(d, path.string());
  EXPECT_EQ(read_stack(path.string()), d);
  EXPECT_EQ(std::filesystem::file_size(path), kStackHeaderBytes + 8u * 3u * (2u + 6u));
  std::filesystem::remove(path);
}

TEST(StackTest, LayoutIsLittleEndian) {
  const Dataset d({Sample{{1.0}, Mat(1, 1, {2.0})}});
  const std::string b = encode_stack(d);
  ASSERT_EQ(b.size(), 52u);
  EXPECT_EQ(b.substr(0, 4), "MRS1");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);  // n low byte
  for (int k = 5; k < 12; ++k) EXPECT_EQ(b[k], 0);
  const unsigned char one[] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};  // 1.0
  EXPECT_EQ(std::memcmp(b.data() + 36, one, 8), 0);
}

TEST(StackTest, LosslessForExtremeFiniteValues) {
  const double vals[] = {std::numeric_limits<double>::denorm_min(),
                         -std::numeric_limits<double>::denorm_min(),
                         std::numeric_limits<double>::min() / 3.0,
                         std::numeric_limits<double>::max(),
                         -0.0,
                         0.1,
                         -std::numeric_limits<double>::lowest()};
  std::vector<double> v(std::begin(vals), std::end(vals));
  v.push_back(1.0 / 3.0);
  const Dataset d({Sample{{std::numeric_limits<double>::denorm_min()}, Mat(2, 4, v)}});
  const Dataset back = decode_stack(encode_stack(d));
  for (std::size_t k = 0; k < v.size(); ++k)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[0].y.data()[k]), std::bit_cast<std::uint64_t>(v[k]));
  EXPECT_EQ(back[0].x[0], std::numeric_limits<double>::denorm_min());
}

TEST(StackTest, BadMagicNamesExpected) {
  std::string b = encode_stack(three_samples());
  b.replace(0, 4, "XXXX");
  try {
    decode_stack(b);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
    EXPECT_NE(std::string(e.what()).find("MRS1"), std::string::npos);
  }
  EXPECT_EQ(parse_offset("MR"), 0u);
}

TEST(StackTest, TruncationOffsets) {
  const Dataset two({Sample{{0.0}, Mat(2, 2, {1, 2, 3, 4})}, Sample{{1.0}, Mat(2, 2, {5, 6, 7, 8})}});
  const std::string full = encode_stack(two);
  // Header, 2 covariates, then the first sample's 4 values: the second
  // sample's block starts at 36 + 16 + 32.
  EXPECT_EQ(parse_offset(full.substr(0, 36 + 16 + 32)), 84u);
  EXPECT_EQ(parse_offset(full.substr(0, 36 + 16 + 32 + 5)), 84u);
  EXPECT_EQ(parse_offset(full.substr(0, 40)), 36u);
  EXPECT_EQ(parse_offset(full.substr(0, 20)), 20u);
  EXPECT_EQ(parse_offset(full + "x"), full.size());
}

TEST(StackTest, HeaderAndValueErrors) {
  std::string b = encode_stack(three_samples());
  std::string zero_p = b;
  std::memset(zero_p.data() + 20, 0, 8);
  EXPECT_EQ(parse_offset(zero_p), 20u);
  std::string huge = b;
  std::memset(huge.data() + 4, 0xFF, 8);
  EXPECT_EQ(parse_offset(huge), 4u);
  std::string nan_value = b;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan_value.data() + 36 + 8 * 6 + 8 * 2, &nan, 8);
  EXPECT_EQ(parse_offset(nan_value), 36u + 8 * 6 + 8 * 2);
  std::string inf_cov = b;
  const double inf = INFINITY;
  std::memcpy(inf_cov.data() + 36 + 8, &inf, 8);
  EXPECT_EQ(parse_offset(inf_cov), 44u);
}

TEST(StackTest, MissingFileIsIoError) {
  EXPECT_THROW(read_stack("/nonexistent/dir/x.mrs"), IoError);
  EXPECT_THROW(write_stack(three_samples(), "/nonexistent/dir/x.mrs"), IoError);
}

TEST(CsvTest, ParsesAndReportsOffsets) {
  const auto rows = parse_csv_rows("# header\n1, 2.5 ,3\n\n-4,5e-1,6\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1], (std::vector<double>{-4.0, 0.5, 6.0}));
  try {
    parse_csv_rows("1,2\n3,abc\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
  try {
    parse_csv_rows("1,2\n3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(parse_csv_rows("1,,2\n"), ParseError);
  EXPECT_THROW(parse_csv_rows("nan\n"), ParseError);
}

TEST(CsvTest, MatrixRoundTripIsExact) {
  std::mt19937_64 rng(8);
  const Mat m = oracle::random_mat(5, 7, rng, 1e3);
  const auto path = temp_path("m.csv");
  write_csv_matrix(m, path.string());
  EXPECT_EQ(read_csv_matrix(path.string()), m);
  std::filesystem::remove(path);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(SlidingTest, EegShape) {
  std::mt19937_64 rng(1);
  const Mat series = oracle::random_mat(256, 64, rng);
  const Dataset out = sliding_covariance(series, 100, 1);
  EXPECT_EQ(out.size(), 157u);
  EXPECT_EQ(out.p(), 64u);
  EXPECT_EQ(out.q(), 64u);
  EXPECT_EQ(out[0].x[0], 49.5 / 255.0);
  EXPECT_EQ(out[156].x[0], (156 + 49.5) / 255.0);
}

TEST(SlidingTest, ConstantSeriesGivesZero) {
  const Mat series(50, 3, std::vector<double>(150, 2.5));
  const Dataset out = sliding_covariance(series, 10, 3);
  for (const auto& s : out.samples()) EXPECT_EQ(frobenius_sq(s.y), 0.0);
  EXPECT_EQ(window_count(50, 10, 3), 14u);
}

TEST(SlidingTest, MatchesDirectCovariance) {
  std::mt19937_64 rng(2);
  const Mat series = oracle::random_mat(30, 4, rng);
  const Dataset out = sliding_covariance(series, 7, 5);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t w = 0; w < out.size(); ++w)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t t = 0; t < 7; ++t) {
          ma += series(w * 5 + t, a) / 7.0;
          mb += series(w * 5 + t, b) / 7.0;
        }
        double c = 0.0;
        for (std::size_t t = 0; t < 7; ++t)
          c += (series(w * 5 + t, a) - ma) * (series(w * 5 + t, b) - mb);
        EXPECT_NEAR(out[w].y(a, b), c / 6.0, 1e-13);
      }
}

TEST(SlidingTest, LawOfLargeNumbers) {
  std::mt19937_64 rng(3);
  const Mat series = oracle::random_mat(100000, 3, rng);
  const Dataset out = sliding_covariance(series, 10000, 30000);
  EXPECT_EQ(out.size(), 4u);
  for (const auto& s : out.samples())
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(s.y(a, b), a == b ? 1.0 : 0.0, 0.05);
}

TEST(SlidingTest, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(4);
  const Mat series = oracle::random_mat(60, 8, rng);
  const Dataset out = sliding_covariance(series, 6, 4);  // rank deficient: window < d
  for (const auto& s : out.samples()) {
    EXPECT_EQ(s.y, s.y.transpose());
    EXPECT_GE(oracle::symmetric_eigenvalues(s.y).back(), -1e-10);
  }
}

TEST(SlidingTest, ArgumentErrors) {
  const Mat series(10, 2);
  EXPECT_THROW(sliding_covariance(series, 11, 1), ArgumentError);
  EXPECT_THROW(sliding_covariance(series, 1, 1), ArgumentError);
  EXPECT_THROW(sliding_covariance(series, 5, 0), ArgumentError);
}

TEST(ReportTest, KeysSortedAndVersioned) {
  const json r = run_report("fit", {"matreg", "fit"}, json{{"b", 1}, {"a", 2}}, json::object());
  const std::string text = r.dump();
  EXPECT_EQ(r["format_version"], kReportFormatVersion);
  EXPECT_LT(text.find("\"command\""), text.find("\"config\""));
  EXPECT_LT(text.find("\"a\""), text.find("\"b\""));
}

TEST(ReportTest, SimSpecRecordsGrid) {
  const json j = to_json(make_sim_spec(Setting::III, ShapeKind::square, 200, 3, 42));
  EXPECT_EQ(j["seed"], 42u);
  EXPECT_EQ(j["covariate_grid"]["rows"], 14u);
  EXPECT_EQ(j["covariate_grid"]["cols"], 15u);
  EXPECT_EQ(j["error_model"], "iid");
}
