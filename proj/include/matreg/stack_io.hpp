#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "matreg/dataset.hpp"
#include "matreg/error.hpp"

// MRS1 stack file, all fields little-endian:
//   bytes 0..3    magic "MRS1"
//   bytes 4..35   uint64 n, s, p, q
//   then n*s doubles (covariates, sample-major) and n*p*q doubles
//   (responses, sample-major, each matrix row-major).

namespace matreg {

inline constexpr std::array<char, 4> kStackMagic{'M', 'R', 'S', '1'};
inline constexpr std::size_t kStackHeaderBytes = 4 + 4 * 8;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace detail

/// Serialises a dataset to the MRS1 byte layout.
inline std::string encode_stack(const Dataset& data) {
  std::string out(kStackMagic.begin(), kStackMagic.end());
  const std::size_t n = data.size();
  out.reserve(kStackHeaderBytes + 8 * n * (data.s() + data.p() * data.q()));
  for (std::size_t v : {n, data.s(), data.p(), data.q()}) detail::put_u64(out, v);
  for (const Sample& smp : data.samples())
    for (double v : smp.x) detail::put_f64(out, v);
  for (const Sample& smp : data.samples())
    for (double v : smp.y.data()) detail::put_f64(out, v);
  return out;
}

/// Parses an MRS1 byte buffer. Errors carry the byte offset of the problem.
inline Dataset decode_stack(const std::string& bytes) {
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 4 || std::memcmp(bytes.data(), kStackMagic.data(), 4) != 0)
    throw ParseError("bad magic: expected \"MRS1\"", 0);
  if (size < kStackHeaderBytes)
    throw ParseError("truncated header: need " + std::to_string(kStackHeaderBytes) +
                         " bytes, file has " + std::to_string(size),
                     size);
  std::uint64_t dims[4];
  for (int k = 0; k < 4; ++k) dims[k] = detail::get_u64(raw + 4 + 8 * k);
  const std::uint64_t n = dims[0], s = dims[1], p = dims[2], q = dims[3];
  const char* names[] = {"n", "s", "p", "q"};
  for (int k = 0; k < 4; ++k)
    if (dims[k] == 0)
      throw ParseError(std::string("header field ") + names[k] + " is zero",
                       4 + 8 * static_cast<std::size_t>(k));
  std::uint64_t x_count = 0, pq = 0, y_count = 0, values = 0, need = 0;
  if (__builtin_mul_overflow(n, s, &x_count) || __builtin_mul_overflow(p, q, &pq) ||
      __builtin_mul_overflow(n, pq, &y_count) ||
      __builtin_add_overflow(x_count, y_count, &values) ||
      __builtin_mul_overflow(values, std::uint64_t{8}, &need) ||
      __builtin_add_overflow(need, std::uint64_t{kStackHeaderBytes}, &need))
    throw ParseError("header sizes overflow 64 bits", 4);
  if (size < need) {
    // Offset of the first value that is not fully present.
    const std::size_t first_missing = kStackHeaderBytes + 8 * ((size - kStackHeaderBytes) / 8);
    std::ostringstream os;
    os << "truncated: header promises " << need << " bytes, file has " << size;
    throw ParseError(os.str(), first_missing);
  }
  if (size > need)
    throw ParseError("trailing bytes after the response block", need);

  std::vector<Sample> samples;
  samples.reserve(n);
  std::size_t off = kStackHeaderBytes;
  std::vector<std::vector<double>> xs(n, std::vector<double>(s));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < s; ++j, off += 8) {
      const double v = detail::get_f64(raw + off);
      if (!std::isfinite(v)) throw ParseError("non-finite covariate", off);
      xs[i][j] = v;
    }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> y(p * q);
    for (std::size_t k = 0; k < y.size(); ++k, off += 8) {
      const double v = detail::get_f64(raw + off);
      if (!std::isfinite(v)) throw ParseError("non-finite response value", off);
      y[k] = v;
    }
    samples.push_back(Sample{std::move(xs[i]), Mat(p, q, std::move(y))});
  }
  return Dataset(std::move(samples));
}

inline void write_stack(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_stack(data);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path + "' failed");
}

inline Dataset read_stack(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read from '" + path + "' failed");
  return decode_stack(bytes);
}

}  // namespace matreg
