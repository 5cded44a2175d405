#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matreg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// SVD sweeps exhausted before the columns became orthogonal.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Every kernel weight at the evaluation point is zero.
class DegenerateNeighborhoodError : public Error {
 public:
  DegenerateNeighborhoodError(const std::string& what, std::vector<double> x,
                              double bandwidth)
      : Error(what), x_(std::move(x)), bandwidth_(bandwidth) {}
  const std::vector<double>& point() const noexcept { return x_; }
  double bandwidth() const noexcept { return bandwidth_; }

 private:
  std::vector<double> x_;
  double bandwidth_;
};

/// Two singular values are too close for the degrees-of-freedom formula
/// (raised only in strict mode).
class DegenerateSpectrumError : public Error {
 public:
  DegenerateSpectrumError(const std::string& what, std::size_t sample,
                          std::size_t k, std::size_t j)
      : Error(what), sample_(sample), k_(k), j_(j) {}
  std::size_t sample() const noexcept { return sample_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t j() const noexcept { return j_; }

 private:
  std::size_t sample_, k_, j_;
};

/// Residual sum of squares is zero, so the BIC log term is undefined.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `offset()` is the byte position of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct IndexedFailure {
  std::size_t index;
  std::string message;
};

/// One or more points of a batch evaluation failed.
class PathError : public Error {
 public:
  explicit PathError(std::vector<IndexedFailure> failures)
      : Error(describe(failures)), failures_(std::move(failures)) {}
  const std::vector<IndexedFailure>& failures() const noexcept {
    return failures_;
  }

 private:
  static std::string describe(const std::vector<IndexedFailure>& f) {
    std::string s = std::to_string(f.size()) + " evaluation point(s) failed";
    if (!f.empty())
      s += "; first at index " + std::to_string(f.front().index) + ": " +
           f.front().message;
    return s;
  }
  std::vector<IndexedFailure> failures_;
};

/// Every (bandwidth, lambda) cell of a tuning grid failed.
class ExhaustedGridError : public Error {
 public:
  struct Cell {
    double bandwidth;
    double lambda;
    std::string message;
  };
  explicit ExhaustedGridError(std::vector<Cell> cells)
      : Error("every tuning grid cell failed (" + std::to_string(cells.size()) +
              " cells)" +
              (cells.empty() ? std::string{} : "; first: " + cells.front().message)),
        cells_(std::move(cells)) {}
  const std::vector<Cell>& cells() const noexcept { return cells_; }

 private:
  std::vector<Cell> cells_;
};

}  // namespace matreg
