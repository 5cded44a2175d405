#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "matreg/error.hpp"
#include "matreg/mat.hpp"

namespace matreg {

/// One observation: covariate vector x and matrix response y.
struct Sample {
  std::vector<double> x;
  Mat y;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Nonempty ordered collection of samples sharing (s, p, q).
class Dataset {
 public:
  explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw ArgumentError("Dataset: no samples");
    s_ = samples_.front().x.size();
    p_ = samples_.front().y.rows();
    q_ = samples_.front().y.cols();
    if (s_ == 0) throw ArgumentError("Dataset: covariate dimension is zero");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& smp = samples_[i];
      if (smp.x.size() != s_ || smp.y.rows() != p_ || smp.y.cols() != q_)
        throw ArgumentError("Dataset: sample " + std::to_string(i) +
                            " has inconsistent dimensions");
      for (double v : smp.x)
        if (!std::isfinite(v))
          throw ArgumentError("Dataset: non-finite covariate in sample " +
                              std::to_string(i));
      if (!all_finite(smp.y))
        throw ArgumentError("Dataset: non-finite response in sample " +
                            std::to_string(i));
    }
    xs_.reserve(samples_.size());
    for (const Sample& smp : samples_) xs_.push_back(smp.x);
  }

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t s() const noexcept { return s_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept { return q_; }

  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  /// Covariates in sample order.
  const std::vector<std::vector<double>>& covariates() const noexcept {
    return xs_;
  }

  /// Copy with sample i removed. Requires at least two samples.
  Dataset without(std::size_t i) const {
    if (samples_.size() < 2)
      throw ArgumentError("Dataset::without: need at least two samples");
    std::vector<Sample> rest;
    rest.reserve(samples_.size() - 1);
    for (std::size_t k = 0; k < samples_.size(); ++k)
      if (k != i) rest.push_back(samples_[k]);
    return Dataset(std::move(rest));
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.samples_ == b.samples_;
  }

 private:
  std::vector<Sample> samples_;
  std::vector<std::vector<double>> xs_;
  std::size_t s_ = 0, p_ = 0, q_ = 0;
};

}  // namespace matreg
