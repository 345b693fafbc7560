#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace nldiff {

/// Neumaier-compensated accumulator. Order of add() calls is the only
/// source of nondeterminism, so callers iterate in index order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fits log(y) against log(x); every y must be positive.
LineFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace nldiff
