#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "nldiff/lattice.hpp"

namespace nldiff {

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
int next_fast_size(int n);

/// Periodic index of a signed lattice offset on a ring of length `period`.
inline int wrap(int offset, int period) {
  const int r = offset % period;
  return r < 0 ? r + period : r;
}

/// Owning wrapper around an FFTW real-to-complex / complex-to-real plan pair
/// on a cubic P^N periodic lattice. Plans use FFTW_ESTIMATE so results do not
/// depend on planner timing.
class RealFft {
 public:
  RealFft(int dimension, int period);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int dimension() const { return dimension_; }
  int period() const { return period_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }
  /// Length of the last axis in the half-spectrum layout.
  int half_length() const { return period_ / 2 + 1; }

  std::span<double> real() { return {real_, real_size_}; }
  std::span<std::complex<double>> spectrum() {
    return {reinterpret_cast<std::complex<double>*>(spec_), complex_size_};
  }

  void forward();
  /// Unnormalized inverse: the caller divides by real_size().
  void inverse();

  /// Flat index of a signed offset in the real array.
  std::size_t real_index(const Index& offset) const;

 private:
  int dimension_;
  int period_;
  std::size_t real_size_;
  std::size_t complex_size_;
  double* real_ = nullptr;
  void* spec_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace nldiff
