#include "nldiff/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>

#include "nldiff/error.hpp"

namespace nldiff {

int next_fast_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

RealFft::RealFft(int dimension, int period) : dimension_(dimension), period_(period) {
  if (dimension < 1 || dimension > kMaxDim) {
    throw Error(ErrorKind::unsupported_dimension, "FFT dimension out of range");
  }
  real_size_ = 1;
  for (int d = 0; d < dimension; ++d) real_size_ *= static_cast<std::size_t>(period);
  complex_size_ = real_size_ / static_cast<std::size_t>(period) *
                  static_cast<std::size_t>(period / 2 + 1);
  real_ = static_cast<double*>(fftw_malloc(sizeof(double) * real_size_));
  spec_ = fftw_malloc(sizeof(fftw_complex) * complex_size_);
  if (real_ == nullptr || spec_ == nullptr) {
    fftw_free(real_);
    fftw_free(spec_);
    throw Error(ErrorKind::resolution, "FFT buffer allocation failed for period " +
                                           std::to_string(period));
  }
  std::array<int, kMaxDim> dims{};
  for (int d = 0; d < dimension; ++d) dims[d] = period;
  auto* spec = static_cast<fftw_complex*>(spec_);
  forward_plan_ = fftw_plan_dft_r2c(dimension, dims.data(), real_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r(dimension, dims.data(), spec, real_, FFTW_ESTIMATE);
  std::fill(real_, real_ + real_size_, 0.0);
}

RealFft::~RealFft() {
  if (forward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward() { fftw_execute(static_cast<fftw_plan>(forward_plan_)); }

// c2r destroys its input; callers never reuse the spectrum after inverse().
void RealFft::inverse() { fftw_execute(static_cast<fftw_plan>(inverse_plan_)); }

std::size_t RealFft::real_index(const Index& offset) const {
  std::size_t flat = 0;
  for (int d = 0; d < dimension_; ++d) {
    flat = flat * static_cast<std::size_t>(period_) +
           static_cast<std::size_t>(wrap(offset[d], period_));
  }
  return flat;
}

}  // namespace nldiff
