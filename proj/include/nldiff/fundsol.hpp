#pragma once

#include <cstddef>
#include <vector>

#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"

namespace nldiff {

enum class OmegaMethod { spectral, series };

/// Regular part of the fundamental solution F = e^{-t} delta + omega, sampled
/// as a density on the grid. The atom is never sampled.
struct OmegaSlice {
  Field field;
  double t = 0.0;
  OmegaMethod method = OmegaMethod::spectral;
  int series_terms = 0;
  /// Mass of the full periodic result, before restriction to the box.
  double periodic_mass = 0.0;
};

/// Inverse transform of e^{-t} (e^{J^ t} - 1) on the padded spectral lattice.
OmegaSlice omega_spectral(const DiscreteKernel& dk, double t);

/// e^{-t} sum_{n>=1} t^n/n! J^{*n}, truncated once the Poisson tail is below
/// `tolerance`. Convolution powers are built by repeated FFT convolution on
/// a period wide enough that nothing wraps. max_terms > 0 forces a fixed
/// truncation.
OmegaSlice omega_series(const DiscreteKernel& dk, double t, double tolerance = 1e-14,
                        int max_terms = 0);

/// Number of terms needed so that e^{-t} sum_{n>terms} t^n/n! < tolerance.
int poisson_terms(double t, double tolerance);

/// (4 pi alpha t)^{-N/2} exp(-|x|^2 / (4 alpha t)).
Field gamma_alpha(const Grid& grid, double t, double alpha);

/// Sup over nodes at least one support radius from the box faces of
/// |centered dt omega - (K omega - omega) - e^{-t} J|.
double omega_residual(const DiscreteKernel& dk, double t, double dt_fd,
                      bool include_forcing = true);

struct OmegaEstimateRow {
  double t = 0.0;
  double integral = 0.0;
  double min = 0.0;
  double sup = 0.0;
  double abs_integral = 0.0;
  double gaussian_gap = 0.0;       // t^{N/2} sup |omega - Gamma|
  double tail_constant = 0.0;      // sup_{|x|>=2} |omega| |x|^{N+2} / t
  double gradient_gap = 0.0;       // t^{(N+1)/2} sup |D_h (omega - Gamma)|
};

/// Rows for each time. Gamma uses `alpha`.
std::vector<OmegaEstimateRow> check_omega_estimates(const DiscreteKernel& dk,
                                                    const std::vector<double>& times,
                                                    double alpha);

}  // namespace nldiff
