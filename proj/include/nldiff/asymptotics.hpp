#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nldiff/evolution.hpp"
#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"
#include "nldiff/stationary.hpp"

namespace nldiff {

/// max |W(t) - W(0)| / W(0) over the weighted-mass column.
double conservation_drift(const MetricsSeries& series);

/// C* M* int U_alpha(xi) |xi|^{2-N} d xi; for N = 3 the integral is
/// (pi alpha)^{-1/2}.
double predicted_mass_prefactor(double cstar, double mstar, double alpha, int dimension);

struct MassDecayFit {
  double slope = 0.0;
  double k_measured = 0.0;
  double k_predicted = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t points = 0;
  bool excess_positive = true;  // M(t) - M* > 0 at every recorded t > 0
};

/// Fits log(M(t) - M*) against log t over the last decade of recorded times.
/// `noise` is the absolute mass noise floor; the excess must exceed 10x it.
MassDecayFit mass_decay_fit(const MetricsSeries& series, double mstar, double cstar,
                            double alpha, int dimension, double noise = 0.0);

/// sup over non-pad nodes with |x|^2 >= delta t of t^{N/2} |u - M* Gamma|.
/// With `phi` the ansatz becomes M* phi Gamma, matching global_error.
double outer_error(const Field& u, double t, double mstar, double alpha, double delta,
                   const DomainMask& mask, const Field* phi = nullptr);

/// sup over exterior nodes with |x|^2 < delta t of t^{N/2} |u - M* phi Gamma|.
double inner_error(const Field& u, double t, double mstar, const Field& phi, double alpha,
                   double delta, const DomainMask& mask);

/// sup over non-pad nodes of t^{N/2} |u - M* phi Gamma|.
double global_error(const Field& u, double t, double mstar, const Field& phi, double alpha,
                    const DomainMask& mask);

/// max over exterior nodes with |x| <= radius of
/// |t^{N/2} u - M* (4 pi alpha)^{-N/2} phi| / (M* (4 pi alpha)^{-N/2}).
double compact_set_deviation(const Field& u, double t, double mstar, const Field& phi,
                             double alpha, double radius, const DomainMask& mask);

struct BarrierSample {
  double radius = 0.0;
  double margin = 0.0;         // raw margin, >= 0 means the inequality holds
  double scaled_margin = 0.0;  // margin * (|x|^2 + b)^{gamma + 2}
};

struct EllipticBarrierResult {
  double gamma = 0.0;
  bool found = false;
  double b = 0.0;
  double worst_margin = 0.0;
  std::vector<BarrierSample> profile;  // worst margin per sampled radius
};

/// Lz(x) - rhs for z = (|x|^2 + b)^{-gamma}, evaluated by direct lattice
/// summation at x. Negative values mean the inequality holds.
double elliptic_excess(const DiscreteKernel& dk, double alpha, double gamma, double b,
                       const Point& x);

/// Smallest b in [1, 1e6] (to 0.1% in b) with a nonnegative margin at every
/// lattice node of the first orthant whose radius lies in [r_lo, r_hi].
EllipticBarrierResult check_elliptic_barrier(const DiscreteKernel& dk, double alpha,
                                             double gamma, double r_lo, double r_hi);

struct ParabolicParams {
  double kappa = 0.5;
  double gamma = 0.2;
  double b = 1.0;
  double k_plus = 1.0;
  double R = 0.0;
  double tolerance = 1e-10;  // relative to max |phi omega| on the region
};

struct ParabolicMargin {
  double t = 0.0;
  double delta = 0.0;
  std::size_t nodes = 0;
  double plus_margin = 0.0;   // min of D_t v+ - L v+
  double minus_margin = 0.0;  // max of D_t v- - L v-
  double scale = 0.0;         // max |phi omega| on the region
};

struct ParabolicBarrierResult {
  bool found = false;
  double delta_star = 0.0;  // from the v+ margins
  bool found_minus = false;
  double delta_star_minus = 0.0;  // same rule applied to the v- margins
  std::vector<ParabolicMargin> margins;  // every (delta, t) evaluated
};

/// Largest delta among `candidates` such that the region R^2 <= |x|^2 <= delta t
/// of exterior nodes is nonempty for some time and D_t v+ - L v+ >= -tol there
/// at every time, as must hold for every smaller candidate. The v- analogue
/// (D_t v- - L v- <= tol) is reported separately.
ParabolicBarrierResult check_parabolic_barrier(const StationaryProfile& profile,
                                               const DiscreteKernel& dk,
                                               const DomainMask& mask, double alpha,
                                               const ParabolicParams& params,
                                               const std::vector<double>& times,
                                               const std::vector<double>& candidates);

}  // namespace nldiff
