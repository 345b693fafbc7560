#pragma once

#include <cstddef>
#include <vector>

#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"

namespace nldiff {

struct PhiSolveOptions {
  double tolerance = 1e-10;
  /// Increasing ball radii; empty selects default_ball_radii().
  std::vector<double> radii;
  std::size_t max_sweeps = 200000;
  /// Rescale the last stage so that psi decays like C* r^{2-N} instead of
  /// vanishing at the outermost ball.
  bool far_field_correction = true;
  /// Verify after every sweep that no value increased.
  bool check_monotone = true;
};

struct BallStage {
  double radius = 0.0;
  std::size_t sweeps = 0;
  double last_change = 0.0;
  double residual = 0.0;
};

struct StationaryProfile {
  Field phi;
  Field psi;
  /// sup |K phi - phi| over the free nodes of the largest ball.
  double residual = 0.0;
  std::vector<double> ball_radii_used;
  std::vector<BallStage> stages;
  bool stage_monotone = true;
  bool sweep_monotone = true;
  double far_field_scale = 1.0;
  double cstar_fit = 0.0;
  double cstar_flux = 0.0;
  double flux_mu = 0.0;
  double decay_slope_psi = 0.0;
  bool estimates_valid = false;

  double largest_radius() const {
    return ball_radii_used.empty() ? 0.0 : ball_radii_used.back();
  }
};

/// Largest |x| over hole nodes, zero without holes.
double hole_circumradius(const DomainMask& mask);

/// Doubling sequence from circumradius + 2 support radii up to
/// extent - support radius.
std::vector<double> default_ball_radii(const DomainMask& mask, double support_radius);

/// Expanding-ball monotone iteration. The mask must carry component labels.
StationaryProfile solve_phi(const DiscreteKernel& dk, const DomainMask& mask,
                            const PhiSolveOptions& options = {});

struct FitRange {
  double r_lo = 0.0;
  double r_hi = 0.0;
};

/// [2 * circumradius, 0.75 * largest ball radius].
FitRange default_fit_range(const StationaryProfile& profile, const DomainMask& mask);

struct CstarEstimate {
  double cstar_fit = 0.0;
  double flux_mu = 0.0;
  double cstar_flux = 0.0;
  std::size_t bins = 0;
};

CstarEstimate estimate_cstar(const StationaryProfile& profile, const DomainMask& mask,
                             FitRange range);
/// Flux-based estimate only, for an arbitrary psi-like field.
double flux_estimate(const Field& psi, const DomainMask& mask, FitRange range,
                     double bin_width);

struct DecaySlope {
  double slope = 0.0;
  bool decays = false;  // false when psi vanishes on the range
};

/// Log-log slope of the radial mean of psi. bin_width <= 0 selects 2h.
DecaySlope psi_decay_slope(const StationaryProfile& profile, const DomainMask& mask,
                           FitRange range, double bin_width = 0.0);

/// Standard 2N+1-point Laplacian; zero on the outermost layer of nodes.
Field discrete_laplacian(const Field& f);

/// Log-log slope of the radial max of |discrete Laplacian of f| over
/// unbounded exterior nodes whose stencil avoids holes.
double laplacian_decay_slope(const Field& f, const DomainMask& mask, FitRange range,
                             double bin_width = 0.0);
double laplacian_decay_check(const StationaryProfile& profile, const DomainMask& mask,
                             FitRange range);

/// max over exterior nodes of psi * (|x|^2 + 1)^{(N-2)/2}.
double psi_bound_constant(const StationaryProfile& profile, const DomainMask& mask);

/// Node set over which pair energies are summed.
enum class EnergyDomain { exterior, box };

/// E(f) = 1/2 h^N sum_{i,j in S} w_{j-i} (f_i - f_j)^2.
double nonlocal_energy(const Field& f, const DiscreteKernel& dk, const DomainMask& mask,
                       EnergyDomain domain = EnergyDomain::box);

/// Energy of psi extended by 1 on the holes; an upper bound for the capacity.
double capacity_estimate(const StationaryProfile& profile, const DiscreteKernel& dk,
                         const DomainMask& mask);

/// h^N sum (1 - phi) u0.
double lost_mass(const Field& u0, const StationaryProfile& profile, const DomainMask& mask);

struct ComponentMode {
  int component_id = -1;
  double rho = 0.0;
  double lambda1 = 0.0;
  std::size_t iterations = 0;
  Field mode;
};

ComponentMode bounded_component_mode(const DiscreteKernel& dk, const DomainMask& mask,
                                     int component_id, double tolerance = 1e-11,
                                     std::size_t max_iterations = 200000);

}  // namespace nldiff
