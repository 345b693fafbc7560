#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "nldiff/lattice.hpp"

namespace nldiff {

enum class KernelFamily { smooth_bump, polynomial_compact };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Radial profile p(s), s = |z| / radius in [0, 1). J(z) = normalization * p(s).
double kernel_profile(KernelFamily family, double s);

/// Admissible kernel: radial, compactly supported in B(0, support_radius),
/// nonnegative, unit mass, positive at the origin.
struct KernelSpec {
  KernelFamily family = KernelFamily::smooth_bump;
  double support_radius = 1.0;
  int dimension = 3;
  double normalization = 0.0;

  double value_at_radius(double r) const;
};

KernelSpec make_kernel(KernelFamily family, double support_radius, int dimension);
KernelSpec make_kernel(std::string_view family, double support_radius, int dimension);

/// Surface area of the unit sphere in R^N.
double unit_sphere_area(int dimension);

/// Integral over R^N of |z|^power * profile(|z|) for a radial profile
/// supported on [0, radius], by adaptive Gauss-Kronrod quadrature.
double radial_moment(const std::function<double(double)>& profile, double radius,
                     int dimension, int power, double tolerance = 1e-10);

/// alpha = (1/2N) int |z|^2 J(z) dz for an arbitrary radial profile; the
/// profile need not be normalized.
double diffusivity_of_profile(const std::function<double(double)>& profile, double radius,
                              int dimension);

double diffusivity(const KernelSpec& spec);

/// Real half-spectrum of a kernel on a P^N periodic lattice.
struct KernelSpectrum {
  int period = 0;
  std::vector<double> values;
};

/// Lattice samples of J with quadrature weights. Weights are dyadic rationals
/// (multiples of 2^-52) so that every summation order gives exactly 1.
class DiscreteKernel {
 public:
  DiscreteKernel() = default;
  DiscreteKernel(const Grid& grid, double support_radius, double alpha,
                 std::vector<Index> offsets, std::vector<double> weights);

  const Grid& grid() const { return grid_; }
  int dimension() const { return grid_.dimension(); }
  double spacing() const { return grid_.spacing(); }
  double alpha() const { return alpha_; }
  double support_radius() const { return support_radius_; }
  /// Largest |offset component| in lattice units.
  int reach() const { return reach_; }

  std::span<const Index> offsets() const { return offsets_; }
  std::span<const double> weights() const { return weights_; }
  /// Weight at an offset, zero outside the support.
  double weight_at(const Index& offset) const;
  /// Largest density value, weight / h^N.
  double max_density() const;
  /// (1/2N) sum w |o h|^2: the diffusivity the lattice operator actually has.
  double discrete_alpha() const;

  /// Smallest value of the lattice symbol sum_o w_o cos(theta . o), sampled
  /// on a uniform grid of [0, pi]^N.
  double symbol_min(int samples_per_axis = 33) const;

  /// Period of the zero-padded spectral lattice used for this grid.
  int spectral_period() const;
  /// Spectrum on the padded lattice, computed once on first use.
  const KernelSpectrum& spectrum() const;
  /// Spectrum on an arbitrary period (not cached).
  KernelSpectrum spectrum_on(int period) const;

  struct RowGroup {
    std::array<int, kMaxDim> lead{};  // offset along all but the last axis
    std::vector<std::pair<int, double>> taps;  // (last-axis shift, weight)
  };
  std::span<const RowGroup> row_groups() const { return groups_; }

 private:
  Grid grid_;
  double support_radius_ = 0.0;
  double alpha_ = 0.0;
  int reach_ = 0;
  std::vector<Index> offsets_;
  std::vector<double> weights_;
  std::vector<RowGroup> groups_;

  struct SpectrumCache {
    std::once_flag once;
    KernelSpectrum spectrum;
  };
  std::shared_ptr<SpectrumCache> cache_;
};

DiscreteKernel discretize(const KernelSpec& spec, const Grid& grid);

enum class ConvolutionMethod { automatic, direct, spectral };

/// Discrete convolution with zero extension outside the box.
Field convolve(const DiscreteKernel& dk, const Field& f,
               ConvolutionMethod method = ConvolutionMethod::automatic);

/// Row `row` (all but the last axis fixed) of K*in, written into out_row.
void convolve_row(const DiscreteKernel& dk, std::span<const double> in, std::size_t row,
                  std::span<double> out_row);
/// Same, computing only positions [x_begin, x_end) of the row.
void convolve_row(const DiscreteKernel& dk, std::span<const double> in, std::size_t row,
                  std::span<double> out_row, int x_begin, int x_end);

/// K*in evaluated at a single node.
double convolve_at(const DiscreteKernel& dk, std::span<const double> in, std::size_t node);

/// n-fold self-convolution of the kernel.
DiscreteKernel convolution_power(const DiscreteKernel& dk, int n);

/// Kernel weights laid out as a field centered at the origin node.
Field kernel_as_field(const DiscreteKernel& dk);

/// out = A u for the masked generator A = K - I (zero rows on holes).
void apply_generator(const DiscreteKernel& dk, const DomainMask& mask,
                     std::span<const double> u, std::span<double> out,
                     PadPolicy policy = PadPolicy::evolve);

inline constexpr std::size_t kDenseNodeCap = 4096;

/// Dense generator matrix, for oracle-scale checks only.
Eigen::MatrixXd assemble_dense(const DiscreteKernel& dk, const DomainMask& mask,
                               PadPolicy policy = PadPolicy::evolve,
                               std::size_t node_cap = kDenseNodeCap);

}  // namespace nldiff
