#include "nldiff/kernel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/numerics.hpp"
#include "nldiff/spectral.hpp"

namespace nldiff {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::smooth_bump: return "smooth_bump";
    case KernelFamily::polynomial_compact: return "polynomial_compact";
  }
  return "smooth_bump";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "smooth_bump") return KernelFamily::smooth_bump;
  if (name == "polynomial_compact") return KernelFamily::polynomial_compact;
  throw Error(ErrorKind::configuration, "unknown kernel family '" + std::string(name) +
                                            "' (smooth_bump, polynomial_compact)");
}

double kernel_profile(KernelFamily family, double s) {
  if (s < 0.0) s = -s;
  if (s >= 1.0) return 0.0;
  switch (family) {
    case KernelFamily::smooth_bump: return std::exp(-1.0 / (1.0 - s * s));
    case KernelFamily::polynomial_compact: {
      const double q = 1.0 - s * s;
      return q * q * q * q;
    }
  }
  return 0.0;
}

double KernelSpec::value_at_radius(double r) const {
  return normalization * kernel_profile(family, r / support_radius);
}

double unit_sphere_area(int dimension) {
  const double n = dimension;
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

double radial_moment(const std::function<double(double)>& profile, double radius,
                     int dimension, int power, double tolerance) {
  const int exponent = dimension - 1 + power;
  const auto integrand = [&](double r) { return profile(r) * std::pow(r, exponent); };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      integrand, 0.0, radius, 20, tolerance, &error);
  if (!(error <= 10.0 * tolerance * std::abs(value)) && error > 1e-300) {
    std::ostringstream msg;
    msg << "radial quadrature did not converge: achieved relative error "
        << error / std::abs(value) << " against requested " << tolerance;
    throw Error(ErrorKind::numerical, msg.str());
  }
  return unit_sphere_area(dimension) * value;
}

double diffusivity_of_profile(const std::function<double(double)>& profile, double radius,
                              int dimension) {
  const double mass = radial_moment(profile, radius, dimension, 0);
  const double second = radial_moment(profile, radius, dimension, 2);
  return second / (2.0 * dimension * mass);
}

KernelSpec make_kernel(KernelFamily family, double support_radius, int dimension) {
  if (dimension < 3) {
    throw Error(ErrorKind::unsupported_dimension,
                "kernels need dimension N >= 3 (got " + std::to_string(dimension) + ")");
  }
  if (dimension > kMaxDim) {
    throw Error(ErrorKind::unsupported_dimension,
                "dimension " + std::to_string(dimension) + " exceeds the lattice limit");
  }
  if (!(support_radius > 0.0)) {
    throw Error(ErrorKind::configuration, "kernel support radius must be positive");
  }
  KernelSpec spec{family, support_radius, dimension, 1.0};
  const auto profile = [&](double r) { return kernel_profile(family, r / support_radius); };
  spec.normalization = 1.0 / radial_moment(profile, support_radius, dimension, 0);
  return spec;
}

KernelSpec make_kernel(std::string_view family, double support_radius, int dimension) {
  return make_kernel(parse_kernel_family(family), support_radius, dimension);
}

double diffusivity(const KernelSpec& spec) {
  const auto profile = [&](double r) { return spec.value_at_radius(r); };
  const double a = diffusivity_of_profile(profile, spec.support_radius, spec.dimension);
  if (!(a > 0.0)) throw Error(ErrorKind::numerical, "non-positive diffusivity");
  return a;
}

namespace {

constexpr double kDyadicScale = 4503599627370496.0;  // 2^52

/// Rescales to unit sum, rounds to multiples of 2^-52 and puts the rounding
/// remainder on the center tap so the sum is exactly 1 in any order.
void normalize_dyadic(std::vector<double>& w, std::size_t center) {
  CompensatedSum total;
  for (double v : w) total.add(v);
  const double s = total.value();
  double others = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (k == center) continue;
    w[k] = std::nearbyint(w[k] / s * kDyadicScale) / kDyadicScale;
    others += w[k];
  }
  w[center] = 1.0 - others;
}

bool is_origin(const Index& o, int dim) {
  for (int d = 0; d < dim; ++d) {
    if (o[d] != 0) return false;
  }
  return true;
}

}  // namespace

DiscreteKernel::DiscreteKernel(const Grid& grid, double support_radius, double alpha,
                               std::vector<Index> offsets, std::vector<double> weights)
    : grid_(grid),
      support_radius_(support_radius),
      alpha_(alpha),
      offsets_(std::move(offsets)),
      weights_(std::move(weights)),
      cache_(std::make_shared<SpectrumCache>()) {
  const int dim = grid_.dimension();
  reach_ = 0;
  std::map<std::array<int, kMaxDim>, std::size_t> group_of;
  for (std::size_t k = 0; k < offsets_.size(); ++k) {
    std::array<int, kMaxDim> lead{};
    for (int d = 0; d < dim; ++d) reach_ = std::max(reach_, std::abs(offsets_[k][d]));
    for (int d = 0; d + 1 < dim; ++d) lead[d] = offsets_[k][d];
    auto [it, inserted] = group_of.try_emplace(lead, groups_.size());
    if (inserted) groups_.push_back(RowGroup{lead, {}});
    groups_[it->second].taps.emplace_back(offsets_[k][dim - 1], weights_[k]);
  }
}

double DiscreteKernel::weight_at(const Index& offset) const {
  for (std::size_t k = 0; k < offsets_.size(); ++k) {
    if (offsets_[k] == offset) return weights_[k];
  }
  return 0.0;
}

double DiscreteKernel::max_density() const {
  double m = 0.0;
  for (double w : weights_) m = std::max(m, w);
  return m / grid_.cell_volume();
}

double DiscreteKernel::discrete_alpha() const {
  const int dim = dimension();
  const double h2 = spacing() * spacing();
  CompensatedSum s;
  for (std::size_t k = 0; k < offsets_.size(); ++k) {
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) r2 += static_cast<double>(offsets_[k][d]) * offsets_[k][d];
    s.add(weights_[k] * r2 * h2);
  }
  return s.value() / (2.0 * dim);
}

double DiscreteKernel::symbol_min(int samples_per_axis) const {
  const int dim = dimension();
  const int s = std::max(samples_per_axis, 2);
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(s);
  const double step = std::numbers::pi / (s - 1);
  double lowest = 1.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::array<double, kMaxDim> theta{};
    std::size_t r = flat;
    for (int d = dim - 1; d >= 0; --d) {
      theta[d] = step * static_cast<double>(r % static_cast<std::size_t>(s));
      r /= static_cast<std::size_t>(s);
    }
    double v = 0.0;
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
      double phase = 0.0;
      for (int d = 0; d < dim; ++d) phase += theta[d] * offsets_[k][d];
      v += weights_[k] * std::cos(phase);
    }
    lowest = std::min(lowest, v);
  }
  return lowest;
}

int DiscreteKernel::spectral_period() const { return next_fast_size(2 * grid_.points()); }

KernelSpectrum DiscreteKernel::spectrum_on(int period) const {
  if (2 * reach_ + 1 > period) {
    throw Error(ErrorKind::resolution, "kernel support does not fit the spectral period");
  }
  RealFft fft(dimension(), period);
  auto real = fft.real();
  std::fill(real.begin(), real.end(), 0.0);
  for (std::size_t k = 0; k < offsets_.size(); ++k) real[fft.real_index(offsets_[k])] = weights_[k];
  fft.forward();
  KernelSpectrum out;
  out.period = period;
  out.values.resize(fft.complex_size());
  auto spec = fft.spectrum();
  for (std::size_t k = 0; k < spec.size(); ++k) out.values[k] = spec[k].real();
  // The zero-frequency bin is the weight sum, which is exactly 1.
  out.values[0] = 1.0;
  return out;
}

const KernelSpectrum& DiscreteKernel::spectrum() const {
  std::call_once(cache_->once, [&] { cache_->spectrum = spectrum_on(spectral_period()); });
  return cache_->spectrum;
}

DiscreteKernel discretize(const KernelSpec& spec, const Grid& grid) {
  const int dim = grid.dimension();
  if (dim != spec.dimension) {
    throw Error(ErrorKind::shape, "kernel and grid dimensions differ");
  }
  const double h = grid.spacing();
  const int reach = static_cast<int>(std::ceil(spec.support_radius / h));
  if (2 * reach + 1 > grid.points()) {
    throw Error(ErrorKind::resolution, "kernel support wider than the grid");
  }
  std::vector<Index> offsets;
  std::vector<double> weights;
  std::size_t center = 0;
  Index o{};
  const auto enumerate = [&](auto&& self, int axis) -> void {
    if (axis == dim) {
      double r2 = 0.0;
      for (int d = 0; d < dim; ++d) r2 += static_cast<double>(o[d]) * o[d];
      const double value = spec.value_at_radius(std::sqrt(r2) * h);
      if (value > 0.0) {
        if (is_origin(o, dim)) center = offsets.size();
        offsets.push_back(o);
        weights.push_back(value * grid.cell_volume());
      }
      return;
    }
    for (int k = -reach; k <= reach; ++k) {
      o[axis] = k;
      self(self, axis + 1);
    }
  };
  enumerate(enumerate, 0);
  normalize_dyadic(weights, center);

  // Rounding can zero the outermost taps; drop them.
  std::vector<Index> kept_offsets;
  std::vector<double> kept_weights;
  int along_axis = 0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    kept_offsets.push_back(offsets[k]);
    kept_weights.push_back(weights[k]);
    bool on_axis = true;
    for (int d = 1; d < dim; ++d) on_axis = on_axis && offsets[k][d] == 0;
    if (on_axis) ++along_axis;
  }
  if (along_axis < 3) {
    std::ostringstream msg;
    msg << "kernel radius " << spec.support_radius << " is under-resolved at spacing " << h
        << " (" << along_axis << " nonzero taps per axis, need at least 3)";
    throw Error(ErrorKind::resolution, msg.str());
  }
  return DiscreteKernel(grid, spec.support_radius, diffusivity(spec), std::move(kept_offsets),
                        std::move(kept_weights));
}

void convolve_row(const DiscreteKernel& dk, std::span<const double> in, std::size_t row,
                  std::span<double> out_row) {
  convolve_row(dk, in, row, out_row, 0, dk.grid().points());
}

void convolve_row(const DiscreteKernel& dk, std::span<const double> in, std::size_t row,
                  std::span<double> out_row, int x_begin, int x_end) {
  const Grid& grid = dk.grid();
  const int n = grid.points();
  const int dim = grid.dimension();
  std::fill(out_row.begin() + x_begin, out_row.begin() + x_end, 0.0);

  std::array<int, kMaxDim> rc{};
  std::size_t r = row;
  for (int d = dim - 2; d >= 0; --d) {
    rc[d] = static_cast<int>(r % static_cast<std::size_t>(n));
    r /= static_cast<std::size_t>(n);
  }
  double* out = out_row.data();
  for (const auto& group : dk.row_groups()) {
    std::size_t src_row = 0;
    bool inside = true;
    for (int d = 0; d + 1 < dim; ++d) {
      const int c = rc[d] + group.lead[d];
      if (c < 0 || c >= n) {
        inside = false;
        break;
      }
      src_row = src_row * static_cast<std::size_t>(n) + static_cast<std::size_t>(c);
    }
    if (!inside) continue;
    const double* src = in.data() + src_row * static_cast<std::size_t>(n);
    for (const auto& [shift, w] : group.taps) {
      const int x0 = std::max(x_begin, -shift);
      const int x1 = std::min(x_end, n - shift);
      const double* s = src + shift;
      for (int x = x0; x < x1; ++x) out[x] += w * s[x];
    }
  }
}

double convolve_at(const DiscreteKernel& dk, std::span<const double> in, std::size_t node) {
  const Grid& grid = dk.grid();
  const int n = grid.points();
  const int dim = grid.dimension();
  const Index c = grid.unflatten(node);
  const auto offsets = dk.offsets();
  const auto weights = dk.weights();
  double acc = 0.0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    Index q{};
    bool inside = true;
    for (int d = 0; d < dim; ++d) {
      q[d] = c[d] + offsets[k][d];
      if (q[d] < 0 || q[d] >= n) {
        inside = false;
        break;
      }
    }
    if (inside) acc += weights[k] * in[grid.flatten(q)];
  }
  return acc;
}

namespace {

Field convolve_direct(const DiscreteKernel& dk, const Field& f) {
  const Grid& grid = f.grid();
  const auto n = static_cast<std::size_t>(grid.points());
  Field out(grid);
  auto values = out.values();
  for (std::size_t row = 0; row < grid.rows(); ++row) {
    convolve_row(dk, f.values(), row, values.subspan(row * n, n));
  }
  return out;
}

Field convolve_spectral(const DiscreteKernel& dk, const Field& f) {
  const Grid& grid = f.grid();
  const KernelSpectrum& spec = dk.spectrum();
  RealFft fft(grid.dimension(), spec.period);
  auto real = fft.real();
  std::fill(real.begin(), real.end(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) real[fft.real_index(grid.unflatten(i))] = f[i];
  fft.forward();
  auto s = fft.spectrum();
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= spec.values[k];
  fft.inverse();
  const double scale = 1.0 / static_cast<double>(fft.real_size());
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[i] = real[fft.real_index(grid.unflatten(i))] * scale;
  }
  return out;
}

}  // namespace

Field convolve(const DiscreteKernel& dk, const Field& f, ConvolutionMethod method) {
  if (!(f.grid() == dk.grid())) {
    throw Error(ErrorKind::shape, "convolve: field grid differs from the kernel's grid");
  }
  if (method == ConvolutionMethod::automatic) {
    method = dk.offsets().size() <= 400 ? ConvolutionMethod::direct
                                        : ConvolutionMethod::spectral;
  }
  Field out = method == ConvolutionMethod::direct ? convolve_direct(dk, f)
                                                  : convolve_spectral(dk, f);
  out.set_time_tag(f.time_tag());
  return out;
}

Field kernel_as_field(const DiscreteKernel& dk) {
  const Grid& grid = dk.grid();
  Field out(grid);
  const int c = grid.center_index();
  const auto offsets = dk.offsets();
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    Index idx{};
    for (int d = 0; d < grid.dimension(); ++d) {
      idx[d] = c + offsets[k][d];
      if (idx[d] < 0 || idx[d] >= grid.points()) {
        throw Error(ErrorKind::resolution, "kernel does not fit the grid");
      }
    }
    out[grid.flatten(idx)] = dk.weights()[k];
  }
  return out;
}

DiscreteKernel convolution_power(const DiscreteKernel& dk, int n) {
  if (n < 1) throw Error(ErrorKind::domain, "convolution power needs n >= 1");
  if (n == 1) return dk;
  const int dim = dk.dimension();
  const int reach = n * dk.reach();
  const int half = (dk.spectral_period() - 1) / 2;
  if (reach > half) {
    std::ostringstream msg;
    msg << "support of J^*" << n << " (" << reach << " nodes) exceeds the padded box ("
        << half << " nodes); enlarge grid.extent or grid.points";
    throw Error(ErrorKind::resolution, msg.str());
  }
  const int period = next_fast_size(2 * reach + 1);
  RealFft fft(dim, period);
  auto real = fft.real();
  std::fill(real.begin(), real.end(), 0.0);
  const auto offsets = dk.offsets();
  for (std::size_t k = 0; k < offsets.size(); ++k) real[fft.real_index(offsets[k])] = dk.weights()[k];
  fft.forward();
  for (auto& c : fft.spectrum()) c = std::pow(c.real(), n);
  fft.inverse();
  const double scale = 1.0 / static_cast<double>(fft.real_size());

  double peak = 0.0;
  for (double v : real) peak = std::max(peak, v * scale);
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * peak;

  std::vector<Index> out_offsets;
  std::vector<double> out_weights;
  std::size_t center = 0;
  Index o{};
  const auto enumerate = [&](auto&& self, int axis) -> void {
    if (axis == dim) {
      Index neg{};
      for (int d = 0; d < dim; ++d) neg[d] = -o[d];
      // Average with the mirrored tap so FFT noise cannot break symmetry.
      const double v =
          0.5 * (real[fft.real_index(o)] + real[fft.real_index(neg)]) * scale;
      if (v > floor) {
        if (is_origin(o, dim)) center = out_offsets.size();
        out_offsets.push_back(o);
        out_weights.push_back(v);
      }
      return;
    }
    for (int k = -reach; k <= reach; ++k) {
      o[axis] = k;
      self(self, axis + 1);
    }
  };
  enumerate(enumerate, 0);
  normalize_dyadic(out_weights, center);
  std::vector<Index> kept_offsets;
  std::vector<double> kept_weights;
  for (std::size_t k = 0; k < out_offsets.size(); ++k) {
    if (out_weights[k] > 0.0) {
      kept_offsets.push_back(out_offsets[k]);
      kept_weights.push_back(out_weights[k]);
    }
  }
  return DiscreteKernel(dk.grid(), n * dk.support_radius(), n * dk.alpha(),
                        std::move(kept_offsets), std::move(kept_weights));
}

void apply_generator(const DiscreteKernel& dk, const DomainMask& mask,
                     std::span<const double> u, std::span<double> out, PadPolicy policy) {
  const Grid& grid = dk.grid();
  const auto n = static_cast<std::size_t>(grid.points());
  std::vector<double> interior;
  std::span<const double> src = u;
  if (policy == PadPolicy::sink) {
    interior.assign(u.begin(), u.end());
    for (std::size_t i = 0; i < interior.size(); ++i) {
      if (!mask.is_exterior(i)) interior[i] = 0.0;
    }
    src = interior;
  }
  for (std::size_t row = 0; row < grid.rows(); ++row) {
    auto out_row = out.subspan(row * n, n);
    convolve_row(dk, src, row, out_row);
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t i = row * n + x;
      switch (mask.at(i)) {
        case NodeClass::hole: out_row[x] = 0.0; break;
        case NodeClass::exterior: out_row[x] -= u[i]; break;
        case NodeClass::outer_pad:
          if (policy == PadPolicy::evolve) out_row[x] -= u[i];
          break;
      }
    }
  }
}

Eigen::MatrixXd assemble_dense(const DiscreteKernel& dk, const DomainMask& mask,
                               PadPolicy policy, std::size_t node_cap) {
  const Grid& grid = dk.grid();
  if (grid.size() > node_cap) {
    throw Error(ErrorKind::oracle_scale, "dense generator limited to " +
                                             std::to_string(node_cap) + " nodes, grid has " +
                                             std::to_string(grid.size()));
  }
  const int dim = grid.dimension();
  const int n = grid.points();
  const auto size = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  const auto offsets = dk.offsets();
  const auto weights = dk.weights();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask.is_hole(i)) continue;
    const Index c = grid.unflatten(i);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      Index q{};
      bool inside = true;
      for (int d = 0; d < dim; ++d) {
        q[d] = c[d] + offsets[k][d];
        if (q[d] < 0 || q[d] >= n) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      const std::size_t j = grid.flatten(q);
      if (policy == PadPolicy::sink && !mask.is_exterior(j)) continue;
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += weights[k];
    }
    if (mask.is_exterior(i) || policy == PadPolicy::evolve) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= 1.0;
    }
  }
  return a;
}

}  // namespace nldiff
