#include "nldiff/fundsol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/numerics.hpp"
#include "nldiff/spectral.hpp"

namespace nldiff {

namespace {

// Largest real FFT buffer the series path may allocate.
constexpr std::size_t kSeriesElementCap = std::size_t{1} << 27;

void require_positive_time(double t) {
  if (!(t > 0.0)) throw Error(ErrorKind::domain, "omega needs t > 0");
}

// Copies the box window of a periodic real array (origin at index 0) into a
// density field. Offsets beyond half a period are left at zero instead of
// picking up a periodic image.
Field box_window(const Grid& grid, const RealFft& fft, std::span<const double> real,
                 double scale) {
  Field out(grid);
  const int c = grid.center_index();
  const int half = (fft.period() - 1) / 2;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Index off = grid.unflatten(i);
    bool inside = true;
    for (int d = 0; d < grid.dimension(); ++d) {
      off[d] -= c;
      inside = inside && std::abs(off[d]) <= half;
    }
    if (inside) out[i] = real[fft.real_index(off)] * scale;
  }
  return out;
}

double periodic_sum(std::span<const double> real) {
  CompensatedSum s;
  for (double v : real) s.add(v);
  return s.value();
}

}  // namespace

OmegaSlice omega_spectral(const DiscreteKernel& dk, double t) {
  require_positive_time(t);
  const Grid& grid = dk.grid();
  const KernelSpectrum& spec = dk.spectrum();
  RealFft fft(grid.dimension(), spec.period);
  auto hat = fft.spectrum();
  const double decay = std::exp(-t);
  for (std::size_t k = 0; k < hat.size(); ++k) {
    const double jt = spec.values[k] * t;
    // Past ~700 the split form overflows; the difference form loses nothing there.
    const double v = jt < 700.0 ? decay * std::expm1(jt) : std::exp(jt - t) - decay;
    hat[k] = {v, 0.0};
  }
  fft.inverse();
  auto real = fft.real();
  const double norm = 1.0 / static_cast<double>(fft.real_size());
  for (double& v : real) v *= norm;

  OmegaSlice out;
  out.t = t;
  out.method = OmegaMethod::spectral;
  out.periodic_mass = periodic_sum(real);
  out.field = box_window(grid, fft, real, 1.0 / grid.cell_volume());
  out.field.set_time_tag(t);
  return out;
}

int poisson_terms(double t, double tolerance) {
  // Tail after n terms: e^{-t} sum_{m>n} t^m / m!.
  double term = std::exp(-t);  // m = 0
  double cumulative = term;
  int n = 0;
  while (1.0 - cumulative >= tolerance || n < 1) {
    ++n;
    term *= t / n;
    cumulative += term;
    // Once terms decrease the remaining tail is below term * t / (n + 1 - t).
    if (n + 1 > t && term * t / (n + 1 - t) < tolerance) break;
    if (n > 100000) throw Error(ErrorKind::numerical, "Poisson tail did not converge");
  }
  return n;
}

OmegaSlice omega_series(const DiscreteKernel& dk, double t, double tolerance, int max_terms) {
  require_positive_time(t);
  const Grid& grid = dk.grid();
  const int dim = grid.dimension();
  const int terms = max_terms > 0 ? max_terms : poisson_terms(t, tolerance);
  const int period = next_fast_size(2 * terms * dk.reach() + 1);
  std::size_t elements = 1;
  for (int d = 0; d < dim; ++d) elements *= static_cast<std::size_t>(period);
  if (elements > kSeriesElementCap || 2 * dk.reach() + 1 > period) {
    std::ostringstream msg;
    msg << "series for t = " << t << " needs " << terms << " terms and period " << period
        << ", beyond the supported size; lower t or coarsen the grid";
    throw Error(ErrorKind::resolution, msg.str());
  }

  RealFft fft(dim, period);
  auto real = fft.real();
  std::fill(real.begin(), real.end(), 0.0);
  const auto offsets = dk.offsets();
  const auto weights = dk.weights();
  for (std::size_t k = 0; k < offsets.size(); ++k) real[fft.real_index(offsets[k])] = weights[k];
  std::vector<double> power(real.begin(), real.end());
  fft.forward();
  const std::vector<std::complex<double>> jhat(fft.spectrum().begin(), fft.spectrum().end());

  std::vector<double> acc(power.size(), 0.0);
  const double norm = 1.0 / static_cast<double>(fft.real_size());
  for (int n = 1; n <= terms; ++n) {
    if (n > 1) {
      std::copy(power.begin(), power.end(), real.begin());
      fft.forward();
      auto hat = fft.spectrum();
      for (std::size_t k = 0; k < hat.size(); ++k) hat[k] *= jhat[k];
      fft.inverse();
      for (std::size_t i = 0; i < power.size(); ++i) power[i] = real[i] * norm;
    }
    const double c = std::exp(-t + n * std::log(t) - std::lgamma(n + 1.0));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c * power[i];
  }

  OmegaSlice out;
  out.t = t;
  out.method = OmegaMethod::series;
  out.series_terms = terms;
  out.periodic_mass = periodic_sum(acc);
  out.field = box_window(grid, fft, acc, 1.0 / grid.cell_volume());
  out.field.set_time_tag(t);
  return out;
}

Field gamma_alpha(const Grid& grid, double t, double alpha) {
  if (!(t > 0.0) || !(alpha > 0.0)) {
    throw Error(ErrorKind::domain, "gamma_alpha needs t > 0 and alpha > 0");
  }
  const double a = 4.0 * alpha * t;
  const double peak = std::pow(std::numbers::pi * a, -0.5 * grid.dimension());
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[i] = peak * std::exp(-grid.radius_squared(i) / a);
  }
  out.set_time_tag(t);
  return out;
}

namespace {

bool interior_node(const Grid& grid, std::size_t i, double margin) {
  const Point x = grid.position(i);
  for (int d = 0; d < grid.dimension(); ++d) {
    if (std::abs(x[d]) > grid.extent() - margin) return false;
  }
  return true;
}

}  // namespace

double omega_residual(const DiscreteKernel& dk, double t, double dt_fd, bool include_forcing) {
  if (!(dt_fd > 0.0) || !(t > dt_fd)) {
    throw Error(ErrorKind::domain, "omega_residual needs t > dt_fd > 0");
  }
  const Grid& grid = dk.grid();
  const Field before = omega_spectral(dk, t - dt_fd).field;
  const Field after = omega_spectral(dk, t + dt_fd).field;
  const Field now = omega_spectral(dk, t).field;
  const Field k_now = convolve(dk, now);
  const Field jfield = kernel_as_field(dk);
  const double forcing = include_forcing ? std::exp(-t) / grid.cell_volume() : 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!interior_node(grid, i, dk.support_radius())) continue;
    const double dt_omega = (after[i] - before[i]) / (2.0 * dt_fd);
    const double rhs = k_now[i] - now[i] + forcing * jfield[i];
    worst = std::max(worst, std::abs(dt_omega - rhs));
  }
  return worst;
}

std::vector<OmegaEstimateRow> check_omega_estimates(const DiscreteKernel& dk,
                                                    const std::vector<double>& times,
                                                    double alpha) {
  const Grid& grid = dk.grid();
  const int dim = grid.dimension();
  const int n = grid.points();
  std::array<std::size_t, kMaxDim> stride{};
  std::size_t s = 1;
  for (int d = dim - 1; d >= 0; --d) {
    stride[d] = s;
    s *= static_cast<std::size_t>(n);
  }
  std::vector<OmegaEstimateRow> rows;
  for (double t : times) {
    const OmegaSlice omega = omega_spectral(dk, t);
    const Field gamma = gamma_alpha(grid, t, alpha);
    const Field& w = omega.field;
    OmegaEstimateRow row;
    row.t = t;
    row.integral = integrate(w);
    row.min = w.min();
    row.sup = w.max();
    CompensatedSum abs_sum;
    double gap = 0.0, tail = 0.0, grad = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      abs_sum.add(std::abs(w[i]));
      gap = std::max(gap, std::abs(w[i] - gamma[i]));
      const double r2 = grid.radius_squared(i);
      if (r2 >= 4.0) tail = std::max(tail, std::abs(w[i]) * std::pow(r2, 0.5 * (dim + 2)) / t);
      const Index idx = grid.unflatten(i);
      for (int d = 0; d < dim; ++d) {
        if (idx[d] == 0 || idx[d] == n - 1) continue;
        const std::size_t lo = i - stride[d], hi = i + stride[d];
        const double diff = ((w[hi] - gamma[hi]) - (w[lo] - gamma[lo])) / (2.0 * grid.spacing());
        grad = std::max(grad, std::abs(diff));
      }
    }
    row.abs_integral = abs_sum.value() * grid.cell_volume();
    row.gaussian_gap = std::pow(t, 0.5 * dim) * gap;
    row.tail_constant = tail;
    row.gradient_gap = std::pow(t, 0.5 * (dim + 1)) * grad;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nldiff
