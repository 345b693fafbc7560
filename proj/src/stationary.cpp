#include "nldiff/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/numerics.hpp"

namespace nldiff {

double hole_circumradius(const DomainMask& mask) {
  const Grid& grid = mask.grid();
  double r2 = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.is_hole(i)) continue;
    r2 = std::max(r2, grid.radius_squared(i));
    any = true;
  }
  return any ? std::sqrt(r2) : 0.0;
}

std::vector<double> default_ball_radii(const DomainMask& mask, double support_radius) {
  const double r_max = mask.grid().extent() - support_radius;
  double r = hole_circumradius(mask) + 2.0 * support_radius;
  std::vector<double> radii;
  while (r < r_max) {
    radii.push_back(r);
    r *= 2.0;
  }
  radii.push_back(r_max);
  return radii;
}

namespace {

struct RowSpan {
  std::size_t row;
  int begin;
  int end;
};

// Rows of the grid that contain free nodes, with the bounding x-range.
std::vector<RowSpan> free_rows(const Grid& grid, const std::vector<std::uint8_t>& free) {
  const auto n = static_cast<std::size_t>(grid.points());
  std::vector<RowSpan> spans;
  for (std::size_t row = 0; row < grid.rows(); ++row) {
    int lo = -1, hi = -1;
    for (std::size_t x = 0; x < n; ++x) {
      if (!free[row * n + x]) continue;
      if (lo < 0) lo = static_cast<int>(x);
      hi = static_cast<int>(x) + 1;
    }
    if (lo >= 0) spans.push_back({row, lo, hi});
  }
  return spans;
}

double residual_on(const DiscreteKernel& dk, std::span<const double> phi,
                   const std::vector<std::uint8_t>& free, const std::vector<RowSpan>& spans) {
  const auto n = static_cast<std::size_t>(dk.grid().points());
  std::vector<double> tmp(n);
  double res = 0.0;
  for (const auto& s : spans) {
    convolve_row(dk, phi, s.row, tmp, s.begin, s.end);
    for (int x = s.begin; x < s.end; ++x) {
      const std::size_t i = s.row * n + static_cast<std::size_t>(x);
      if (free[i]) res = std::max(res, std::abs(tmp[static_cast<std::size_t>(x)] - phi[i]));
    }
  }
  return res;
}

// Flux estimate of psi = C r^{2-N} from consecutive radial bins.
struct FluxFit {
  double mu = 0.0;
  std::size_t bins = 0;
};

std::vector<RadialBin> bins_in_range(const std::vector<RadialBin>& all, FitRange range) {
  std::vector<RadialBin> out;
  for (const auto& b : all) {
    if (b.r_mean >= range.r_lo && b.r_mean <= range.r_hi) out.push_back(b);
  }
  return out;
}

Field radial_power(const Grid& grid, double power) {
  Field f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid.radius(i);
    f[i] = r > 0.0 ? std::pow(r, power) : 0.0;
  }
  return f;
}

void require_bins(std::size_t count, FitRange range) {
  if (count < 4) {
    std::ostringstream msg;
    msg << "fit range [" << range.r_lo << ", " << range.r_hi << "] holds " << count
        << " radial bins, at least 4 needed";
    throw Error(ErrorKind::range, msg.str());
  }
}

FluxFit flux_fit(const Field& psi, const DomainMask& mask, FitRange range, double bin_width) {
  const Grid& grid = psi.grid();
  const int dim = grid.dimension();
  const auto m = bins_in_range(radial_profile(psi, bin_width, mask), range);
  const auto g = bins_in_range(radial_profile(radial_power(grid, 2.0 - dim), bin_width, mask),
                               range);
  require_bins(m.size(), range);
  const double area = unit_sphere_area(dim);
  std::vector<double> inv_r, flux;
  for (std::size_t k = 0; k + 1 < m.size(); ++k) {
    const double dg = g[k + 1].mean - g[k].mean;
    if (dg == 0.0) continue;
    // psi = C g  =>  flux through a sphere = (2 - N) * area * C.
    const double c = (m[k + 1].mean - m[k].mean) / dg;
    const double rho = std::sqrt(m[k].r_mean * m[k + 1].r_mean);
    inv_r.push_back(1.0 / rho);
    flux.push_back((2.0 - dim) * area * c);
  }
  FluxFit out;
  out.bins = m.size();
  const LineFit fit = fit_line(inv_r, flux);
  out.mu = fit.intercept;
  return out;
}

}  // namespace

StationaryProfile solve_phi(const DiscreteKernel& dk, const DomainMask& mask,
                            const PhiSolveOptions& options) {
  const Grid& grid = dk.grid();
  if (!(grid == mask.grid())) throw Error(ErrorKind::shape, "solve_phi: mask grid differs");
  if (!mask.has_components()) {
    throw Error(ErrorKind::configuration, "solve_phi: mask has no component labels");
  }
  if (!(options.tolerance > 0.0)) {
    throw Error(ErrorKind::configuration, "solve_phi: tolerance must be positive");
  }
  std::vector<double> radii = options.radii;
  if (radii.empty()) radii = default_ball_radii(mask, dk.support_radius());
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] > radii[k - 1])) {
      throw Error(ErrorKind::configuration, "solve_phi: ball radii must increase");
    }
  }

  const auto n = static_cast<std::size_t>(grid.points());
  std::vector<double> phi(grid.size(), 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // The function is identically 0 on components not connected to infinity.
    if (mask.is_hole(i) || mask.in_bounded_component(i)) phi[i] = 0.0;
  }

  StationaryProfile profile;
  profile.ball_radii_used = radii;
  std::vector<double> previous;
  std::vector<std::uint8_t> free(grid.size());
  std::vector<double> tmp(n);
  std::vector<RowSpan> spans;

  for (const double radius : radii) {
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      free[i] = mask.is_exterior(i) && !mask.in_bounded_component(i) &&
                grid.radius_squared(i) < r2;
    }
    spans = free_rows(grid, free);
    previous = phi;

    BallStage stage;
    stage.radius = radius;
    double rate_mark = -1.0;
    std::vector<double> history;
    while (true) {
      double change = 0.0;
      for (const auto& s : spans) {
        convolve_row(dk, phi, s.row, tmp, s.begin, s.end);
        for (int x = s.begin; x < s.end; ++x) {
          const std::size_t i = s.row * n + static_cast<std::size_t>(x);
          if (!free[i]) continue;
          const double v = tmp[static_cast<std::size_t>(x)];
          if (options.check_monotone && v > phi[i]) profile.sweep_monotone = false;
          change = std::max(change, std::abs(phi[i] - v));
          phi[i] = v;
        }
      }
      ++stage.sweeps;
      stage.last_change = change;
      if (stage.sweeps % 1000 == 0) history.push_back(change);

      if (change < options.tolerance) {
        stage.residual = residual_on(dk, phi, free, spans);
        if (stage.residual <= options.tolerance) break;
      }
      bool hopeless = stage.sweeps >= options.max_sweeps;
      // Geometric-rate projection: give up early when the cap cannot be met.
      if (!hopeless && stage.sweeps % 500 == 0) {
        if (rate_mark > 0.0 && change > 0.0 && change < rate_mark) {
          const double rate = std::pow(change / rate_mark, 1.0 / 500.0);
          const double needed = std::log(options.tolerance / change) / std::log(rate);
          hopeless = static_cast<double>(stage.sweeps) + needed >
                     2.0 * static_cast<double>(options.max_sweeps);
        }
        rate_mark = change;
      }
      if (hopeless) {
        std::ostringstream msg;
        msg << "ball radius " << radius << " not converged after " << stage.sweeps
            << " sweeps; last change " << change << "; change every 1000 sweeps:";
        const std::size_t from = history.size() > 8 ? history.size() - 8 : 0;
        for (std::size_t k = from; k < history.size(); ++k) msg << ' ' << history[k];
        throw Error(ErrorKind::convergence, msg.str());
      }
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (phi[i] > previous[i]) profile.stage_monotone = false;
    }
    profile.stages.push_back(stage);
  }
  profile.residual = profile.stages.back().residual;
  profile.phi = Field(grid, std::move(phi));

  Field psi(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) psi[i] = 1.0 - profile.phi[i];
  profile.psi = psi;

  const FitRange range = default_fit_range(profile, mask);
  const double bw = 2.0 * grid.spacing();
  const bool range_ok =
      range.r_hi > range.r_lo &&
      bins_in_range(radial_profile(psi, bw, mask), range).size() >= 4;

  if (options.far_field_correction && range_ok) {
    // psi_n ~ A (r^{2-N} - n^{2-N}); phi / (1 + A n^{2-N}) removes the offset.
    const int dim = grid.dimension();
    const double a = flux_fit(psi, mask, range, bw).mu / ((2.0 - dim) * unit_sphere_area(dim));
    const double scale = 1.0 / (1.0 + a * std::pow(profile.largest_radius(), 2.0 - dim));
    if (scale > 0.0 && scale < 1.0) {
      profile.far_field_scale = scale;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        profile.phi[i] *= scale;
        profile.psi[i] = 1.0 - profile.phi[i];
      }
      const double r2 = profile.largest_radius() * profile.largest_radius();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        free[i] = mask.is_exterior(i) && !mask.in_bounded_component(i) &&
                  grid.radius_squared(i) < r2;
      }
      profile.residual = residual_on(dk, profile.phi.values(), free, free_rows(grid, free));
    }
  }

  if (range_ok) {
    const CstarEstimate est = estimate_cstar(profile, mask, range);
    profile.cstar_fit = est.cstar_fit;
    profile.cstar_flux = est.cstar_flux;
    profile.flux_mu = est.flux_mu;
    const DecaySlope slope = psi_decay_slope(profile, mask, range);
    profile.decay_slope_psi = slope.decays ? slope.slope : 0.0;
    profile.estimates_valid = true;
  }
  return profile;
}

FitRange default_fit_range(const StationaryProfile& profile, const DomainMask& mask) {
  return {2.0 * hole_circumradius(mask), 0.75 * profile.largest_radius()};
}

double flux_estimate(const Field& psi, const DomainMask& mask, FitRange range,
                     double bin_width) {
  return flux_fit(psi, mask, range, bin_width).mu;
}

namespace {

void validate_range(const StationaryProfile& profile, const DomainMask& mask, FitRange range) {
  if (range.r_hi > profile.largest_radius() + 1e-12) {
    throw Error(ErrorKind::range, "fit range exceeds the largest solved ball radius");
  }
  if (range.r_lo < 2.0 * hole_circumradius(mask) - 1e-12) {
    throw Error(ErrorKind::range, "fit range starts inside twice the hole circumradius");
  }
}

}  // namespace

CstarEstimate estimate_cstar(const StationaryProfile& profile, const DomainMask& mask,
                             FitRange range) {
  validate_range(profile, mask, range);
  const Grid& grid = profile.psi.grid();
  const int dim = grid.dimension();
  const double bw = 2.0 * grid.spacing();

  Field scaled(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    scaled[i] = profile.psi[i] * std::pow(grid.radius(i), dim - 2.0);
  }
  const auto bins = bins_in_range(radial_profile(scaled, bw, mask), range);
  require_bins(bins.size(), range);
  CompensatedSum sum;
  for (const auto& b : bins) sum.add(b.mean);

  CstarEstimate est;
  est.bins = bins.size();
  est.cstar_fit = sum.value() / static_cast<double>(bins.size());
  est.flux_mu = flux_fit(profile.psi, mask, range, bw).mu;
  est.cstar_flux = est.flux_mu / ((2.0 - dim) * unit_sphere_area(dim));
  return est;
}

DecaySlope psi_decay_slope(const StationaryProfile& profile, const DomainMask& mask,
                           FitRange range, double bin_width) {
  validate_range(profile, mask, range);
  const double bw = bin_width > 0.0 ? bin_width : 2.0 * profile.psi.grid().spacing();
  const auto bins = bins_in_range(radial_profile(profile.psi, bw, mask), range);
  require_bins(bins.size(), range);
  std::vector<double> r, m;
  for (const auto& b : bins) {
    if (!(b.mean > 0.0)) return {};
    r.push_back(b.r_mean);
    m.push_back(b.mean);
  }
  return {fit_power_law(r, m).slope, true};
}

Field discrete_laplacian(const Field& f) {
  const Grid& grid = f.grid();
  const int dim = grid.dimension();
  const int n = grid.points();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  Field out(grid);
  std::array<std::size_t, kMaxDim> stride{};
  std::size_t s = 1;
  for (int d = dim - 1; d >= 0; --d) {
    stride[d] = s;
    s *= static_cast<std::size_t>(n);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Index idx = grid.unflatten(i);
    bool edge = false;
    for (int d = 0; d < dim; ++d) edge = edge || idx[d] == 0 || idx[d] == n - 1;
    if (edge) continue;
    double acc = -2.0 * dim * f[i];
    for (int d = 0; d < dim; ++d) acc += f[i - stride[d]] + f[i + stride[d]];
    out[i] = acc * inv_h2;
  }
  return out;
}

double laplacian_decay_slope(const Field& f, const DomainMask& mask, FitRange range,
                             double bin_width) {
  const Grid& grid = f.grid();
  const double bw = bin_width > 0.0 ? bin_width : 2.0 * grid.spacing();
  const Field lap = discrete_laplacian(f);
  Field mag(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) mag[i] = std::abs(lap[i]);
  // Nodes next to a hole see the jump to psi = 1; the fit range keeps clear
  // of them.
  const auto bins = bins_in_range(radial_profile(mag, bw, mask), range);
  require_bins(bins.size(), range);
  std::vector<double> r, m;
  for (const auto& b : bins) {
    if (!(b.max > 0.0)) {
      throw Error(ErrorKind::range, "discrete Laplacian vanishes on part of the fit range");
    }
    r.push_back(b.r_mean);
    m.push_back(b.max);
  }
  return fit_power_law(r, m).slope;
}

double laplacian_decay_check(const StationaryProfile& profile, const DomainMask& mask,
                             FitRange range) {
  validate_range(profile, mask, range);
  return laplacian_decay_slope(profile.psi, mask, range);
}

double psi_bound_constant(const StationaryProfile& profile, const DomainMask& mask) {
  const Grid& grid = profile.psi.grid();
  const double p = (grid.dimension() - 2.0) / 2.0;
  double k = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.is_exterior(i) || mask.in_bounded_component(i)) continue;
    k = std::max(k, profile.psi[i] * std::pow(grid.radius_squared(i) + 1.0, p));
  }
  return k;
}

double nonlocal_energy(const Field& f, const DiscreteKernel& dk, const DomainMask& mask,
                       EnergyDomain domain) {
  const Grid& grid = f.grid();
  if (!(grid == dk.grid()) || !(grid == mask.grid())) {
    throw Error(ErrorKind::shape, "nonlocal_energy: grids differ");
  }
  const auto in_set = [&](std::size_t i) {
    return domain == EnergyDomain::box || mask.is_exterior(i);
  };
  // sum_{i,j} w (f_i - f_j)^2 / 2 = sum_i f_i (r_i f_i - (K f)_i) for the
  // restriction of f and K to the node set; r_i are restricted row sums.
  Field g(grid), ones(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!in_set(i)) continue;
    g[i] = f[i];
    ones[i] = 1.0;
  }
  const Field kg = convolve(dk, g, ConvolutionMethod::direct);
  const Field rows = convolve(dk, ones, ConvolutionMethod::direct);
  CompensatedSum sum;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!in_set(i)) continue;
    sum.add(f[i] * (rows[i] * f[i] - kg[i]));
  }
  return std::max(0.0, sum.value()) * grid.cell_volume();
}

double capacity_estimate(const StationaryProfile& profile, const DiscreteKernel& dk,
                         const DomainMask& mask) {
  Field extended = profile.psi;
  for (std::size_t i = 0; i < extended.size(); ++i) {
    if (mask.is_hole(i)) extended[i] = 1.0;
  }
  return nonlocal_energy(extended, dk, mask, EnergyDomain::box);
}

double lost_mass(const Field& u0, const StationaryProfile& profile, const DomainMask& mask) {
  require_same_grid(u0, profile.phi, "lost_mass");
  for (std::size_t i = 0; i < u0.size(); ++i) {
    if (u0[i] < 0.0) throw Error(ErrorKind::data, "initial data must be nonnegative");
    if (mask.is_hole(i) && u0[i] != 0.0) {
      throw Error(ErrorKind::data, "initial data must vanish on the holes");
    }
  }
  return weighted_mass(u0, profile.psi);
}

ComponentMode bounded_component_mode(const DiscreteKernel& dk, const DomainMask& mask,
                                     int component_id, double tolerance,
                                     std::size_t max_iterations) {
  if (!mask.is_bounded_component(component_id) || component_id >= mask.component_count()) {
    throw Error(ErrorKind::configuration,
                "component " + std::to_string(component_id) + " is not a bounded component");
  }
  const Grid& grid = dk.grid();
  const std::vector<std::size_t> nodes = mask.component_nodes(component_id);
  std::vector<double> full(grid.size(), 0.0);
  std::vector<double> f(nodes.size(), 1.0), next(nodes.size());

  ComponentMode out;
  out.component_id = component_id;
  double rho = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    for (std::size_t k = 0; k < nodes.size(); ++k) full[nodes[k]] = f[k];
    CompensatedSum num, den;
    double peak = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      next[k] = convolve_at(dk, full, nodes[k]);
      num.add(f[k] * next[k]);
      den.add(f[k] * f[k]);
      peak = std::max(peak, next[k]);
    }
    if (!(peak > 0.0)) throw Error(ErrorKind::convergence, "power iteration collapsed to zero");
    rho = num.value() / den.value();
    double change = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      next[k] /= peak;
      change = std::max(change, std::abs(next[k] - f[k]));
    }
    f.swap(next);
    out.iterations = it;
    if (change <= tolerance) {
      out.rho = rho;
      out.lambda1 = 1.0 - rho;
      out.mode = Field(grid);
      for (std::size_t k = 0; k < nodes.size(); ++k) out.mode[nodes[k]] = f[k];
      return out;
    }
  }
  throw Error(ErrorKind::convergence, "power iteration stagnated after " +
                                          std::to_string(max_iterations) + " iterations");
}

}  // namespace nldiff
