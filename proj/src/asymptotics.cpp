#include "nldiff/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/fundsol.hpp"
#include "nldiff/numerics.hpp"

namespace nldiff {

double conservation_drift(const MetricsSeries& series) {
  if (series.rows.size() < 2) {
    throw Error(ErrorKind::degenerate, "conservation drift needs at least two rows");
  }
  const double w0 = series.rows.front().weighted_mass;
  if (w0 == 0.0) throw Error(ErrorKind::degenerate, "initial weighted mass is zero");
  double drift = 0.0;
  for (const auto& row : series.rows) {
    drift = std::max(drift, std::abs(row.weighted_mass - w0) / std::abs(w0));
  }
  return drift;
}

double predicted_mass_prefactor(double cstar, double mstar, double alpha, int dimension) {
  // int (4 pi a)^{-N/2} e^{-r^2/4a} r^{2-N} dx = (4 pi a)^{-N/2} |S^{N-1}| 2a.
  const double integral = std::pow(4.0 * std::numbers::pi * alpha, -0.5 * dimension) *
                          unit_sphere_area(dimension) * 2.0 * alpha;
  return cstar * mstar * integral;
}

MassDecayFit mass_decay_fit(const MetricsSeries& series, double mstar, double cstar,
                            double alpha, int dimension, double noise) {
  if (series.rows.empty()) throw Error(ErrorKind::degenerate, "empty metrics series");
  MassDecayFit fit;
  fit.k_predicted = predicted_mass_prefactor(cstar, mstar, alpha, dimension);
  const double t_end = series.rows.back().t;
  fit.t_hi = t_end;
  fit.t_lo = t_end / 10.0;
  std::vector<double> t, excess;
  for (const auto& row : series.rows) {
    if (row.t <= 0.0) continue;
    const double e = row.mass - mstar;
    if (!(e > 0.0)) fit.excess_positive = false;
    if (row.t < fit.t_lo * (1.0 - 1e-12)) continue;
    if (!(e > 10.0 * noise) || !(e > 0.0)) {
      std::ostringstream msg;
      msg << "M(t) - M* = " << e << " at t = " << row.t << " is below the noise floor "
          << 10.0 * noise << "; run longer or increase M*";
      throw Error(ErrorKind::signal, msg.str());
    }
    t.push_back(row.t);
    excess.push_back(e);
  }
  if (t.size() < 2) throw Error(ErrorKind::degenerate, "fewer than two rows in the last decade");
  const LineFit line = fit_power_law(t, excess);
  fit.slope = line.slope;
  fit.points = t.size();
  fit.k_measured = excess.back() * std::pow(t.back(), 0.5 * (dimension - 2));
  return fit;
}

namespace {

double time_scale(double t, int dim) { return std::pow(t, 0.5 * dim); }

void require_region(bool any, const char* which, double delta, double t) {
  if (!any) {
    std::ostringstream msg;
    msg << which << " region is empty for delta = " << delta << ", t = " << t;
    throw Error(ErrorKind::range, msg.str());
  }
}

}  // namespace

double outer_error(const Field& u, double t, double mstar, double alpha, double delta,
                   const DomainMask& mask, const Field* phi) {
  const Grid& grid = u.grid();
  const Field gamma = gamma_alpha(grid, t, alpha);
  const double limit = delta * t;
  double worst = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask.is_pad(i) || grid.radius_squared(i) < limit) continue;
    any = true;
    const double ansatz = mstar * gamma[i] * (phi != nullptr ? (*phi)[i] : 1.0);
    worst = std::max(worst, std::abs(u[i] - ansatz));
  }
  require_region(any, "outer", delta, t);
  return time_scale(t, grid.dimension()) * worst;
}

double inner_error(const Field& u, double t, double mstar, const Field& phi, double alpha,
                   double delta, const DomainMask& mask) {
  const Grid& grid = u.grid();
  const Field gamma = gamma_alpha(grid, t, alpha);
  const double limit = delta * t;
  double worst = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.is_exterior(i) || grid.radius_squared(i) >= limit) continue;
    any = true;
    worst = std::max(worst, std::abs(u[i] - mstar * phi[i] * gamma[i]));
  }
  require_region(any, "inner", delta, t);
  return time_scale(t, grid.dimension()) * worst;
}

double global_error(const Field& u, double t, double mstar, const Field& phi, double alpha,
                    const DomainMask& mask) {
  const Grid& grid = u.grid();
  const Field gamma = gamma_alpha(grid, t, alpha);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask.is_pad(i)) continue;
    worst = std::max(worst, std::abs(u[i] - mstar * phi[i] * gamma[i]));
  }
  return time_scale(t, grid.dimension()) * worst;
}

double compact_set_deviation(const Field& u, double t, double mstar, const Field& phi,
                             double alpha, double radius, const DomainMask& mask) {
  const Grid& grid = u.grid();
  const double level =
      mstar * std::pow(4.0 * std::numbers::pi * alpha, -0.5 * grid.dimension());
  const double ts = time_scale(t, grid.dimension());
  double worst = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.is_exterior(i) || grid.radius_squared(i) > radius * radius) continue;
    any = true;
    worst = std::max(worst, std::abs(ts * u[i] - level * phi[i]) / level);
  }
  if (!any) throw Error(ErrorKind::range, "compact set holds no exterior nodes");
  return worst;
}

double elliptic_excess(const DiscreteKernel& dk, double alpha, double gamma, double b,
                       const Point& x) {
  const int dim = dk.dimension();
  const double h = dk.spacing();
  const auto z = [&](const Point& p) {
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) r2 += p[d] * p[d];
    return std::pow(r2 + b, -gamma);
  };
  const auto offsets = dk.offsets();
  const auto weights = dk.weights();
  const double zx = z(x);
  // sum w (z(x + o h) - z(x)) avoids cancellation against the unit mass.
  double lz = 0.0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    Point y = x;
    for (int d = 0; d < dim; ++d) y[d] += offsets[k][d] * h;
    lz += weights[k] * (z(y) - zx);
  }
  double r2 = 0.0;
  for (int d = 0; d < dim; ++d) r2 += x[d] * x[d];
  const double rhs = -2.0 * alpha * gamma * std::pow(r2 + b, -(gamma + 1.0)) * (dim - 2.0 - 2.0 * gamma);
  return lz - rhs;
}

namespace {

std::vector<Point> orthant_samples(const DiscreteKernel& dk, double r_lo, double r_hi) {
  const int dim = dk.dimension();
  const double h = dk.spacing();
  const int top = static_cast<int>(std::floor(r_hi / h));
  std::vector<Point> pts;
  Index idx{};
  const auto rec = [&](auto&& self, int axis) -> void {
    if (axis == dim) {
      double r2 = 0.0;
      Point p{};
      for (int d = 0; d < dim; ++d) {
        p[d] = idx[d] * h;
        r2 += p[d] * p[d];
      }
      if (r2 >= r_lo * r_lo && r2 <= r_hi * r_hi) pts.push_back(p);
      return;
    }
    // Nondecreasing coordinates: the kernel and z share the lattice symmetries.
    const int start = axis == 0 ? 0 : idx[axis - 1];
    for (int k = start; k <= top; ++k) {
      idx[axis] = k;
      self(self, axis + 1);
    }
  };
  rec(rec, 0);
  return pts;
}

double worst_margin(const DiscreteKernel& dk, double alpha, double gamma, double b,
                    const std::vector<Point>& pts) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) worst = std::min(worst, -elliptic_excess(dk, alpha, gamma, b, p));
  return worst;
}

}  // namespace

EllipticBarrierResult check_elliptic_barrier(const DiscreteKernel& dk, double alpha,
                                             double gamma, double r_lo, double r_hi) {
  const int dim = dk.dimension();
  if (!(gamma > 0.0) || gamma > 0.5 * (dim - 2) + 1e-12) {
    throw Error(ErrorKind::configuration, "barrier exponent must lie in (0, (N-2)/2]");
  }
  if (!(r_hi > r_lo) || !(r_lo > 0.0)) {
    throw Error(ErrorKind::range, "barrier sample radii must satisfy 0 < r_lo < r_hi");
  }
  const std::vector<Point> pts = orthant_samples(dk, r_lo, r_hi);
  if (pts.empty()) throw Error(ErrorKind::range, "no lattice nodes in the barrier sample range");

  EllipticBarrierResult out;
  out.gamma = gamma;
  double lo = 1.0, hi = 1e6;
  if (worst_margin(dk, alpha, gamma, lo, pts) >= 0.0) {
    hi = lo;
  } else if (worst_margin(dk, alpha, gamma, hi, pts) < 0.0) {
    out.found = false;
    out.b = hi;
  } else {
    // Bisection in log b; the invariant is margin(lo) < 0 <= margin(hi).
    while (hi / lo > 1.001) {
      const double mid = std::sqrt(lo * hi);
      if (worst_margin(dk, alpha, gamma, mid, pts) >= 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
  }
  if (out.b == 0.0) {
    out.found = true;
    out.b = hi;
  }
  // Margin profile at the chosen b, worst value per radius shell of width h.
  std::map<long, BarrierSample> shells;
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) r2 += p[d] * p[d];
    const double m = -elliptic_excess(dk, alpha, gamma, out.b, p);
    out.worst_margin = std::min(out.worst_margin, m);
    const long key = std::lround(std::sqrt(r2) / dk.spacing());
    auto [it, fresh] = shells.try_emplace(key);
    if (fresh || m < it->second.margin) {
      it->second.radius = key * dk.spacing();
      it->second.margin = m;
      it->second.scaled_margin = m * std::pow(r2 + out.b, gamma + 2.0);
    }
  }
  for (const auto& [key, sample] : shells) out.profile.push_back(sample);
  return out;
}

ParabolicBarrierResult check_parabolic_barrier(const StationaryProfile& profile,
                                               const DiscreteKernel& dk,
                                               const DomainMask& mask, double alpha,
                                               const ParabolicParams& params,
                                               const std::vector<double>& times,
                                               const std::vector<double>& candidates) {
  const Grid& grid = dk.grid();
  const int dim = grid.dimension();
  if (!(params.kappa > 0.0) || params.kappa >= std::min(1.0, dim - 2.0)) {
    throw Error(ErrorKind::configuration, "kappa must lie in (0, min(1, N-2))");
  }
  if (!(params.gamma > 0.0) || params.gamma >= 0.5 * (dim - 2.0 - params.kappa)) {
    throw Error(ErrorKind::configuration, "gamma must lie in (0, (N-2-kappa)/2)");
  }
  if (params.k_plus < 1.0) throw Error(ErrorKind::configuration, "K+ must be at least 1");
  (void)alpha;

  std::vector<double> deltas = candidates;
  std::sort(deltas.begin(), deltas.end());
  const double inner_limit = grid.extent() - dk.support_radius();

  Field z(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    z[i] = std::pow(grid.radius_squared(i) + params.b, -params.gamma);
  }
  const Field kz = convolve(dk, z);

  ParabolicBarrierResult result;
  std::vector<bool> passes(deltas.size(), true);
  std::vector<bool> passes_minus(deltas.size(), true);
  std::vector<bool> nonempty(deltas.size(), false);
  for (double t : times) {
    const double d = 1e-3 * t;
    const Field before = omega_spectral(dk, t - d).field;
    const Field after = omega_spectral(dk, t + d).field;
    const Field now = omega_spectral(dk, t).field;
    Field phi_omega(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) phi_omega[i] = profile.phi[i] * now[i];
    const Field k_phi_omega = convolve(dk, phi_omega);
    const double tz = std::pow(t, -0.5 * (dim + params.kappa));

    for (std::size_t c = 0; c < deltas.size(); ++c) {
      ParabolicMargin m;
      m.t = t;
      m.delta = deltas[c];
      m.plus_margin = std::numeric_limits<double>::infinity();
      m.minus_margin = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!mask.is_exterior(i) || mask.in_bounded_component(i)) continue;
        const double r2 = grid.radius_squared(i);
        if (r2 < params.R * params.R || r2 > deltas[c] * t) continue;
        const Point x = grid.position(i);
        bool inside = true;
        for (int a = 0; a < dim; ++a) inside = inside && std::abs(x[a]) <= inner_limit;
        if (!inside) continue;
        const double omega_t = (after[i] - before[i]) / (2.0 * d);
        const double base = profile.phi[i] * omega_t - (k_phi_omega[i] - phi_omega[i]);
        const double zterm =
            params.k_plus * tz * (-(dim + params.kappa) / (2.0 * t) * z[i] - (kz[i] - z[i]));
        const double plus = base + zterm, minus = base - zterm;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
          throw Error(ErrorKind::numerical, "non-finite parabolic margin at t = " +
                                                std::to_string(t));
        }
        m.plus_margin = std::min(m.plus_margin, plus);
        m.minus_margin = std::max(m.minus_margin, minus);
        m.scale = std::max(m.scale, std::abs(phi_omega[i]));
        ++m.nodes;
      }
      if (m.nodes > 0) {
        nonempty[c] = true;
        const double tol = params.tolerance * m.scale;
        if (m.plus_margin < -tol) passes[c] = false;
        if (m.minus_margin > tol) passes_minus[c] = false;
      } else {
        m.plus_margin = 0.0;
        m.minus_margin = 0.0;
      }
      result.margins.push_back(m);
    }
  }
  // Regions are nested in delta, so a passing delta requires every smaller one
  // to pass as well.
  auto largest = [&](const std::vector<bool>& ok, double& star) {
    bool any = false;
    for (std::size_t c = 0; c < deltas.size(); ++c) {
      if (!ok[c]) break;
      if (nonempty[c]) {
        any = true;
        star = deltas[c];
      }
    }
    return any;
  };
  result.found = largest(passes, result.delta_star);
  result.found_minus = largest(passes_minus, result.delta_star_minus);
  return result;
}

}  // namespace nldiff
