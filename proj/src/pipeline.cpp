#include "nldiff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nldiff/error.hpp"
#include "nldiff/fundsol.hpp"
#include "nldiff/numerics.hpp"
#include "nldiff/snapshot.hpp"

namespace nldiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string g17(double v) { return fmt("%.17g", v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::configuration, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CriterionRow make_row(int c, std::string name, double measured, double predicted,
                      double tolerance, bool pass) {
  return {c, std::move(name), measured, predicted, tolerance, pass};
}

// Largest ratio of consecutive values; below 1 means strictly decreasing.
double max_ratio(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double r = v[k] / v[k - 1];
    worst = std::max(worst, std::isfinite(r) ? r : std::numeric_limits<double>::infinity());
  }
  if (v.size() < 2) return kNaN;
  return worst;
}

bool decreasing(const std::vector<double>& v) {
  if (v.size() < 2) return false;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] < v[k - 1])) return false;
  }
  return true;
}

bool wants(const std::vector<int>& which, int id) {
  return std::find(which.begin(), which.end(), id) != which.end();
}

HoleSet hole_set(const std::vector<HolePrimitive>& holes) {
  HoleSet hs;
  hs.primitives = holes;
  return hs;
}

HoleSet single_ball(double radius) {
  HolePrimitive p;
  p.size[0] = radius;
  return hole_set({p});
}

DomainMask labelled_mask(const HoleSet& holes, const Grid& grid, double support,
                         bool enforce_margin = true) {
  RasterizeOptions opts;
  opts.enforce_margin = enforce_margin;
  return components(rasterize(holes, grid, support, opts), support);
}

EvolutionOptions evolution_options(const RunConfig& c) {
  EvolutionOptions o;
  o.integrator = c.integrator;
  o.dt = c.dt;
  o.tmax = c.tmax;
  o.snapshot_times = c.snapshot_times;
  o.metric_start = c.metric_start;
  o.metric_ratio = c.metric_ratio;
  o.pad_policy = c.pad_policy;
  return o;
}

// Records times at which the asymptotic errors are compared: error_times plus
// the doublings tmax/8, ..., tmax.
std::vector<double> record_times(const RunConfig& c) {
  std::set<double> times(c.error_times.begin(), c.error_times.end());
  for (double t = c.tmax / 8.0; t <= c.tmax * (1.0 + 1e-12); t *= 2.0) times.insert(t);
  return {times.begin(), times.end()};
}

std::vector<double> doublings(const RunConfig& c) {
  std::vector<double> out;
  for (double t = c.tmax / 8.0; t <= c.tmax * (1.0 + 1e-12); t *= 2.0) out.push_back(t);
  return out;
}

const MetricsRow* row_at(const MetricsSeries& series, double t, double dt) {
  for (const auto& row : series.rows) {
    if (std::abs(row.t - t) < 0.5 * dt) return &row;
  }
  return nullptr;
}

std::string snapshot_name(double t) { return "u_t" + fmt("%g", t) + ".nldf"; }

}  // namespace

Setup make_setup(const RunConfig& config) {
  Setup s;
  s.config = config;
  s.grid = build_grid(config.dimension, config.points, config.extent);
  s.dk = discretize(make_kernel(config.kernel_family, config.kernel_radius, config.dimension),
                    s.grid);
  s.mask = labelled_mask(hole_set(config.holes), s.grid, config.kernel_radius);
  s.alpha = s.dk.discrete_alpha();
  validate_evolution(evolution_options(config), s.dk);
  return s;
}

Field make_initial(const InitialConfig& init, const Grid& grid, const DomainMask& mask) {
  Field u(grid);
  const int dim = grid.dimension();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask.is_exterior(i)) continue;
    const Point x = grid.position(i);
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) r2 += (x[d] - init.center[d]) * (x[d] - init.center[d]);
    const double r = std::sqrt(r2);
    switch (init.kind) {
      case InitialKind::gaussian:
        u[i] = std::exp(-r2 / (2.0 * init.sigma * init.sigma));
        break;
      case InitialKind::ball_indicator:
        u[i] = r <= init.radius ? 1.0 : 0.0;
        break;
      case InitialKind::shell:
        u[i] = (r >= init.inner && r <= init.outer) ? 1.0 : 0.0;
        break;
    }
  }
  const double m = integrate(u);
  if (!(m > 0.0)) {
    throw Error(ErrorKind::data, "initial data has no mass on the exterior; move initial.center");
  }
  const double scale = init.mass / m;
  for (std::size_t i = 0; i < grid.size(); ++i) u[i] *= scale;
  return u;
}

// ---------------------------------------------------------------- stages

StationaryArtifacts run_stationary(const Setup& setup, std::ostream& log) {
  const RunConfig& c = setup.config;
  std::filesystem::create_directories(c.output_dir);
  PhiSolveOptions opts;
  opts.tolerance = c.stationary_tolerance;
  opts.radii = c.stationary_radii;
  opts.max_sweeps = c.stationary_max_sweeps;
  opts.far_field_correction = c.stationary_far_field_correction;
  log << "stationary: solving on " << c.points << "^" << c.dimension << " nodes\n" << std::flush;

  StationaryArtifacts a;
  a.profile = solve_phi(setup.dk, setup.mask, opts);
  const StationaryProfile& p = a.profile;
  log << "stationary: residual " << p.residual << ", C*_fit " << p.cstar_fit << ", C*_flux "
      << p.cstar_flux << "\n";
  if (p.estimates_valid) {
    a.range = default_fit_range(p, setup.mask);
    try {
      a.laplacian_slope = laplacian_decay_check(p, setup.mask, a.range);
    } catch (const Error& e) {
      // No holes: psi vanishes and has no decay rate to measure.
      if (e.kind() != ErrorKind::range) throw;
      a.laplacian_slope = std::numeric_limits<double>::quiet_NaN();
      log << "stationary: " << e.what() << "\n";
    }
  }
  a.psi_bound = psi_bound_constant(p, setup.mask);
  a.capacity = capacity_estimate(p, setup.dk, setup.mask);
  for (int id = 0; id < setup.mask.component_count(); ++id) {
    if (setup.mask.is_bounded_component(id)) {
      a.modes.push_back(bounded_component_mode(setup.dk, setup.mask, id));
    }
  }

  write_snapshot(p.phi, make_header(p.phi, "phi"), c.output_dir / "phi.nldf");

  std::ostringstream csv;
  const int dim = setup.grid.dimension();
  csv << "r,psi_mean,psi_mean_r_pow\n";
  for (const auto& bin : radial_profile(p.psi, 2.0 * setup.grid.spacing(), setup.mask)) {
    csv << g17(bin.r_mean) << "," << g17(bin.mean) << ","
        << g17(bin.mean * std::pow(bin.r_mean, dim - 2.0)) << "\n";
  }
  write_text(c.output_dir / "radial_psi.csv", csv.str());

  nlohmann::ordered_json j;
  j["residual"] = p.residual;
  j["stage_monotone"] = p.stage_monotone;
  j["sweep_monotone"] = p.sweep_monotone;
  j["far_field_scale"] = p.far_field_scale;
  j["cstar_fit"] = p.cstar_fit;
  j["cstar_flux"] = p.cstar_flux;
  j["flux_mu"] = p.flux_mu;
  j["psi_decay_slope"] = p.decay_slope_psi;
  j["estimates_valid"] = p.estimates_valid;
  j["fit_range"] = {a.range.r_lo, a.range.r_hi};
  j["laplacian_decay_slope"] = a.laplacian_slope;
  j["psi_bound_constant"] = a.psi_bound;
  j["capacity"] = a.capacity;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& st : p.stages) {
    j["stages"].push_back({{"radius", st.radius}, {"sweeps", st.sweeps},
                           {"last_change", st.last_change}, {"residual", st.residual}});
  }
  j["bounded_components"] = nlohmann::ordered_json::array();
  for (const auto& m : a.modes) {
    j["bounded_components"].push_back(
        {{"id", m.component_id}, {"lambda1", m.lambda1}, {"rho", m.rho},
         {"iterations", m.iterations}});
  }
  write_text(c.output_dir / "stationary.json", j.dump(2) + "\n");
  return a;
}

std::optional<Field> load_phi(const Setup& setup) {
  const auto path = setup.config.output_dir / "phi.nldf";
  if (!std::filesystem::exists(path)) return std::nullopt;
  Snapshot s = read_snapshot(path);
  if (!(s.field.grid() == setup.grid)) {
    throw Error(ErrorKind::dependency, path.string() +
                                           " was computed on a different grid; rerun "
                                           "`nldiff stationary`");
  }
  return s.field;
}

SimulationArtifacts run_simulation(const Setup& setup, const Field& phi, std::ostream& log) {
  const RunConfig& c = setup.config;
  std::filesystem::create_directories(c.output_dir);
  SimulationArtifacts a;
  a.record_times = record_times(c);

  EvolutionOptions opts = evolution_options(c);
  std::set<double> snaps(opts.snapshot_times.begin(), opts.snapshot_times.end());
  snaps.insert(a.record_times.begin(), a.record_times.end());
  opts.snapshot_times.assign(snaps.begin(), snaps.end());

  const Field u0 = make_initial(c.initial, setup.grid, setup.mask);
  a.mstar = weighted_mass(u0, phi);
  log << "simulate: M* = " << a.mstar << ", " << to_string(c.integrator) << " dt " << c.dt
      << " to t = " << c.tmax << "\n"
      << std::flush;

  std::vector<double> deltas(c.delta_sweep.begin(), c.delta_sweep.end());
  if (std::find(deltas.begin(), deltas.end(), c.delta) == deltas.end()) deltas.push_back(c.delta);
  std::sort(deltas.begin(), deltas.end());

  std::ostringstream errors;
  errors << "t,delta,outer_error,inner_error,global_error\n";
  auto guarded = [](auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::range) throw;
      return kNaN;
    }
  };
  const double mstar = a.mstar;
  const RunObserver observer = [&](const Field& u, MetricsRow& row) {
    if (row.t <= 0.0) return;
    const double global = global_error(u, row.t, mstar, phi, setup.alpha, setup.mask);
    row.global_error = global;
    for (double d : deltas) {
      const double outer = guarded(
          [&] { return outer_error(u, row.t, mstar, setup.alpha, d, setup.mask, &phi); });
      const double inner =
          guarded([&] { return inner_error(u, row.t, mstar, phi, setup.alpha, d, setup.mask); });
      if (d == c.delta) {
        row.outer_error = outer;
        row.inner_error = inner;
      }
      errors << g17(row.t) << "," << g17(d) << "," << g17(outer) << "," << g17(inner) << ","
             << g17(global) << "\n";
    }
  };
  a.run = run(setup.dk, setup.mask, u0, &phi, opts, observer);
  if (a.run.aborted) log << "simulate: aborted: " << a.run.abort_reason << "\n";

  std::ostringstream metrics;
  metrics << "t,mass,weighted_mass,sup_u,min_u,pad_mass\n";
  for (const auto& r : a.run.metrics.rows) {
    metrics << g17(r.t) << "," << g17(r.mass) << "," << g17(r.weighted_mass) << ","
            << g17(r.sup_u) << "," << g17(r.min_u) << "," << g17(r.pad_mass) << "\n";
  }
  write_text(c.output_dir / "metrics.csv", metrics.str());
  write_text(c.output_dir / "errors.csv", errors.str());
  for (const auto& snap : a.run.snapshots) {
    const double t = snap.time_tag().value_or(0.0);
    write_snapshot(snap, make_header(snap, "u"), c.output_dir / snapshot_name(t));
  }
  if (a.run.aborted) {
    write_snapshot(a.run.last_good, make_header(a.run.last_good, "u_last_good"),
                   c.output_dir / "u_last_good.nldf");
  }
  return a;
}

std::vector<OmegaEstimateRow> run_omega(const Setup& setup, std::ostream& log) {
  const RunConfig& c = setup.config;
  std::filesystem::create_directories(c.output_dir);
  log << "omega: " << c.omega_times.size() << " times\n" << std::flush;
  const auto rows = check_omega_estimates(setup.dk, c.omega_times, setup.alpha);
  std::ostringstream csv;
  csv << "t,integral,min,sup,gaussian_gap,tail_constant,gradient_gap\n";
  for (const auto& r : rows) {
    csv << g17(r.t) << "," << g17(r.integral) << "," << g17(r.min) << "," << g17(r.sup) << ","
        << g17(r.gaussian_gap) << "," << g17(r.tail_constant) << "," << g17(r.gradient_gap)
        << "\n";
  }
  write_text(c.output_dir / "omega.csv", csv.str());
  if (c.omega_snapshots) {
    for (double t : c.omega_times) {
      const Field w = omega_spectral(setup.dk, t).field;
      write_snapshot(w, make_header(w, "omega"), c.output_dir / ("omega_t" + fmt("%g", t) + ".nldf"));
    }
  }
  return rows;
}

// ---------------------------------------------------------------- criteria

namespace {

struct SmallCase {
  Grid grid;
  DiscreteKernel dk;
  DomainMask mask;
};

// 9^3 grid on [-1.6, 1.6]^3 whose hole is the single origin node.
SmallCase oracle_case(const RunConfig& c) {
  SmallCase s;
  s.grid = build_grid(3, 9, 1.6);
  s.dk = discretize(make_kernel(c.kernel_family, c.kernel_radius, 3), s.grid);
  s.mask = labelled_mask(single_ball(0.2), s.grid, c.kernel_radius, false);
  return s;
}

Field smooth_bump_data(const Grid& grid, const DomainMask& mask, Point center, double sigma) {
  Field u(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask.is_hole(i)) continue;
    const Point x = grid.position(i);
    double r2 = 0.0;
    for (int d = 0; d < grid.dimension(); ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
    u[i] = std::exp(-r2 / (2.0 * sigma * sigma));
  }
  return u;
}

double rel_sup_error(const Field& a, const Field& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

Field rk4_to(const Field& u0, const SmallCase& s, double t, double dt, PadPolicy policy) {
  SimState st{u0, 0.0, 0};
  Rk4Workspace ws;
  const auto steps = static_cast<std::size_t>(std::llround(t / dt));
  for (std::size_t k = 0; k < steps; ++k) step_rk4(st, s.dk, s.mask, dt, policy, &ws);
  return st.u;
}

void criterion_1(const RunConfig& c, VerifyOutcome& out) {
  const SmallCase s = oracle_case(c);
  const Field u0 = smooth_bump_data(s.grid, s.mask, Point{0.4, 0.0, 0.0, 0.0}, 0.5);
  const Field exact = exact_oracle(u0, s.dk, s.mask, 1.0);
  const double e_fine = rel_sup_error(rk4_to(u0, s, 1.0, 0.01, PadPolicy::evolve), exact);
  const double e1 = rel_sup_error(rk4_to(u0, s, 1.0, 0.2, PadPolicy::evolve), exact);
  const double e2 = rel_sup_error(rk4_to(u0, s, 1.0, 0.1, PadPolicy::evolve), exact);
  const double order = std::log2(e1 / e2);
  out.rows.push_back(make_row(1, "rk4_vs_matrix_exponential", e_fine, 0.0, 1e-8, e_fine <= 1e-8));
  out.rows.push_back(make_row(1, "rk4_order", order, 4.0, 0.4, std::abs(order - 4.0) <= 0.4));
}

void criterion_2_oracle(const RunConfig& c, VerifyOutcome& out) {
  const SmallCase s = oracle_case(c);
  PhiSolveOptions po;
  po.tolerance = 1e-14;
  po.radii = {s.grid.extent() * std::sqrt(3.0) + c.kernel_radius};
  po.far_field_correction = false;
  const StationaryProfile prof = solve_phi(s.dk, s.mask, po);
  const Field u0 = smooth_bump_data(s.grid, s.mask, Point{0.4, 0.0, 0.0, 0.0}, 0.5);
  const double w0 = weighted_mass(u0, prof.phi);
  double drift = 0.0;
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const Field u = exact_oracle(u0, s.dk, s.mask, t, PadPolicy::sink);
    drift = std::max(drift, std::abs(weighted_mass(u, prof.phi) - w0) / w0);
  }
  out.rows.push_back(make_row(2, "oracle_weighted_mass_drift", drift, 0.0, 1e-11, drift <= 1e-11));
}

void criterion_2_reference(const SimulationArtifacts& sim, VerifyOutcome& out) {
  MetricsSeries early;
  for (const auto& r : sim.run.metrics.rows) {
    if (r.t <= 50.0 + 1e-9) early.rows.push_back(r);
  }
  const double drift = conservation_drift(early);
  out.rows.push_back(make_row(2, "reference_weighted_mass_drift", drift, 0.0, 1e-6, drift <= 1e-6));
}

void criterion_3(const RunConfig& c, VerifyOutcome& out) {
  const Grid grid = build_grid(3, 17, 3.2);
  const DiscreteKernel dk = discretize(make_kernel(c.kernel_family, c.kernel_radius, 3), grid);
  const DomainMask mask = labelled_mask(single_ball(0.5), grid, c.kernel_radius);
  EvolutionOptions opts;
  opts.integrator = Integrator::rk4;
  opts.dt = 0.25;
  const std::size_t steps = 400;
  const double nodes = static_cast<double>(grid.size());
  double worst = 0.0;
  for (int k = 0; k < c.verify_seeds; ++k) {
    std::mt19937_64 rng(c.seed + static_cast<std::uint64_t>(k));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Field a(grid), b(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = uni(rng), y = uni(rng);
      if (mask.is_exterior(i)) {
        a[i] = x;
        b[i] = y;
      }
    }
    const auto series = check_tcontraction(a, b, dk, mask, opts, steps);
    for (std::size_t s = 1; s < series.size(); ++s) {
      worst = std::max(worst, (series[s] - series[s - 1]) / grid.cell_volume());
    }
  }
  const double tol = 1e-12 * nodes;
  out.rows.push_back(make_row(3, "max_step_increase_of_positive_part", worst, 0.0, tol, worst <= tol));
}

DiscreteKernel omega_kernel(const RunConfig& c) {
  const Grid grid = build_grid(3, 65, 12.0);
  return discretize(make_kernel(c.kernel_family, c.kernel_radius, 3), grid);
}

void criterion_4(const RunConfig& c, VerifyOutcome& out) {
  const DiscreteKernel dk = omega_kernel(c);
  double diff = 0.0, integral_gap = 0.0, neg = 0.0;
  for (double t : {1.0, 5.0, 10.0}) {
    const OmegaSlice spec = omega_spectral(dk, t);
    const OmegaSlice series = omega_series(dk, t, c.omega_series_tolerance);
    for (std::size_t i = 0; i < spec.field.size(); ++i) {
      diff = std::max(diff, std::abs(spec.field[i] - series.field[i]));
    }
    integral_gap = std::max(integral_gap, std::abs(integrate(spec.field) + std::expm1(-t)));
    neg = std::max(neg, -spec.field.min() / spec.field.max());
  }
  out.rows.push_back(make_row(4, "spectral_vs_series_sup_difference", diff, 0.0, 1e-8, diff <= 1e-8));
  out.rows.push_back(make_row(4, "integral_minus_one_minus_exp", integral_gap, 0.0, 1e-10,
                              integral_gap <= 1e-10));
  out.rows.push_back(make_row(4, "negative_part_over_max", neg, 0.0, 1e-10, neg <= 1e-10));
}

void criterion_5(const Setup& setup, VerifyOutcome& out) {
  const auto rows = check_omega_estimates(setup.dk, {25.0, 50.0, 100.0}, setup.alpha);
  std::vector<double> gaps;
  for (const auto& r : rows) gaps.push_back(r.gaussian_gap);
  out.rows.push_back(make_row(5, "gaussian_gap_max_ratio", max_ratio(gaps), 1.0, 0.0, decreasing(gaps)));
  const double bound =
      0.1 * std::pow(4.0 * std::numbers::pi * setup.alpha, -0.5 * setup.grid.dimension());
  out.rows.push_back(make_row(5, "gaussian_gap_final", gaps.back(), 0.0, bound, gaps.back() <= bound));
}

void criterion_6(const RunConfig& c, VerifyOutcome& out) {
  const DiscreteKernel dk = omega_kernel(c);
  const double r1 = omega_residual(dk, 2.0, 1e-3);
  const double r4 = omega_residual(dk, 2.0, 4e-3);
  out.rows.push_back(make_row(6, "forced_equation_residual", r1, 0.0, 1e-5, r1 <= 1e-5));
  const double ratio = r4 / r1;
  out.rows.push_back(make_row(6, "richardson_ratio_4x_step", ratio, 16.0, 4.0,
                              std::abs(ratio - 16.0) <= 4.0));
}

void criterion_7(const StationaryArtifacts& st, VerifyOutcome& out) {
  const StationaryProfile& p = st.profile;
  out.rows.push_back(make_row(7, "phi_residual", p.residual, 0.0, 1e-10, p.residual <= 1e-10));
  const bool mono = p.stage_monotone && p.sweep_monotone;
  out.rows.push_back(make_row(7, "ball_stage_monotone", mono ? 1.0 : 0.0, 1.0, 0.0, mono));
  out.rows.push_back(make_row(7, "psi_radial_slope", p.decay_slope_psi, -1.0, 0.05,
                              p.estimates_valid && std::abs(p.decay_slope_psi + 1.0) <= 0.05));
  const double gap = std::abs(p.cstar_fit - p.cstar_flux) /
                     std::max(std::abs(p.cstar_fit), std::abs(p.cstar_flux));
  out.rows.push_back(make_row(7, "cstar_fit_vs_flux_relative_gap", gap, 0.0, 0.05,
                              p.estimates_valid && gap <= 0.05));
}

void criterion_8(const Setup& setup, const StationaryArtifacts& st, const SimulationArtifacts& sim,
                 VerifyOutcome& out) {
  const int dim = setup.grid.dimension();
  const MassDecayFit fit = mass_decay_fit(sim.run.metrics, sim.mstar, st.profile.cstar_fit,
                                          setup.alpha, dim, 1e-12 * sim.mstar);
  const double slope_target = -0.5 * (dim - 2);
  out.rows.push_back(make_row(8, "mass_excess_slope", fit.slope, slope_target, 0.1,
                              std::abs(fit.slope - slope_target) <= 0.1));
  const double rel = std::abs(fit.k_measured - fit.k_predicted) / fit.k_predicted;
  out.rows.push_back(make_row(8, "mass_excess_prefactor", fit.k_measured, fit.k_predicted, 0.25,
                              rel <= 0.25));
}

std::vector<double> series_at(const SimulationArtifacts& sim, const std::vector<double>& times,
                              double dt, double MetricsRow::*field) {
  std::vector<double> v;
  for (double t : times) {
    const MetricsRow* r = row_at(sim.run.metrics, t, dt);
    v.push_back(r != nullptr ? r->*field : kNaN);
  }
  return v;
}

void criteria_9_to_11(const Setup& setup, const StationaryArtifacts& st,
                      const SimulationArtifacts& sim, const std::vector<int>& which,
                      VerifyOutcome& out) {
  const RunConfig& c = setup.config;
  if (wants(which, 9)) {
    const auto v = series_at(sim, c.error_times, c.dt, &MetricsRow::outer_error);
    out.rows.push_back(make_row(9, "outer_error_max_ratio", max_ratio(v), 1.0, 0.0, decreasing(v)));
  }
  if (wants(which, 10)) {
    const auto v = series_at(sim, c.error_times, c.dt, &MetricsRow::inner_error);
    out.rows.push_back(make_row(10, "inner_error_max_ratio", max_ratio(v), 1.0, 0.0, decreasing(v)));
    const Field* last = nullptr;
    for (const auto& snap : sim.run.snapshots) {
      if (std::abs(snap.time_tag().value_or(-1.0) - c.tmax) < 0.5 * c.dt) last = &snap;
    }
    if (last == nullptr) throw Error(ErrorKind::dependency, "no snapshot at tmax");
    const double dev = compact_set_deviation(*last, c.tmax, sim.mstar, st.profile.phi, setup.alpha,
                                             c.compact_radius, setup.mask);
    out.rows.push_back(make_row(10, "compact_set_relative_deviation", dev, 0.0, 0.1, dev <= 0.1));
  }
  if (wants(which, 11)) {
    const auto v = series_at(sim, doublings(c), c.dt, &MetricsRow::global_error);
    out.rows.push_back(make_row(11, "global_error_max_ratio", max_ratio(v), 1.0, 0.0, decreasing(v)));
  }
}

EllipticBarrierResult elliptic(const Setup& setup, double gamma) {
  return check_elliptic_barrier(setup.dk, setup.alpha, gamma, setup.config.barrier_r_lo,
                                setup.config.barrier_r_hi);
}

void criterion_12(const Setup& setup, VerifyOutcome& out) {
  for (double gamma : setup.config.barrier_gammas) {
    const EllipticBarrierResult r = elliptic(setup, gamma);
    const bool ok = r.found && r.worst_margin >= 0.0;
    out.rows.push_back(make_row(12, "elliptic_margin_gamma_" + fmt("%g", gamma), r.worst_margin,
                                0.0, 0.0, ok));
    for (const auto& s : r.profile) {
      out.margins.push_back({"elliptic", gamma, r.b, s.radius, 0.0, s.margin, s.scaled_margin});
    }
  }
}

void criterion_13(const Setup& setup, const StationaryArtifacts& st, VerifyOutcome& out) {
  const RunConfig& c = setup.config;
  const EllipticBarrierResult e = elliptic(setup, c.gamma);
  if (!e.found) {
    out.rows.push_back(make_row(13, "elliptic_b_for_parabolic", kNaN, 0.0, 0.0, false));
    return;
  }
  ParabolicParams params;
  params.kappa = c.kappa;
  params.gamma = c.gamma;
  params.b = e.b;
  params.R = 0.0;
  std::vector<double> stars;
  std::vector<bool> found;
  for (double k : {1.0, 10.0}) {
    params.k_plus = k;
    const ParabolicBarrierResult r = check_parabolic_barrier(
        st.profile, setup.dk, setup.mask, setup.alpha, params, c.parabolic_times,
        c.delta_candidates);
    stars.push_back(r.found ? r.delta_star : 0.0);
    found.push_back(r.found);
    for (const auto& m : r.margins) {
      out.margins.push_back({"parabolic", k, e.b, m.t, m.delta, m.plus_margin, m.minus_margin});
    }
  }
  out.rows.push_back(make_row(13, "delta_star_kplus_1", stars[0], 0.0, 0.0, found[0] && stars[0] > 0.0));
  out.rows.push_back(make_row(13, "delta_star_kplus_10", stars[1], stars[0], 0.0,
                              found[1] && stars[1] >= stars[0]));
}

void criterion_14(const RunConfig& c, VerifyOutcome& out) {
  const Grid grid = build_grid(3, 49, 9.0);
  const DiscreteKernel dk = discretize(make_kernel(c.kernel_family, c.kernel_radius, 3), grid);
  HolePrimitive shell;
  shell.shape = HoleShape::shell;
  shell.size[0] = 3.0;
  shell.size[1] = 5.0;
  const DomainMask mask = labelled_mask(hole_set({shell}), grid, c.kernel_radius);
  int cavity = -1;
  for (int id = 0; id < mask.component_count(); ++id) {
    if (mask.is_bounded_component(id)) cavity = id;
  }
  if (cavity < 0) {
    out.rows.push_back(make_row(14, "cavity_component_found", 0.0, 1.0, 0.0, false));
    return;
  }
  const ComponentMode mode = bounded_component_mode(dk, mask, cavity);

  Field u0(grid);
  for (std::size_t i : mask.component_nodes(cavity)) u0[i] = 1.0;
  EvolutionOptions opts;
  opts.dt = 0.25;
  opts.tmax = 200.0;
  const RunResult res = run(dk, mask, u0, nullptr, opts);
  std::vector<double> t, logsup;
  for (const auto& r : res.metrics.rows) {
    if (r.t >= 100.0 - 1e-9 && r.t <= 200.0 + 1e-9) {
      t.push_back(r.t);
      logsup.push_back(std::log(r.sup_u));
    }
  }
  const LineFit fit = fit_line(t, logsup);
  const double rel = std::abs(fit.slope + mode.lambda1) / mode.lambda1;
  out.rows.push_back(make_row(14, "cavity_sup_log_slope", fit.slope, -mode.lambda1, 0.02, rel <= 0.02));

  const StationaryProfile prof = solve_phi(dk, mask);
  double cavity_phi = 0.0;
  for (std::size_t i : mask.component_nodes(cavity)) {
    cavity_phi = std::max(cavity_phi, std::abs(prof.phi[i]));
  }
  out.rows.push_back(make_row(14, "phi_max_in_cavity", cavity_phi, 0.0, 0.0, cavity_phi == 0.0));
}

// Runs one criterion, turning library errors into a failing row.
void guarded(int id, VerifyOutcome& out, std::ostream& log, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    log << "criterion " << id << ": " << e.what() << "\n";
    out.rows.push_back(make_row(id, "error_" + std::string(to_string(e.kind())), kNaN, 0.0, 0.0, false));
  }
}

nlohmann::ordered_json to_json(const VerifyOutcome& v) {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : v.rows) {
    j["rows"].push_back({{"criterion", r.criterion}, {"name", r.name},
                         {"measured", std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nullptr},
                         {"predicted", std::isfinite(r.predicted) ? nlohmann::ordered_json(r.predicted) : nullptr},
                         {"tolerance", r.tolerance}, {"pass", r.pass}});
  }
  j["margins"] = nlohmann::ordered_json::array();
  for (const auto& m : v.margins) {
    j["margins"].push_back({m.check, m.parameter, m.b, m.radius_or_t, m.delta, m.margin, m.secondary});
  }
  return j;
}

double json_number(const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); }

VerifyOutcome from_json(const nlohmann::json& j) {
  VerifyOutcome v;
  for (const auto& r : j.at("rows")) {
    v.rows.push_back({r.at("criterion").get<int>(), r.at("name").get<std::string>(),
                      json_number(r.at("measured")), json_number(r.at("predicted")),
                      r.at("tolerance").get<double>(), r.at("pass").get<bool>()});
  }
  for (const auto& m : j.at("margins")) {
    v.margins.push_back({m[0].get<std::string>(), m[1].get<double>(), m[2].get<double>(),
                         m[3].get<double>(), m[4].get<double>(), json_number(m[5]),
                         json_number(m[6])});
  }
  return v;
}

void write_outputs(const RunConfig& c, const VerifyOutcome& v, std::ostream& log) {
  write_text(c.output_dir / "report.csv", render_report(v.rows));
  write_text(c.output_dir / "margins.csv", render_margins(v.margins));
  for (const auto& [id, pass] : v.criteria()) {
    log << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "\n";
  }
}

}  // namespace

bool VerifyOutcome::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CriterionRow& r) { return r.pass; });
}

std::vector<std::pair<int, bool>> VerifyOutcome::criteria() const {
  std::map<int, bool> state;
  for (const auto& r : rows) {
    auto [it, fresh] = state.try_emplace(r.criterion, true);
    it->second = it->second && r.pass;
  }
  return {state.begin(), state.end()};
}

VerifyOutcome run_oracle_checks(const RunConfig& config, const std::vector<int>& which,
                                std::ostream& log) {
  VerifyOutcome out;
  auto step = [&](int id, const std::function<void()>& fn) {
    if (!wants(which, id)) return;
    log << "criterion " << id << " (oracle scale)\n" << std::flush;
    guarded(id, out, log, fn);
  };
  step(1, [&] { criterion_1(config, out); });
  step(2, [&] { criterion_2_oracle(config, out); });
  step(3, [&] { criterion_3(config, out); });
  step(4, [&] { criterion_4(config, out); });
  step(6, [&] { criterion_6(config, out); });
  if (wants(which, 12)) {
    const Setup setup = make_setup(config);
    step(12, [&] { criterion_12(setup, out); });
  }
  step(14, [&] { criterion_14(config, out); });
  return out;
}

VerifyOutcome run_verify(const RunConfig& config, std::ostream& log) {
  write_resolved_config(config);
  const Setup setup = make_setup(config);
  const std::vector<int>& which = config.verify_criteria;

  VerifyOutcome out = run_oracle_checks(config, which, log);

  const StationaryArtifacts st = run_stationary(setup, log);
  const SimulationArtifacts sim = run_simulation(setup, st.profile.phi, log);
  run_omega(setup, log);

  auto step = [&](int id, const std::function<void()>& fn) {
    if (!wants(which, id)) return;
    log << "criterion " << id << "\n" << std::flush;
    guarded(id, out, log, fn);
  };
  step(2, [&] { criterion_2_reference(sim, out); });
  step(5, [&] { criterion_5(setup, out); });
  step(7, [&] { criterion_7(st, out); });
  step(8, [&] { criterion_8(setup, st, sim, out); });
  for (int id : {9, 10, 11}) {
    step(id, [&] { criteria_9_to_11(setup, st, sim, {id}, out); });
  }
  step(13, [&] { criterion_13(setup, st, out); });

  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const CriterionRow& a, const CriterionRow& b) { return a.criterion < b.criterion; });
  write_text(config.output_dir / "checks.json", to_json(out).dump(1) + "\n");
  write_outputs(config, out, log);
  return out;
}

VerifyOutcome run_report(const RunConfig& config, std::ostream& log) {
  const auto& dir = config.output_dir;
  const std::pair<const char*, const char*> needed[] = {
      {"phi.nldf", "stationary"},
      {"metrics.csv", "simulate"},
      {"omega.csv", "omega"},
      {"checks.json", "verify"},
  };
  for (const auto& [file, command] : needed) {
    if (!std::filesystem::exists(dir / file)) {
      throw Error(ErrorKind::dependency, (dir / file).string() + " is missing; run `nldiff " +
                                             command + " --config <path>` first");
    }
  }
  const Setup setup = make_setup(config);
  load_phi(setup);  // checks the grid
  VerifyOutcome v;
  try {
    v = from_json(nlohmann::json::parse(read_text(dir / "checks.json")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, (dir / "checks.json").string() + ": " + e.what());
  }
  write_outputs(config, v, log);
  return v;
}

std::string render_report(const std::vector<CriterionRow>& rows) {
  std::ostringstream out;
  out << "criterion,measured,predicted,tolerance,pass\n";
  for (const auto& r : rows) {
    out << r.criterion << "." << r.name << "," << fmt("%.10g", r.measured) << ","
        << fmt("%.10g", r.predicted) << "," << fmt("%.10g", r.tolerance) << ","
        << (r.pass ? "pass" : "fail") << "\n";
  }
  return out.str();
}

std::string render_margins(const std::vector<MarginRow>& rows) {
  std::ostringstream out;
  out << "check,parameter,b,radius_or_t,delta,margin,secondary\n";
  for (const auto& m : rows) {
    out << m.check << "," << fmt("%.10g", m.parameter) << "," << fmt("%.10g", m.b) << ","
        << fmt("%.10g", m.radius_or_t) << "," << fmt("%.10g", m.delta) << ","
        << fmt("%.10g", m.margin) << "," << fmt("%.10g", m.secondary) << "\n";
  }
  return out.str();
}

int dispatch(const std::string& command, const RunConfig& config, std::ostream& out,
             std::ostream& err) {
  try {
    if (command == "stationary") {
      write_resolved_config(config);
      run_stationary(make_setup(config), out);
      return 0;
    }
    if (command == "simulate") {
      write_resolved_config(config);
      const Setup setup = make_setup(config);
      std::optional<Field> phi = load_phi(setup);
      if (!phi) {
        out << "simulate: no phi.nldf in " << config.output_dir.string()
            << ", solving the stationary problem first\n";
        phi = run_stationary(setup, out).profile.phi;
      }
      const SimulationArtifacts sim = run_simulation(setup, *phi, out);
      return sim.run.aborted ? 1 : 0;
    }
    if (command == "omega") {
      write_resolved_config(config);
      run_omega(make_setup(config), out);
      return 0;
    }
    if (command == "verify") return run_verify(config, out).all_pass() ? 0 : 1;
    if (command == "report") return run_report(config, out).all_pass() ? 0 : 1;
    if (command == "selftest") {
      const VerifyOutcome v = run_oracle_checks(config, {1, 2, 3, 4, 6, 12, 14}, out);
      out << render_report(v.rows);
      return v.all_pass() ? 0 : 1;
    }
    err << "unknown command '" << command
        << "' (stationary, simulate, omega, verify, report, selftest)\n";
    return 2;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 2;
  }
}

}  // namespace nldiff
