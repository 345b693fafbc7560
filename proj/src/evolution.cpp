#include "nldiff/evolution.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nldiff/error.hpp"
#include "nldiff/numerics.hpp"

namespace nldiff {

std::string_view to_string(Integrator integrator) {
  return integrator == Integrator::rk4 ? "rk4" : "expeuler";
}

Integrator parse_integrator(std::string_view name) {
  if (name == "rk4") return Integrator::rk4;
  if (name == "expeuler") return Integrator::exponential_euler;
  throw Error(ErrorKind::configuration,
              "unknown integrator '" + std::string(name) + "' (rk4, expeuler)");
}

void step_exponential_euler(SimState& state, const DiscreteKernel& dk, const DomainMask& mask,
                            double dt) {
  const Field ku = convolve(dk, state.u);
  const double keep = std::exp(-dt);
  const double gain = -std::expm1(-dt);
  auto u = state.u.values();
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = mask.is_hole(i) ? 0.0 : keep * u[i] + gain * ku[i];
  }
  ++state.step_count;
  state.time = static_cast<double>(state.step_count) * dt;
}

double rk4_stability_limit(const DiscreteKernel& dk) {
  // The RK4 stability interval on the negative real axis ends near -2.785;
  // the spectrum of A = K - I lies in [symbol_min - 1, 0].
  const double spread = 1.0 - std::min(0.0, dk.symbol_min());
  return 2.78 / spread;
}

void step_rk4(SimState& state, const DiscreteKernel& dk, const DomainMask& mask, double dt,
              PadPolicy policy, Rk4Workspace* workspace) {
  Rk4Workspace local;
  Rk4Workspace& ws = workspace != nullptr ? *workspace : local;
  auto u = state.u.values();
  const std::size_t n = u.size();
  ws.k.resize(n);
  ws.stage.resize(n);
  ws.acc.resize(n);

  apply_generator(dk, mask, u, ws.k, policy);
  for (std::size_t i = 0; i < n; ++i) {
    ws.acc[i] = ws.k[i];
    ws.stage[i] = u[i] + 0.5 * dt * ws.k[i];
  }
  apply_generator(dk, mask, ws.stage, ws.k, policy);
  for (std::size_t i = 0; i < n; ++i) {
    ws.acc[i] += 2.0 * ws.k[i];
    ws.stage[i] = u[i] + 0.5 * dt * ws.k[i];
  }
  apply_generator(dk, mask, ws.stage, ws.k, policy);
  for (std::size_t i = 0; i < n; ++i) {
    ws.acc[i] += 2.0 * ws.k[i];
    ws.stage[i] = u[i] + dt * ws.k[i];
  }
  apply_generator(dk, mask, ws.stage, ws.k, policy);
  for (std::size_t i = 0; i < n; ++i) {
    ws.acc[i] += ws.k[i];
    u[i] = mask.is_hole(i) ? 0.0 : u[i] + dt / 6.0 * ws.acc[i];
  }
  ++state.step_count;
  state.time = static_cast<double>(state.step_count) * dt;
}

Eigen::MatrixXd exact_propagator(const DiscreteKernel& dk, const DomainMask& mask, double t,
                                 PadPolicy policy) {
  if (t < 0.0) throw Error(ErrorKind::domain, "oracle time must be nonnegative");
  const Eigen::MatrixXd a = assemble_dense(dk, mask, policy);
  if (t == 0.0) return Eigen::MatrixXd::Identity(a.rows(), a.cols());
  return (a * t).exp();
}

Field exact_oracle(const Field& u0, const DiscreteKernel& dk, const DomainMask& mask, double t,
                   PadPolicy policy) {
  const Eigen::MatrixXd e = exact_propagator(dk, mask, t, policy);
  const Eigen::Map<const Eigen::VectorXd> v(u0.values().data(),
                                            static_cast<Eigen::Index>(u0.size()));
  const Eigen::VectorXd out = e * v;
  Field f(u0.grid(), std::vector<double>(out.data(), out.data() + out.size()));
  f.set_time_tag(t);
  return f;
}

namespace {

double l1_distance(std::span<const double> a, std::span<const double> b, double cell) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(std::abs(a[i] - b[i]));
  return s.value() * cell;
}

}  // namespace

PicardResult picard_iterate(const Field& u0, const DiscreteKernel& dk, const DomainMask& mask,
                            double t0, int iterations, int substeps) {
  if (!(t0 > 0.0) || substeps < 1 || iterations < 0) {
    throw Error(ErrorKind::configuration, "picard_iterate needs t0 > 0 and substeps >= 1");
  }
  const Grid& grid = u0.grid();
  const auto m = static_cast<std::size_t>(substeps);
  const double ds = t0 / substeps;
  PicardResult out;
  for (std::size_t j = 0; j <= m; ++j) out.times.push_back(static_cast<double>(j) * ds);

  std::vector<std::vector<double>> cur(m + 1, std::vector<double>(u0.values().begin(),
                                                                  u0.values().end()));
  std::vector<std::vector<double>> au(m + 1, std::vector<double>(grid.size()));
  for (int k = 0; k < iterations; ++k) {
    for (std::size_t j = 0; j <= m; ++j) apply_generator(dk, mask, cur[j], au[j]);
    std::vector<std::vector<double>> next(m + 1, std::vector<double>(u0.values().begin(),
                                                                     u0.values().end()));
    for (std::size_t j = 1; j <= m; ++j) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        next[j][i] = next[j - 1][i] + 0.5 * ds * (au[j - 1][i] + au[j][i]);
      }
    }
    for (std::size_t j = 0; j <= m; ++j) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (mask.is_hole(i)) next[j][i] = 0.0;
      }
    }
    double diff = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      diff = std::max(diff, l1_distance(next[j], cur[j], grid.cell_volume()));
    }
    out.differences.push_back(diff);
    cur.swap(next);
  }
  for (std::size_t j = 0; j <= m; ++j) {
    Field f(grid, cur[j]);
    f.set_time_tag(out.times[j]);
    out.trajectory.push_back(std::move(f));
  }
  return out;
}

void validate_evolution(const EvolutionOptions& options, const DiscreteKernel& dk) {
  if (!(options.dt > 0.0)) throw Error(ErrorKind::configuration, "evolution.dt must be > 0");
  if (!(options.tmax > 0.0)) throw Error(ErrorKind::configuration, "evolution.tmax must be > 0");
  if (options.integrator == Integrator::rk4) {
    const double limit = rk4_stability_limit(dk);
    if (options.dt > limit) {
      std::ostringstream msg;
      msg << "evolution.dt = " << options.dt << " exceeds the RK4 stability limit " << limit;
      throw Error(ErrorKind::configuration, msg.str());
    }
  }
  if (!(options.metric_ratio > 1.0) || !(options.metric_start > 0.0)) {
    throw Error(ErrorKind::configuration, "metric schedule needs start > 0 and ratio > 1");
  }
  for (double t : options.snapshot_times) {
    if (!(t >= 0.0) || t > options.tmax) {
      throw Error(ErrorKind::configuration, "snapshot times must lie in [0, tmax]");
    }
  }
}

std::vector<std::size_t> metric_steps(const EvolutionOptions& options) {
  const auto snap = [&](double t) {
    return static_cast<std::size_t>(std::llround(t / options.dt));
  };
  const std::size_t last = snap(options.tmax);
  std::vector<std::size_t> steps{0, last};
  for (int k = 0;; ++k) {
    const double t = options.metric_start * std::pow(options.metric_ratio, k);
    if (t > options.tmax) break;
    steps.push_back(snap(t));
  }
  for (double t : options.snapshot_times) steps.push_back(snap(t));
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  while (!steps.empty() && steps.back() > last) steps.pop_back();
  return steps;
}

MetricsRow measure(const Field& u, const DomainMask& mask, const Field* weight, double t) {
  MetricsRow row;
  row.t = t;
  CompensatedSum mass, wmass, pad;
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    mass.add(u[i]);
    wmass.add(weight != nullptr ? u[i] * (*weight)[i] : u[i]);
    if (mask.is_pad(i)) pad.add(u[i]);
    hi = std::max(hi, u[i]);
    lo = std::min(lo, u[i]);
  }
  const double h = u.grid().cell_volume();
  row.mass = mass.value() * h;
  row.weighted_mass = wmass.value() * h;
  row.pad_mass = pad.value() * h;
  row.sup_u = hi;
  row.min_u = lo;
  return row;
}

RunResult run(const DiscreteKernel& dk, const DomainMask& mask, const Field& u0,
              const Field* weight, const EvolutionOptions& options,
              const RunObserver& observer) {
  validate_evolution(options, dk);
  if (!(u0.grid() == mask.grid()) || !(u0.grid() == dk.grid())) {
    throw Error(ErrorKind::shape, "run: initial data, mask and kernel grids differ");
  }
  for (std::size_t i = 0; i < u0.size(); ++i) {
    if (!std::isfinite(u0[i]) || u0[i] < 0.0) {
      throw Error(ErrorKind::data, "initial data must be finite and nonnegative");
    }
    if (mask.is_hole(i) && u0[i] != 0.0) {
      throw Error(ErrorKind::data, "initial data must vanish on the holes");
    }
  }
  const std::vector<std::size_t> steps = metric_steps(options);
  std::vector<std::size_t> snap_steps;
  for (double t : options.snapshot_times) {
    snap_steps.push_back(static_cast<std::size_t>(std::llround(t / options.dt)));
  }

  RunResult result;
  result.state.u = u0;
  result.last_good = u0;
  Rk4Workspace ws;
  SimState& st = result.state;

  const auto record = [&]() {
    const double t = static_cast<double>(st.step_count) * options.dt;
    MetricsRow row = measure(st.u, mask, weight, t);
    if (!std::isfinite(row.mass) || !std::isfinite(row.sup_u) || !std::isfinite(row.min_u)) {
      result.aborted = true;
      std::ostringstream msg;
      msg << "non-finite values at t = " << t << "; last good state at t = "
          << result.last_good.time_tag().value_or(0.0);
      result.abort_reason = msg.str();
      return false;
    }
    if (observer) observer(st.u, row);
    result.metrics.rows.push_back(row);
    result.last_good = st.u;
    result.last_good.set_time_tag(t);
    for (std::size_t k = 0; k < snap_steps.size(); ++k) {
      if (snap_steps[k] == st.step_count) {
        Field s = st.u;
        s.set_time_tag(t);
        result.snapshots.push_back(std::move(s));
      }
    }
    return true;
  };

  std::size_t next = 0;
  while (next < steps.size()) {
    while (st.step_count < steps[next]) {
      if (options.integrator == Integrator::rk4) {
        step_rk4(st, dk, mask, options.dt, options.pad_policy, &ws);
      } else {
        step_exponential_euler(st, dk, mask, options.dt);
      }
    }
    if (!record()) break;
    ++next;
  }
  // Snapshots in the order the times were configured.
  std::vector<Field> ordered;
  for (std::size_t k = 0; k < snap_steps.size(); ++k) {
    for (const auto& s : result.snapshots) {
      if (std::llround(*s.time_tag() / options.dt) == static_cast<long long>(snap_steps[k])) {
        ordered.push_back(s);
        break;
      }
    }
  }
  result.snapshots = std::move(ordered);
  return result;
}

namespace {

void advance(SimState& st, const DiscreteKernel& dk, const DomainMask& mask,
             const EvolutionOptions& options, Rk4Workspace& ws) {
  if (options.integrator == Integrator::rk4) {
    step_rk4(st, dk, mask, options.dt, options.pad_policy, &ws);
  } else {
    step_exponential_euler(st, dk, mask, options.dt);
  }
}

double positive_part_integral(const Field& a, const Field& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(std::max(a[i] - b[i], 0.0));
  return s.value() * a.grid().cell_volume();
}

}  // namespace

std::vector<double> check_tcontraction(const Field& u0_a, const Field& u0_b,
                                       const DiscreteKernel& dk, const DomainMask& mask,
                                       const EvolutionOptions& options, std::size_t steps) {
  validate_evolution(options, dk);
  require_same_grid(u0_a, u0_b, "check_tcontraction");
  SimState a{u0_a}, b{u0_b};
  Rk4Workspace wa, wb;
  std::vector<double> series{positive_part_integral(a.u, b.u)};
  for (std::size_t s = 0; s < steps; ++s) {
    advance(a, dk, mask, options, wa);
    advance(b, dk, mask, options, wb);
    series.push_back(positive_part_integral(a.u, b.u));
  }
  return series;
}

bool ComparisonReport::holds() const {
  return std::all_of(ordered.begin(), ordered.end(), [](bool b) { return b; });
}

ComparisonReport check_comparison(const Field& sub0, const DomainMask& sub_mask,
                                  const Field& super0, const DomainMask& super_mask,
                                  const DiscreteKernel& dk, const EvolutionOptions& options,
                                  std::size_t steps) {
  validate_evolution(options, dk);
  require_same_grid(sub0, super0, "check_comparison");
  for (std::size_t i = 0; i < sub0.size(); ++i) {
    if (sub0[i] > super0[i]) {
      throw Error(ErrorKind::data, "comparison needs sub0 <= super0 everywhere");
    }
  }
  const double slack = options.integrator == Integrator::rk4
                           ? 1e-12 * std::max(sub0.max_abs(), super0.max_abs())
                           : 0.0;
  SimState lo{sub0}, hi{super0};
  Rk4Workspace wl, wh;
  ComparisonReport report;
  for (std::size_t s = 0; s < steps; ++s) {
    advance(lo, dk, sub_mask, options, wl);
    advance(hi, dk, super_mask, options, wh);
    double worst = 0.0;
    for (std::size_t i = 0; i < lo.u.size(); ++i) worst = std::max(worst, lo.u[i] - hi.u[i]);
    report.times.push_back(lo.time);
    report.ordered.push_back(worst <= slack);
    report.worst_violation = std::max(report.worst_violation, worst);
  }
  return report;
}

}  // namespace nldiff
