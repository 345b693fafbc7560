#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"

namespace nldiff {

enum class Integrator { rk4, exponential_euler };

std::string_view to_string(Integrator integrator);
Integrator parse_integrator(std::string_view name);

struct SimState {
  Field u;
  double time = 0.0;
  std::size_t step_count = 0;
};

/// Scratch buffers reused across RK4 steps.
struct Rk4Workspace {
  std::vector<double> k;
  std::vector<double> stage;
  std::vector<double> acc;
};

/// u <- e^{-dt} u + (1 - e^{-dt}) K u, then zero on holes. Pad nodes evolve
/// with zero extension.
void step_exponential_euler(SimState& state, const DiscreteKernel& dk, const DomainMask& mask,
                            double dt);

/// Largest stable RK4 step for the generator K - I of this kernel.
double rk4_stability_limit(const DiscreteKernel& dk);

/// Classical RK4 for u' = A u with the masked generator.
void step_rk4(SimState& state, const DiscreteKernel& dk, const DomainMask& mask, double dt,
              PadPolicy policy = PadPolicy::evolve, Rk4Workspace* workspace = nullptr);

/// exp(t A) for the dense masked generator.
Eigen::MatrixXd exact_propagator(const DiscreteKernel& dk, const DomainMask& mask, double t,
                                 PadPolicy policy = PadPolicy::evolve);

/// e^{tA} u0 via the dense matrix exponential.
Field exact_oracle(const Field& u0, const DiscreteKernel& dk, const DomainMask& mask, double t,
                   PadPolicy policy = PadPolicy::evolve);

struct PicardResult {
  std::vector<double> times;            // substep times in [0, t0]
  std::vector<Field> trajectory;        // last iterate at each substep time
  std::vector<double> differences;      // max_t ||u^(k) - u^(k-1)||_1, k = 1..m
};

/// Iterates u <- u0 + int_0^t A u ds (trapezoid rule on `substeps` intervals)
/// starting from the constant-in-time guess u0.
PicardResult picard_iterate(const Field& u0, const DiscreteKernel& dk, const DomainMask& mask,
                            double t0, int iterations, int substeps = 256);

struct MetricsRow {
  double t = 0.0;
  double mass = 0.0;
  double weighted_mass = 0.0;
  double sup_u = 0.0;
  double min_u = 0.0;
  double pad_mass = 0.0;
  double outer_error = std::numeric_limits<double>::quiet_NaN();
  double inner_error = std::numeric_limits<double>::quiet_NaN();
  double global_error = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsSeries {
  std::vector<MetricsRow> rows;
};

struct EvolutionOptions {
  Integrator integrator = Integrator::rk4;
  double dt = 0.25;
  double tmax = 100.0;
  std::vector<double> snapshot_times;
  double metric_start = 1.0;
  double metric_ratio = 1.189207115002721;  // 2^{1/4}
  PadPolicy pad_policy = PadPolicy::evolve;
};

/// Step indices at which metrics are recorded: 0, the geometric schedule,
/// every snapshot time and tmax, each snapped to the dt grid.
std::vector<std::size_t> metric_steps(const EvolutionOptions& options);

MetricsRow measure(const Field& u, const DomainMask& mask, const Field* weight, double t);

struct RunResult {
  SimState state;
  MetricsSeries metrics;
  std::vector<Field> snapshots;  // time-tagged, in snapshot_times order
  bool aborted = false;
  std::string abort_reason;
  Field last_good;
};

/// Called at every metric time; may fill the optional error columns.
using RunObserver = std::function<void(const Field& u, MetricsRow& row)>;

/// Advances u0 to tmax. `weight` (usually phi) enters the weighted mass; a
/// null pointer means w = 1.
RunResult run(const DiscreteKernel& dk, const DomainMask& mask, const Field& u0,
              const Field* weight, const EvolutionOptions& options,
              const RunObserver& observer = {});

void validate_evolution(const EvolutionOptions& options, const DiscreteKernel& dk);

/// int (u_a - u_b)_+ after every step, starting with the initial pair.
std::vector<double> check_tcontraction(const Field& u0_a, const Field& u0_b,
                                       const DiscreteKernel& dk, const DomainMask& mask,
                                       const EvolutionOptions& options, std::size_t steps);

struct ComparisonReport {
  std::vector<double> times;
  std::vector<bool> ordered;
  double worst_violation = 0.0;  // max over steps of max(sub - super, 0)
  bool holds() const;
};

/// Co-evolves a subsolution (with `sub_mask`) and a supersolution (with
/// `super_mask`) and checks sub <= super after every step. RK4 is allowed a
/// violation of 1e-12 times the initial sup-norm.
ComparisonReport check_comparison(const Field& sub0, const DomainMask& sub_mask,
                                  const Field& super0, const DomainMask& super_mask,
                                  const DiscreteKernel& dk, const EvolutionOptions& options,
                                  std::size_t steps);

}  // namespace nldiff
