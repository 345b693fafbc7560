#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nldiff/asymptotics.hpp"
#include "nldiff/config.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/fundsol.hpp"
#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"
#include "nldiff/stationary.hpp"

namespace nldiff {

/// Grid, kernel and labelled mask built from a config.
struct Setup {
  RunConfig config;
  Grid grid;
  DiscreteKernel dk;
  DomainMask mask;
  /// Diffusivity of the discrete kernel, used in every prediction.
  double alpha = 0.0;
};

Setup make_setup(const RunConfig& config);

/// Initial data from the initial.* keys, zero off the exterior and scaled to
/// the configured discrete mass.
Field make_initial(const InitialConfig& initial, const Grid& grid, const DomainMask& mask);

/// One line of report.csv. A criterion may own several rows; it passes when
/// all of them pass.
struct CriterionRow {
  int criterion = 0;
  std::string name;
  double measured = 0.0;
  double predicted = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// One line of margins.csv.
struct MarginRow {
  std::string check;  // "elliptic" or "parabolic"
  double parameter = 0.0;  // gamma (elliptic) or K+ (parabolic)
  double b = 0.0;
  double radius_or_t = 0.0;
  double delta = 0.0;
  double margin = 0.0;
  double secondary = 0.0;  // scaled margin (elliptic) or v- margin (parabolic)
};

struct StationaryArtifacts {
  StationaryProfile profile;
  FitRange range;
  double capacity = 0.0;
  double laplacian_slope = 0.0;
  double psi_bound = 0.0;
  std::vector<ComponentMode> modes;
};

/// Solves for phi and writes phi.nldf, radial_psi.csv and stationary.json.
StationaryArtifacts run_stationary(const Setup& setup, std::ostream& log);

struct SimulationArtifacts {
  RunResult run;
  double mstar = 0.0;
  std::vector<double> record_times;  // error_times and tmax doublings
};

/// Evolves the configured initial data with phi as weight and writes
/// metrics.csv, errors.csv and u_<t>.nldf snapshots.
SimulationArtifacts run_simulation(const Setup& setup, const Field& phi, std::ostream& log);

/// Writes omega.csv for the configured times.
std::vector<OmegaEstimateRow> run_omega(const Setup& setup, std::ostream& log);

/// Loads output_dir/phi.nldf when it exists and matches the grid.
std::optional<Field> load_phi(const Setup& setup);

struct VerifyOutcome {
  std::vector<CriterionRow> rows;
  std::vector<MarginRow> margins;
  bool all_pass() const;
  /// Pass state per criterion id present in rows.
  std::vector<std::pair<int, bool>> criteria() const;
};

/// Criteria that only need fixed small grids (1 to 6, 12, 14 and the oracle
/// half of 2), restricted to `which`.
VerifyOutcome run_oracle_checks(const RunConfig& config, const std::vector<int>& which,
                                std::ostream& log);

/// Full pipeline: stationary, simulation, omega, then every criterion listed in
/// verify.criteria. Writes checks.json, report.csv and margins.csv.
VerifyOutcome run_verify(const RunConfig& config, std::ostream& log);

/// Rebuilds report.csv and margins.csv from the artifacts of a previous
/// verify. Missing artifacts raise a dependency error naming the command to
/// run.
VerifyOutcome run_report(const RunConfig& config, std::ostream& log);

std::string render_report(const std::vector<CriterionRow>& rows);
std::string render_margins(const std::vector<MarginRow>& rows);

/// Command dispatch with exit codes 0 (pass), 1 (criterion failure) and 2
/// (configuration, dependency or input error).
int dispatch(const std::string& command, const RunConfig& config, std::ostream& out,
             std::ostream& err);

}  // namespace nldiff
