#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nldiff/evolution.hpp"
#include "nldiff/kernel.hpp"
#include "nldiff/lattice.hpp"

namespace nldiff {

enum class InitialKind { gaussian, ball_indicator, shell };

std::string_view to_string(InitialKind kind);

struct InitialConfig {
  InitialKind kind = InitialKind::gaussian;
  Point center{4.0, 0.0, 0.0, 0.0};
  double mass = 1.0;    // discrete integral after zeroing on holes
  double sigma = 1.0;   // gaussian: exp(-|x - c|^2 / (2 sigma^2))
  double radius = 1.0;  // ball_indicator
  double inner = 1.0;   // shell indicator: inner <= |x - c| <= outer
  double outer = 2.0;

  bool operator==(const InitialConfig&) const = default;
};

/// Ball of radius 2 at the origin.
inline HolePrimitive reference_hole() {
  HolePrimitive ball;
  ball.size[0] = 2.0;
  return ball;
}

struct RunConfig {
  KernelFamily kernel_family = KernelFamily::smooth_bump;
  double kernel_radius = 1.0;

  int dimension = 3;
  int points = 129;
  double extent = 24.0;
  std::vector<HolePrimitive> holes{reference_hole()};

  double stationary_tolerance = 1e-10;
  std::vector<double> stationary_radii;  // empty: doubling schedule
  std::size_t stationary_max_sweeps = 200000;
  bool stationary_far_field_correction = true;

  Integrator integrator = Integrator::rk4;
  double dt = 0.25;
  double tmax = 100.0;
  std::vector<double> snapshot_times{12.5, 25.0, 50.0, 100.0};
  double metric_start = 1.0;
  double metric_ratio = 1.189207115002721;
  PadPolicy pad_policy = PadPolicy::evolve;

  InitialConfig initial;

  std::vector<double> omega_times{1.0, 5.0, 10.0, 25.0, 50.0, 100.0};
  double omega_series_tolerance = 1e-14;
  bool omega_snapshots = false;

  double delta = 0.25;
  std::vector<double> delta_sweep{0.0625, 0.25, 1.0};
  std::vector<double> error_times{25.0, 50.0, 100.0};
  double compact_radius = 5.0;
  double kappa = 0.5;
  double gamma = 0.2;
  std::vector<double> barrier_gammas{0.2, 0.5};
  double barrier_r_lo = 3.0;
  double barrier_r_hi = 20.0;
  std::vector<double> parabolic_times{500.0, 1000.0, 2000.0};
  std::vector<double> delta_candidates{0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007};

  std::vector<int> verify_criteria{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  int verify_seeds = 5;

  std::filesystem::path output_dir = "nldiff_out";
  std::uint64_t seed = 20240607;
  std::string precision = "f64";
  int threads = 0;  // 0 means auto

  bool operator==(const RunConfig&) const = default;
};

/// Parses flat `key = value` text with `#` comments. Every problem found is
/// collected into a single configuration error.
RunConfig parse_config_text(std::string_view text);

/// Reads `path` and parses it.
RunConfig parse_config(const std::filesystem::path& path);

/// Canonical text with every key, doubles printed with %.17g. Parsing the
/// result gives back an equal RunConfig.
std::string render_config(const RunConfig& config);

/// Writes render_config(config) to output_dir/resolved.cfg, creating the
/// directory if needed, and returns the file path.
std::filesystem::path write_resolved_config(const RunConfig& config);

/// Every fixed key the parser accepts (hole keys listed with index 0).
const std::vector<std::string>& known_config_keys();

/// Nearest key by edit distance, empty when nothing is close.
std::string nearest_config_key(std::string_view key);

}  // namespace nldiff
