#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <cstring>
#include <random>
#include <sstream>

#include "nldiff/config.hpp"
#include "nldiff/error.hpp"
#include "nldiff/pipeline.hpp"
#include "nldiff/snapshot.hpp"

using namespace nldiff;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nldiff_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string configuration_message(std::string_view text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
    return e.what();
  }
  FAIL("expected a configuration error");
  return {};
}

constexpr std::string_view kMinimal =
    "# small exterior problem\n"
    "kernel.family = smooth_bump\n"
    "kernel.radius = 1\n"
    "grid.points = 33\n"
    "grid.extent = 8\n"
    "holes[0].shape = ball\n"
    "holes[0].size = 2\n";

RunConfig small_pipeline_config(const fs::path& out) {
  std::string text(kMinimal);
  text +=
      "evolution.tmax = 4\n"
      "evolution.snapshot_times = 2, 4\n"
      "asymptotics.error_times = 2, 4\n"
      "omega.times = 1, 2\n"
      "output_dir = " +
      out.string() + "\n";
  return parse_config_text(text);
}

}  // namespace

TEST_CASE("minimal config fills defaults", "[cli]") {
  const RunConfig c = parse_config_text(kMinimal);
  const RunConfig d;
  CHECK(c.points == 33);
  CHECK(c.extent == 8.0);
  REQUIRE(c.holes.size() == 1);
  CHECK(c.holes[0].size[0] == 2.0);
  CHECK(c.dt == d.dt);
  CHECK(c.tmax == d.tmax);
  CHECK(c.omega_times == d.omega_times);
  CHECK(c.verify_criteria == d.verify_criteria);
}

TEST_CASE("default config is the reference problem", "[cli]") {
  const RunConfig d;
  REQUIRE(d.holes.size() == 1);
  CHECK(d.holes[0].shape == HoleShape::ball);
  CHECK(d.holes[0].size[0] == 2.0);
  CHECK(d.holes[0].center == Point{});
  CHECK(d.points == 129);
  CHECK(d.extent == 24.0);
  CHECK(parse_config_text("") == d);
  CHECK(parse_config_text("holes = none\n").holes.empty());
}

TEST_CASE("resolved config is a fixpoint", "[cli]") {
  const fs::path dir = scratch("resolved");
  RunConfig c = parse_config_text(std::string(kMinimal) + "holes[1].shape = box\n"
                                  "holes[1].center = 5, 0, 0\nholes[1].size = 0.5\n");
  c.output_dir = dir;
  const fs::path written = write_resolved_config(c);
  CHECK(written == dir / "resolved.cfg");
  const RunConfig back = parse_config(written);
  CHECK(back == c);
  CHECK(render_config(back) == slurp(written));

  const RunConfig d;
  CHECK(parse_config_text(render_config(d)) == d);
}

TEST_CASE("config errors", "[cli]") {
  CHECK_THAT(configuration_message("grid.points = 64\n"), ContainsSubstring("points must be odd"));
  const std::string typo = configuration_message("gird.points = 33\n");
  CHECK_THAT(typo, ContainsSubstring("gird.points"));
  CHECK_THAT(typo, ContainsSubstring("grid.points"));
  CHECK(nearest_config_key("evolution.dtt") == "evolution.dt");
  CHECK_THAT(configuration_message("evolution.dt = fast\n"), ContainsSubstring("evolution.dt"));

  // Every problem is reported at once.
  const std::string both = configuration_message("grid.points = 64\nkernel.radius = -1\n");
  CHECK_THAT(both, ContainsSubstring("points must be odd"));
  CHECK_THAT(both, ContainsSubstring("kernel.radius"));
}

TEST_CASE("snapshot round trip is bit exact", "[cli]") {
  const fs::path dir = scratch("snapshot");
  const Grid g = build_grid(3, 17, 4.0);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> dist;
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng);
  f.set_time_tag(12.5);
  const fs::path p = dir / "u.nldf";
  write_snapshot(f, make_header(f, "u"), p);
  const Snapshot s = read_snapshot(p);
  CHECK(s.header.version == kSnapshotVersion);
  CHECK(s.header.field_name == "u");
  CHECK(s.header.time == 12.5);
  REQUIRE(s.field.grid() == g);
  REQUIRE(s.field.size() == f.size());
  CHECK(std::memcmp(s.field.values().data(), f.values().data(), f.size() * sizeof(double)) == 0);
  CHECK(fs::file_size(p) > f.size() * sizeof(double));
}

TEST_CASE("damaged snapshots raise format errors", "[cli]") {
  const fs::path dir = scratch("snapshot_bad");
  const Grid g = build_grid(3, 17, 4.0);
  const Field f(g, 1.5);
  const fs::path p = dir / "u.nldf";
  write_snapshot(f, make_header(f, "u"), p);
  const std::string bytes = slurp(p);

  const fs::path cut = dir / "cut.nldf";
  std::ofstream(cut, std::ios::binary).write(bytes.data(),
                                             static_cast<std::streamsize>(bytes.size() - 8));
  try {
    read_snapshot(cut);
    FAIL("truncated file was accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
  }

  std::string bumped = bytes;
  bumped[4] = static_cast<char>(kSnapshotVersion + 1);
  const fs::path future = dir / "future.nldf";
  std::ofstream(future, std::ios::binary).write(bumped.data(),
                                                static_cast<std::streamsize>(bumped.size()));
  try {
    read_snapshot(future);
    FAIL("unknown version was accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK_THAT(std::string(e.what()), ContainsSubstring(std::to_string(kSnapshotVersion)));
    CHECK_THAT(std::string(e.what()), ContainsSubstring(std::to_string(kSnapshotVersion + 1)));
  }

  std::string magic = bytes;
  magic[0] = 'X';
  const fs::path wrong = dir / "wrong.nldf";
  std::ofstream(wrong, std::ios::binary).write(magic.data(),
                                               static_cast<std::streamsize>(magic.size()));
  CHECK_THROWS_AS(read_snapshot(wrong), Error);
}

TEST_CASE("report without artifacts names the missing command", "[cli]") {
  RunConfig c;
  c.output_dir = scratch("report_missing");
  std::ostringstream out, err;
  CHECK(dispatch("report", c, out, err) == 2);
  CHECK_THAT(err.str(), ContainsSubstring("stationary"));
  CHECK(dispatch("bogus", c, out, err) == 2);
}

TEST_CASE("stationary runs on a hole-free domain", "[cli]") {
  RunConfig c = parse_config_text("grid.points = 25\ngrid.extent = 6\nholes = none\n");
  c.output_dir = scratch("no_holes");
  std::ostringstream out, err;
  CHECK(dispatch("stationary", c, out, err) == 0);
  CHECK(read_snapshot(c.output_dir / "phi.nldf").field.min() == 1.0);
}

TEST_CASE("small pipeline writes deterministic artifacts", "[cli][pipeline]") {
  std::string metrics[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = scratch("pipeline_" + std::to_string(k));
    const RunConfig c = small_pipeline_config(dir);
    std::ostringstream out, err;
    REQUIRE(dispatch("stationary", c, out, err) == 0);
    REQUIRE(dispatch("simulate", c, out, err) == 0);
    REQUIRE(dispatch("omega", c, out, err) == 0);
    for (const char* name : {"resolved.cfg", "phi.nldf", "radial_psi.csv", "stationary.json",
                             "metrics.csv", "errors.csv", "omega.csv", "u_t2.nldf",
                             "u_t4.nldf"}) {
      CHECK(fs::exists(dir / name));
    }
    metrics[k] = slurp(dir / "metrics.csv");
    CHECK(metrics[k].rfind("t,mass,weighted_mass,sup_u,min_u,pad_mass\n", 0) == 0);

    // Artifacts exist up to omega, so report now asks for verify.
    std::ostringstream rout, rerr;
    CHECK(dispatch("report", c, rout, rerr) == 2);
    CHECK_THAT(rerr.str(), ContainsSubstring("verify"));
  }
  CHECK(metrics[0] == metrics[1]);
}
