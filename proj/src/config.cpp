#include "nldiff/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "nldiff/error.hpp"

namespace nldiff {

std::string_view to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::gaussian: return "gaussian";
    case InitialKind::ball_indicator: return "ball_indicator";
    case InitialKind::shell: return "shell";
  }
  return "gaussian";
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  return items;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> to_integer(const std::string& s) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_list(const std::vector<double>& values) {
  if (values.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(values[i]);
  }
  return out;
}

std::string format_point(const Point& p, int n) {
  std::string out;
  for (int d = 0; d < n; ++d) {
    if (d) out += ", ";
    out += format_double(p[d]);
  }
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string> kKeys = {
    "kernel.family",
    "kernel.radius",
    "grid.dimension",
    "grid.points",
    "grid.extent",
    "holes",
    "holes[0].shape",
    "holes[0].center",
    "holes[0].size",
    "stationary.tolerance",
    "stationary.radii",
    "stationary.max_sweeps",
    "stationary.far_field_correction",
    "evolution.integrator",
    "evolution.dt",
    "evolution.tmax",
    "evolution.snapshot_times",
    "evolution.metric_start",
    "evolution.metric_ratio",
    "evolution.pad_policy",
    "initial.kind",
    "initial.center",
    "initial.mass",
    "initial.sigma",
    "initial.radius",
    "initial.inner",
    "initial.outer",
    "omega.times",
    "omega.series_tolerance",
    "omega.snapshots",
    "asymptotics.delta",
    "asymptotics.delta_sweep",
    "asymptotics.error_times",
    "asymptotics.compact_radius",
    "asymptotics.kappa",
    "asymptotics.gamma",
    "asymptotics.barrier_gammas",
    "asymptotics.barrier_r_lo",
    "asymptotics.barrier_r_hi",
    "asymptotics.parabolic_times",
    "asymptotics.delta_candidates",
    "verify.criteria",
    "verify.seeds",
    "output_dir",
    "seed",
    "precision",
    "threads",
};

struct Entry {
  std::string value;
  int line = 0;
};

class Parser {
 public:
  explicit Parser(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  std::vector<std::string>& problems() { return problems_; }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<Entry> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    Entry e = it->second;
    entries_.erase(it);
    return e;
  }

  void fail(const std::string& key, const Entry& e, const std::string& what) {
    problems_.push_back("line " + std::to_string(e.line) + ": " + key + " = '" + e.value +
                        "': " + what);
  }
  void fail(const std::string& what) { problems_.push_back(what); }

  void number(const std::string& key, double& out) {
    if (auto e = take(key)) {
      if (auto v = to_double(e->value)) {
        out = *v;
      } else {
        fail(key, *e, "expected a finite number");
      }
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (auto e = take(key)) {
      if (auto v = to_integer<Int>(e->value)) {
        out = *v;
      } else {
        fail(key, *e, "expected an integer");
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (auto e = take(key)) {
      if (e->value == "true" || e->value == "1" || e->value == "yes") {
        out = true;
      } else if (e->value == "false" || e->value == "0" || e->value == "no") {
        out = false;
      } else {
        fail(key, *e, "expected true or false");
      }
    }
  }

  void list(const std::string& key, std::vector<double>& out) {
    if (auto e = take(key)) {
      if (e->value == "none" || e->value == "auto") {
        out.clear();
        return;
      }
      std::vector<double> values;
      for (const auto& item : split_list(e->value)) {
        if (auto v = to_double(item)) {
          values.push_back(*v);
        } else {
          fail(key, *e, "expected a comma-separated list of numbers");
          return;
        }
      }
      out = std::move(values);
    }
  }

  void point(const std::string& key, Point& out, int dimension) {
    if (auto e = take(key)) parse_point(key, *e, out, dimension);
  }

  void parse_point(const std::string& key, const Entry& e, Point& out, int dimension) {
    const auto items = split_list(e.value);
    if (static_cast<int>(items.size()) != dimension) {
      fail(key, e, "expected " + std::to_string(dimension) + " coordinates");
      return;
    }
    Point p{};
    for (int d = 0; d < dimension; ++d) {
      auto v = to_double(items[d]);
      if (!v) {
        fail(key, e, "coordinate " + std::to_string(d) + " is not a number");
        return;
      }
      p[d] = *v;
    }
    out = p;
  }

  std::vector<std::string> leftover() const {
    std::vector<std::string> keys;
    for (const auto& [k, e] : entries_) keys.push_back(k);
    return keys;
  }
  int line_of(const std::string& key) const { return entries_.at(key).line; }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string> problems_;
};

template <typename T, typename Fn>
void parse_enum(Parser& p, const std::string& key, T& out, Fn parse) {
  if (auto e = p.take(key)) {
    try {
      out = parse(e->value);
    } catch (const Error& err) {
      p.fail(key, *e, err.what());
    }
  }
}

void parse_holes(Parser& p, RunConfig& c) {
  static const std::regex hole_key(R"(holes\[(\d+)\]\.(shape|center|size))");
  std::map<int, std::map<std::string, Entry>> by_index;
  for (const auto& key : p.leftover()) {
    std::smatch m;
    if (std::regex_match(key, m, hole_key)) {
      by_index[std::stoi(m[1].str())][m[2].str()] = *p.take(key);
    }
  }
  bool none = false;
  if (auto e = p.take("holes")) {
    if (e->value == "none") {
      none = true;
    } else {
      p.fail("holes", *e, "only 'none' is accepted here; use holes[i].shape/center/size");
    }
  }
  if (none) {
    if (!by_index.empty()) p.fail("holes = none conflicts with holes[i] keys");
    c.holes.clear();
    return;
  }
  if (by_index.empty()) return;  // keep the default

  c.holes.clear();
  int expected = 0;
  for (auto& [index, keys] : by_index) {
    const std::string prefix = "holes[" + std::to_string(index) + "].";
    if (index != expected) {
      p.fail("hole indices must be contiguous from 0; found " + prefix.substr(0, prefix.size() - 1));
    }
    expected = index + 1;
    HolePrimitive prim;
    if (keys.count("shape")) {
      const Entry& e = keys["shape"];
      try {
        prim.shape = parse_hole_shape(e.value);
      } catch (const Error& err) {
        p.fail(prefix + "shape", e, err.what());
      }
    }
    if (keys.count("center")) p.parse_point(prefix + "center", keys["center"], prim.center, c.dimension);
    if (!keys.count("size")) {
      p.fail(prefix + "size is required");
    } else {
      const Entry& e = keys["size"];
      std::vector<double> values;
      bool ok = true;
      for (const auto& item : split_list(e.value)) {
        auto v = to_double(item);
        if (!v || *v <= 0.0) ok = false;
        values.push_back(v.value_or(0.0));
      }
      const std::size_t n = values.size();
      if (!ok) {
        p.fail(prefix + "size", e, "sizes must be positive numbers");
      } else if (prim.shape == HoleShape::ball) {
        if (n != 1) p.fail(prefix + "size", e, "a ball takes one radius");
        else prim.size[0] = values[0];
      } else if (prim.shape == HoleShape::box) {
        if (n == 1) {
          for (int d = 0; d < c.dimension; ++d) prim.size[d] = values[0];
        } else if (static_cast<int>(n) == c.dimension) {
          for (int d = 0; d < c.dimension; ++d) prim.size[d] = values[d];
        } else {
          p.fail(prefix + "size", e, "a box takes one half-width or one per axis");
        }
      } else {
        if (n != 2 || values[0] >= values[1]) {
          p.fail(prefix + "size", e, "a shell takes inner, outer radii with inner < outer");
        } else {
          prim.size[0] = values[0];
          prim.size[1] = values[1];
        }
      }
    }
    c.holes.push_back(prim);
  }
}

void check(Parser& p, bool ok, const std::string& what) {
  if (!ok) p.fail(what);
}

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

void validate(Parser& p, const RunConfig& c) {
  check(p, c.kernel_radius > 0.0, "kernel.radius must be positive");
  check(p, c.dimension >= 3 && c.dimension <= kMaxDim,
        "grid.dimension must be between 3 and " + std::to_string(kMaxDim) +
            " (unsupported dimension)");
  check(p, c.points % 2 == 1, "grid.points = " + std::to_string(c.points) +
                                  ": points must be odd so the origin is a node");
  check(p, c.points >= 17, "grid.points must be at least 17");
  check(p, c.extent > 0.0, "grid.extent must be positive");
  if (c.points >= 3 && c.extent > 0.0 && c.kernel_radius > 0.0) {
    const double h = 2.0 * c.extent / (c.points - 1);
    check(p, c.kernel_radius >= h, "kernel.radius must be at least the grid spacing");
  }
  if (c.dimension >= 3 && c.dimension <= kMaxDim) {
    const double margin = 2.0 * c.kernel_radius;
    for (std::size_t k = 0; k < c.holes.size(); ++k) {
      const auto& prim = c.holes[k];
      for (int d = 0; d < c.dimension; ++d) {
        const double half = prim.half_extent(d, c.dimension);
        if (std::abs(prim.center[d]) + half > c.extent - margin) {
          p.fail("holes[" + std::to_string(k) + "] comes within 2 x kernel.radius of the box");
          break;
        }
      }
    }
  }
  check(p, c.stationary_tolerance > 0.0, "stationary.tolerance must be positive");
  check(p, all_positive(c.stationary_radii) && strictly_increasing(c.stationary_radii),
        "stationary.radii must be positive and increasing");
  if (!c.stationary_radii.empty()) {
    check(p, c.stationary_radii.back() <= c.extent - c.kernel_radius,
          "stationary.radii must not exceed grid.extent - kernel.radius");
  }
  check(p, c.stationary_max_sweeps > 0, "stationary.max_sweeps must be positive");
  check(p, c.dt > 0.0, "evolution.dt must be positive");
  check(p, c.tmax > 0.0, "evolution.tmax must be positive");
  check(p, std::all_of(c.snapshot_times.begin(), c.snapshot_times.end(),
                       [&](double t) { return t > 0.0 && t <= c.tmax; }),
        "evolution.snapshot_times must lie in (0, tmax]");
  check(p, c.metric_start > 0.0, "evolution.metric_start must be positive");
  check(p, c.metric_ratio > 1.0, "evolution.metric_ratio must exceed 1");
  check(p, c.initial.mass > 0.0, "initial.mass must be positive");
  check(p, c.initial.sigma > 0.0, "initial.sigma must be positive");
  check(p, c.initial.radius > 0.0, "initial.radius must be positive");
  check(p, c.initial.inner >= 0.0 && c.initial.inner < c.initial.outer,
        "initial.inner and initial.outer must satisfy 0 <= inner < outer");
  check(p, all_positive(c.omega_times), "omega.times must be positive");
  check(p, c.omega_series_tolerance > 0.0 && c.omega_series_tolerance < 1.0,
        "omega.series_tolerance must lie in (0, 1)");
  check(p, c.delta > 0.0, "asymptotics.delta must be positive");
  check(p, all_positive(c.delta_sweep), "asymptotics.delta_sweep must be positive");
  check(p, std::all_of(c.error_times.begin(), c.error_times.end(),
                       [&](double t) { return t > 0.0 && t <= c.tmax; }),
        "asymptotics.error_times must lie in (0, tmax]");
  check(p, c.compact_radius > 0.0, "asymptotics.compact_radius must be positive");
  const double n = c.dimension;
  check(p, c.kappa > 0.0 && c.kappa < std::min(1.0, n - 2.0),
        "asymptotics.kappa must lie in (0, min(1, N - 2))");
  check(p, c.gamma > 0.0 && c.gamma < 0.5 * (n - 2.0 - c.kappa),
        "asymptotics.gamma must lie in (0, (N - 2 - kappa) / 2)");
  check(p, std::all_of(c.barrier_gammas.begin(), c.barrier_gammas.end(),
                       [&](double g) { return g > 0.0 && g <= 0.5 * (n - 2.0); }),
        "asymptotics.barrier_gammas must lie in (0, (N - 2) / 2]");
  check(p, c.barrier_r_lo > 0.0 && c.barrier_r_lo < c.barrier_r_hi,
        "asymptotics.barrier_r_lo must be positive and below barrier_r_hi");
  check(p, all_positive(c.parabolic_times), "asymptotics.parabolic_times must be positive");
  check(p, all_positive(c.delta_candidates) && strictly_increasing(c.delta_candidates),
        "asymptotics.delta_candidates must be positive and increasing");
  check(p, std::all_of(c.verify_criteria.begin(), c.verify_criteria.end(),
                       [](int k) { return k >= 1 && k <= 14; }),
        "verify.criteria entries must lie in 1..14");
  check(p, c.verify_seeds >= 1, "verify.seeds must be at least 1");
  check(p, !c.output_dir.empty(), "output_dir must not be empty");
  check(p, c.threads >= 0, "threads must be 'auto' or a positive integer");
}

}  // namespace

const std::vector<std::string>& known_config_keys() { return kKeys; }

std::string nearest_config_key(std::string_view key) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& k : kKeys) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  const std::size_t limit = std::max<std::size_t>(3, key.size() / 3);
  return best_d <= limit ? best : std::string();
}

RunConfig parse_config_text(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> problems;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(line) + ": empty key");
      continue;
    }
    if (entries.count(key)) {
      problems.push_back("line " + std::to_string(line) + ": duplicate key " + key +
                         " (first on line " + std::to_string(entries[key].line) + ")");
      continue;
    }
    entries[key] = {value, line};
  }

  RunConfig c;

  Parser p(std::move(entries));
  for (auto& msg : problems) p.fail(msg);

  parse_enum(p, "kernel.family", c.kernel_family,
             [](const std::string& v) { return parse_kernel_family(v); });
  p.number("kernel.radius", c.kernel_radius);
  p.integer("grid.dimension", c.dimension);
  p.integer("grid.points", c.points);
  p.number("grid.extent", c.extent);
  const int dim = (c.dimension >= 1 && c.dimension <= kMaxDim) ? c.dimension : 3;
  {
    RunConfig probe = c;
    probe.dimension = dim;
    parse_holes(p, probe);
    c.holes = probe.holes;
  }

  p.number("stationary.tolerance", c.stationary_tolerance);
  p.list("stationary.radii", c.stationary_radii);
  p.integer("stationary.max_sweeps", c.stationary_max_sweeps);
  p.boolean("stationary.far_field_correction", c.stationary_far_field_correction);

  parse_enum(p, "evolution.integrator", c.integrator,
             [](const std::string& v) { return parse_integrator(v); });
  p.number("evolution.dt", c.dt);
  p.number("evolution.tmax", c.tmax);
  p.list("evolution.snapshot_times", c.snapshot_times);
  p.number("evolution.metric_start", c.metric_start);
  p.number("evolution.metric_ratio", c.metric_ratio);
  parse_enum(p, "evolution.pad_policy", c.pad_policy,
             [](const std::string& v) { return parse_pad_policy(v); });

  parse_enum(p, "initial.kind", c.initial.kind, [](const std::string& v) {
    if (v == "gaussian") return InitialKind::gaussian;
    if (v == "ball_indicator") return InitialKind::ball_indicator;
    if (v == "shell") return InitialKind::shell;
    throw Error(ErrorKind::configuration,
                "unknown initial kind (gaussian, ball_indicator, shell)");
  });
  p.point("initial.center", c.initial.center, dim);
  p.number("initial.mass", c.initial.mass);
  p.number("initial.sigma", c.initial.sigma);
  p.number("initial.radius", c.initial.radius);
  p.number("initial.inner", c.initial.inner);
  p.number("initial.outer", c.initial.outer);

  p.list("omega.times", c.omega_times);
  p.number("omega.series_tolerance", c.omega_series_tolerance);
  p.boolean("omega.snapshots", c.omega_snapshots);

  p.number("asymptotics.delta", c.delta);
  p.list("asymptotics.delta_sweep", c.delta_sweep);
  p.list("asymptotics.error_times", c.error_times);
  p.number("asymptotics.compact_radius", c.compact_radius);
  p.number("asymptotics.kappa", c.kappa);
  p.number("asymptotics.gamma", c.gamma);
  p.list("asymptotics.barrier_gammas", c.barrier_gammas);
  p.number("asymptotics.barrier_r_lo", c.barrier_r_lo);
  p.number("asymptotics.barrier_r_hi", c.barrier_r_hi);
  p.list("asymptotics.parabolic_times", c.parabolic_times);
  p.list("asymptotics.delta_candidates", c.delta_candidates);

  if (auto e = p.take("verify.criteria")) {
    if (e->value == "all") {
      c.verify_criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
    } else if (e->value == "none") {
      c.verify_criteria.clear();
    } else {
      std::vector<int> ids;
      bool ok = true;
      for (const auto& item : split_list(e->value)) {
        auto v = to_integer<int>(item);
        if (!v) ok = false;
        else ids.push_back(*v);
      }
      if (!ok) {
        p.fail("verify.criteria", *e, "expected 'all', 'none' or a list of integers");
      } else {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        c.verify_criteria = ids;
      }
    }
  }
  p.integer("verify.seeds", c.verify_seeds);

  if (auto e = p.take("output_dir")) c.output_dir = e->value;
  p.integer("seed", c.seed);
  if (auto e = p.take("precision")) {
    if (e->value != "f64") p.fail("precision", *e, "only f64 is supported");
    c.precision = e->value;
  }
  if (auto e = p.take("threads")) {
    if (e->value == "auto") {
      c.threads = 0;
    } else if (auto v = to_integer<int>(e->value); v && *v > 0) {
      c.threads = *v;
    } else {
      p.fail("threads", *e, "expected 'auto' or a positive integer");
    }
  }

  for (const auto& key : p.leftover()) {
    std::string msg = "line " + std::to_string(p.line_of(key)) + ": unknown key '" + key + "'";
    if (const auto near = nearest_config_key(key); !near.empty()) {
      msg += " (did you mean '" + near + "'?)";
    }
    p.fail(msg);
  }

  validate(p, c);

  if (!p.problems().empty()) {
    std::string msg = std::to_string(p.problems().size()) + " problem(s) in configuration:";
    for (const auto& s : p.problems()) msg += "\n  " + s;
    throw Error(ErrorKind::configuration, msg);
  }
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::configuration, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  auto kv = [&](const std::string& k, const std::string& v) { out << k << " = " << v << "\n"; };
  const int n = c.dimension;
  kv("kernel.family", std::string(to_string(c.kernel_family)));
  kv("kernel.radius", format_double(c.kernel_radius));
  kv("grid.dimension", std::to_string(c.dimension));
  kv("grid.points", std::to_string(c.points));
  kv("grid.extent", format_double(c.extent));
  if (c.holes.empty()) kv("holes", "none");
  for (std::size_t k = 0; k < c.holes.size(); ++k) {
    const auto& h = c.holes[k];
    const std::string prefix = "holes[" + std::to_string(k) + "].";
    kv(prefix + "shape", std::string(to_string(h.shape)));
    kv(prefix + "center", format_point(h.center, n));
    const int sizes = h.shape == HoleShape::ball ? 1 : h.shape == HoleShape::shell ? 2 : n;
    kv(prefix + "size", format_point(h.size, sizes));
  }
  kv("stationary.tolerance", format_double(c.stationary_tolerance));
  kv("stationary.radii", c.stationary_radii.empty() ? "auto" : format_list(c.stationary_radii));
  kv("stationary.max_sweeps", std::to_string(c.stationary_max_sweeps));
  kv("stationary.far_field_correction", c.stationary_far_field_correction ? "true" : "false");
  kv("evolution.integrator", std::string(to_string(c.integrator)));
  kv("evolution.dt", format_double(c.dt));
  kv("evolution.tmax", format_double(c.tmax));
  kv("evolution.snapshot_times", format_list(c.snapshot_times));
  kv("evolution.metric_start", format_double(c.metric_start));
  kv("evolution.metric_ratio", format_double(c.metric_ratio));
  kv("evolution.pad_policy", std::string(to_string(c.pad_policy)));
  kv("initial.kind", std::string(to_string(c.initial.kind)));
  kv("initial.center", format_point(c.initial.center, n));
  kv("initial.mass", format_double(c.initial.mass));
  kv("initial.sigma", format_double(c.initial.sigma));
  kv("initial.radius", format_double(c.initial.radius));
  kv("initial.inner", format_double(c.initial.inner));
  kv("initial.outer", format_double(c.initial.outer));
  kv("omega.times", format_list(c.omega_times));
  kv("omega.series_tolerance", format_double(c.omega_series_tolerance));
  kv("omega.snapshots", c.omega_snapshots ? "true" : "false");
  kv("asymptotics.delta", format_double(c.delta));
  kv("asymptotics.delta_sweep", format_list(c.delta_sweep));
  kv("asymptotics.error_times", format_list(c.error_times));
  kv("asymptotics.compact_radius", format_double(c.compact_radius));
  kv("asymptotics.kappa", format_double(c.kappa));
  kv("asymptotics.gamma", format_double(c.gamma));
  kv("asymptotics.barrier_gammas", format_list(c.barrier_gammas));
  kv("asymptotics.barrier_r_lo", format_double(c.barrier_r_lo));
  kv("asymptotics.barrier_r_hi", format_double(c.barrier_r_hi));
  kv("asymptotics.parabolic_times", format_list(c.parabolic_times));
  kv("asymptotics.delta_candidates", format_list(c.delta_candidates));
  std::string criteria;
  for (std::size_t i = 0; i < c.verify_criteria.size(); ++i) {
    if (i) criteria += ", ";
    criteria += std::to_string(c.verify_criteria[i]);
  }
  kv("verify.criteria", criteria.empty() ? "none" : criteria);
  kv("verify.seeds", std::to_string(c.verify_seeds));
  kv("output_dir", c.output_dir.string());
  kv("seed", std::to_string(c.seed));
  kv("precision", c.precision);
  kv("threads", c.threads == 0 ? "auto" : std::to_string(c.threads));
  return out.str();
}

std::filesystem::path write_resolved_config(const RunConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  const auto path = config.output_dir / "resolved.cfg";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::configuration, "cannot write " + path.string());
  out << render_config(config);
  return path;
}

}  // namespace nldiff
