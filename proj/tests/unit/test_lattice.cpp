#include <catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "nldiff/error.hpp"
#include "nldiff/lattice.hpp"

using namespace nldiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HoleSet ball_hole(double radius, Point center = {}) {
  HoleSet holes;
  HolePrimitive p;
  p.shape = HoleShape::ball;
  p.center = center;
  p.size[0] = radius;
  holes.primitives.push_back(p);
  return holes;
}

Field random_field(const Grid& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Field f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = dist(rng);
  return f;
}

// Union-find over the same link rule, visiting nodes in reverse order: an
// oracle for the breadth-first labelling that shares no traversal logic.
std::vector<int> union_find_partition(const DomainMask& mask, double radius) {
  const Grid& g = mask.grid();
  std::vector<std::size_t> parent(g.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const double h = g.spacing();
  std::vector<Point> pos(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) pos[i] = g.position(i);
  for (std::size_t ii = g.size(); ii-- > 0;) {
    if (mask.is_hole(ii)) continue;
    const Point& a = pos[ii];
    for (std::size_t j = 0; j < ii; ++j) {
      if (mask.is_hole(j)) continue;
      const Point& b = pos[j];
      double s = 0.0;
      for (int d = 0; d < g.dimension(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
      if (std::sqrt(s) < radius - 1e-12 * h) parent[find(ii)] = find(j);
    }
  }
  std::vector<int> roots(g.size(), -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask.is_hole(i)) roots[i] = static_cast<int>(find(i));
  }
  return roots;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it1, ins1] = ab.try_emplace(a[i], b[i]);
    auto [it2, ins2] = ba.try_emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("build_grid spacing and node counts", "[lattice]") {
  const Grid g = build_grid(3, 65, 16.0);
  CHECK(g.spacing() == 0.5);
  const Grid g2 = build_grid(3, 129, 32.0);
  CHECK(g2.size() == 129u * 129u * 129u);
  CHECK(g2.spacing() == 0.5);
  CHECK(g.coordinate(g.center_index()) == 0.0);
}

TEST_CASE("build_grid rejects even point counts", "[lattice]") {
  try {
    build_grid(3, 64, 16.0);
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
    CHECK(std::string(e.what()).find("odd") != std::string::npos);
  }
}

TEST_CASE("flatten and unflatten are inverse", "[lattice]") {
  const Grid g = build_grid(3, 17, 4.0);
  for (std::size_t i : {0ul, 1ul, 100ul, 4912ul}) CHECK(g.flatten(g.unflatten(i)) == i);
  CHECK(g.radius_squared(g.flatten({8, 8, 8, 0})) == 0.0);
}

TEST_CASE("rasterize classifies holes, exterior and pad", "[lattice]") {
  const Grid g = build_grid(3, 33, 8.0);  // h = 0.5
  const DomainMask empty = rasterize(HoleSet{}, g, 1.0);
  CHECK(empty.count(NodeClass::hole) == 0);

  const DomainMask m = rasterize(ball_hole(2.0), g, 1.0);
  const int c = g.center_index();
  CHECK(m.is_hole(g.flatten({c, c, c, 0})));
  CHECK(m.is_exterior(g.flatten({c + 6, c, c, 0})));  // x = 3
  CHECK(m.is_pad(g.flatten({0, c, c, 0})));
  CHECK(m.count(NodeClass::hole) + m.count(NodeClass::exterior) +
            m.count(NodeClass::outer_pad) ==
        g.size());

  SECTION("disjoint balls add up") {
    const DomainMask a = rasterize(ball_hole(1.5, {-3.0, 0, 0, 0}), g, 1.0);
    const DomainMask b = rasterize(ball_hole(1.5, {3.0, 0, 0, 0}), g, 1.0);
    HoleSet both = ball_hole(1.5, {-3.0, 0, 0, 0});
    both.primitives.push_back(ball_hole(1.5, {3.0, 0, 0, 0}).primitives[0]);
    const DomainMask ab = rasterize(both, g, 1.0);
    CHECK(ab.count(NodeClass::hole) ==
          a.count(NodeClass::hole) + b.count(NodeClass::hole));
  }
  SECTION("idempotent and deterministic") {
    const DomainMask again = rasterize(ball_hole(2.0), g, 1.0);
    CHECK(std::equal(m.classes().begin(), m.classes().end(), again.classes().begin()));
  }
  SECTION("margin violation") {
    CHECK_THROWS_AS(rasterize(ball_hole(2.0, {6.0, 0, 0, 0}), g, 1.0), Error);
  }
}

TEST_CASE("components separate a cavity from the unbounded exterior", "[lattice]") {
  SECTION("no holes gives one unbounded component") {
    const Grid g = build_grid(3, 17, 4.0);
    const DomainMask m = components(rasterize(HoleSet{}, g, 1.0), 1.0);
    CHECK(m.component_count() == 1);
    CHECK(m.unbounded_component() == 0);
  }
  SECTION("spherical shell traps its cavity") {
    const Grid g = build_grid(3, 33, 8.0);
    HoleSet holes;
    HolePrimitive shell;
    shell.shape = HoleShape::shell;
    shell.size[0] = 3.0;
    shell.size[1] = 5.0;
    holes.primitives.push_back(shell);
    const DomainMask m = components(rasterize(holes, g, 1.0, {.enforce_margin = false}), 1.0);
    CHECK(m.component_count() == 2);
    const int c = g.center_index();
    const std::size_t origin = g.flatten({c, c, c, 0});
    CHECK(m.in_bounded_component(origin));
    CHECK(m.is_bounded_component(m.component(origin)));
    CHECK_FALSE(m.in_bounded_component(g.flatten({c + 12, c, c, 0})));
  }
  SECTION("a convex hole leaves a single component, matching union-find") {
    const Grid g = build_grid(3, 17, 4.0);
    const DomainMask m = components(rasterize(ball_hole(1.2), g, 1.0), 1.0);
    CHECK(m.component_count() == 1);
    std::vector<int> labels(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) labels[i] = m.component(i);
    CHECK(same_partition(labels, union_find_partition(m, 1.0)));
  }
  SECTION("labelling is independent of visitation order") {
    const Grid g = build_grid(3, 21, 5.0);  // h = 0.5
    HoleSet holes;
    HolePrimitive shell;
    shell.shape = HoleShape::shell;
    shell.size[0] = 1.5;
    shell.size[1] = 2.6;
    holes.primitives.push_back(shell);
    const DomainMask m = components(rasterize(holes, g, 0.6, {.enforce_margin = false}), 0.6);
    std::vector<int> labels(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) labels[i] = m.component(i);
    CHECK(m.component_count() == 2);
    CHECK(same_partition(labels, union_find_partition(m, 0.6)));
  }
}

TEST_CASE("integrate and weighted_mass", "[lattice]") {
  const Grid g = build_grid(3, 65, 16.0);
  CHECK(integrate(Field(g, 1.0)) == g.cell_volume() * 65.0 * 65.0 * 65.0);
  CHECK(integrate(Field(g, 0.0)) == 0.0);
  Field delta(g);
  delta[g.flatten({32, 32, 32, 0})] = 1.0 / g.cell_volume();
  CHECK_THAT(integrate(delta), WithinRel(1.0, 1e-15));

  const Grid small = build_grid(3, 17, 4.0);
  const Field u = random_field(small, 1);
  const Field w = random_field(small, 2, 0.0, 3.0);
  CHECK(weighted_mass(u, Field(small, 1.0)) == integrate(u));
  CHECK(weighted_mass(Field(small), w) == 0.0);
  CHECK(weighted_mass(u, w) == weighted_mass(w, u));

  SECTION("matches exact rational arithmetic") {
    using boost::multiprecision::cpp_rational;
    cpp_rational exact = 0;
    for (std::size_t i = 0; i < small.size(); ++i) {
      exact += cpp_rational(u[i]) * cpp_rational(w[i]);
    }
    exact *= cpp_rational(small.cell_volume());
    const double ref = static_cast<double>(exact);
    CHECK_THAT(weighted_mass(u, w), WithinRel(ref, 1e-14));
  }
  SECTION("additivity") {
    const Field v = random_field(small, 3);
    Field sum(small);
    for (std::size_t i = 0; i < small.size(); ++i) sum[i] = u[i] + v[i];
    CHECK_THAT(integrate(sum), WithinAbs(integrate(u) + integrate(v),
                                         1e-13 * (std::abs(integrate(u)) + 1.0)));
  }
  SECTION("grid mismatch") {
    CHECK_THROWS_AS(weighted_mass(u, Field(g)), Error);
  }
}

TEST_CASE("radial_profile bins by distance", "[lattice]") {
  const Grid g = build_grid(3, 33, 8.0);
  Field r(g), c(g, 2.5), inv(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    r[i] = g.radius(i);
    inv[i] = 1.0 / (g.radius(i) + 1.0);
  }
  const double bw = 0.75;
  for (const auto& b : radial_profile(r, bw)) {
    CHECK(std::abs(b.mean - b.r_mid) <= bw / 2 + 1e-12);
  }
  for (const auto& b : radial_profile(c, bw)) CHECK(b.mean == 2.5);

  // Independent binning: explicit per-bin scan.
  const auto bins = radial_profile(inv, bw);
  for (const auto& b : bins) {
    const double lo = b.r_mid - bw / 2, hi = b.r_mid + bw / 2;
    double s = 0.0, m = -1.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point x = g.position(i);
      const double ri = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      if (ri >= lo && ri < hi) {
        s += inv[i];
        m = std::max(m, inv[i]);
        ++n;
      }
    }
    REQUIRE(n == b.count);
    CHECK_THAT(b.mean, WithinRel(s / n, 1e-13));
    CHECK(b.max == m);
  }
  CHECK_THROWS_AS(radial_profile(inv, 0.1), Error);
}
