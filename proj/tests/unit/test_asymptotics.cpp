#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nldiff/asymptotics.hpp"
#include "nldiff/error.hpp"
#include "nldiff/fundsol.hpp"

using namespace nldiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Case {
  Grid grid = build_grid(3, 33, 8.0);
  DiscreteKernel dk = discretize(make_kernel(KernelFamily::smooth_bump, 1.0, 3), grid);
  DomainMask mask;
  StationaryProfile profile;
  double alpha = 0.0;

  Case() {
    HoleSet hs;
    HolePrimitive p;
    p.size[0] = 2.0;
    hs.primitives.push_back(p);
    mask = components(rasterize(hs, grid, 1.0), 1.0);
    profile = solve_phi(dk, mask);
    alpha = dk.discrete_alpha();
  }
};

const Case& shared() {
  static const Case c;
  return c;
}

Field ansatz(const Case& c, double t, double mstar, bool with_phi) {
  Field g = gamma_alpha(c.grid, t, c.alpha);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] *= mstar * (with_phi ? c.profile.phi[i] : 1.0);
    if (c.mask.is_hole(i)) g[i] = 0.0;
  }
  return g;
}

MetricsSeries power_law_series(double mstar, double k, double rate) {
  MetricsSeries s;
  for (double t = 1.0; t <= 1000.0 + 1e-9; t *= std::pow(2.0, 0.25)) {
    MetricsRow r;
    r.t = t;
    r.mass = mstar + k * std::pow(t, rate);
    r.weighted_mass = mstar;
    s.rows.push_back(r);
  }
  return s;
}

}  // namespace

TEST_CASE("conservation drift", "[asymptotics]") {
  MetricsSeries s;
  for (double w : {2.0, 2.0 + 1e-9, 2.0 - 3e-9}) {
    MetricsRow r;
    r.weighted_mass = w;
    s.rows.push_back(r);
  }
  CHECK_THAT(conservation_drift(s), WithinRel(1.5e-9, 1e-6));
  for (auto& r : s.rows) r.weighted_mass = 0.0;
  CHECK_THROWS_AS(conservation_drift(s), Error);
}

TEST_CASE("mass prefactor matches radial quadrature", "[asymptotics]") {
  const double alpha = 0.0545757, cstar = 1.8, mstar = 0.55;
  // 4 pi int_0^inf r e^{-r^2/(4 alpha)} dr (4 pi alpha)^{-3/2} by the midpoint rule.
  const double rmax = 40.0 * std::sqrt(alpha);
  const int n = 200000;
  const double h = rmax / n;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double r = (k + 0.5) * h;
    acc += r * std::exp(-r * r / (4.0 * alpha)) * h;
  }
  const double integral = 4.0 * std::numbers::pi * acc *
                          std::pow(4.0 * std::numbers::pi * alpha, -1.5);
  CHECK_THAT(predicted_mass_prefactor(cstar, mstar, alpha, 3),
             WithinRel(cstar * mstar * integral, 1e-8));
}

TEST_CASE("mass decay fit recovers a synthetic power law", "[asymptotics]") {
  const double mstar = 0.5, k = 0.8;
  const MassDecayFit fit = mass_decay_fit(power_law_series(mstar, k, -0.5), mstar, 1.0, 0.05, 3);
  CHECK_THAT(fit.slope, WithinAbs(-0.5, 1e-10));
  CHECK_THAT(fit.k_measured, WithinRel(k, 1e-9));
  CHECK(fit.excess_positive);
  CHECK_THAT(fit.t_hi / fit.t_lo, WithinRel(10.0, 0.2));

  // Scaling all masses by 3 keeps the slope and scales the prefactors.
  const MassDecayFit big =
      mass_decay_fit(power_law_series(3.0 * mstar, 3.0 * k, -0.5), 3.0 * mstar, 1.0, 0.05, 3);
  CHECK_THAT(big.slope, WithinAbs(fit.slope, 1e-12));
  CHECK_THAT(big.k_measured, WithinRel(3.0 * fit.k_measured, 1e-12));
  CHECK_THAT(big.k_predicted, WithinRel(3.0 * fit.k_predicted, 1e-12));
  CHECK(fit.k_predicted == predicted_mass_prefactor(1.0, mstar, 0.05, 3));
}

TEST_CASE("mass decay fit refuses a signal below the noise floor", "[asymptotics]") {
  const MetricsSeries s = power_law_series(0.5, 1e-9, -0.5);
  CHECK_THROWS_AS(mass_decay_fit(s, 0.5, 1.0, 0.05, 3, 1e-8), Error);
}

TEST_CASE("ansatz has zero error", "[asymptotics]") {
  const Case& c = shared();
  const double t = 20.0, mstar = 0.6;
  const Field with = ansatz(c, t, mstar, true);
  CHECK(inner_error(with, t, mstar, c.profile.phi, c.alpha, 0.25, c.mask) <= 1e-15);
  CHECK(global_error(with, t, mstar, c.profile.phi, c.alpha, c.mask) <= 1e-15);
  CHECK(outer_error(with, t, mstar, c.alpha, 0.25, c.mask, &c.profile.phi) <= 1e-15);

  Field bare = gamma_alpha(c.grid, t, c.alpha);
  for (std::size_t i = 0; i < bare.size(); ++i) bare[i] *= mstar;
  CHECK(outer_error(bare, t, mstar, c.alpha, 0.25, c.mask) == 0.0);
}

TEST_CASE("global error splits into inner and outer parts", "[asymptotics]") {
  const Case& c = shared();
  const double t = 20.0, mstar = 0.6;
  Field u = ansatz(c, t, mstar, true);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (c.mask.is_exterior(i)) u[i] *= 1.0 + 0.3 * std::sin(static_cast<double>(i));
  }
  for (double delta : {0.25, 1.0}) {
    const double in = inner_error(u, t, mstar, c.profile.phi, c.alpha, delta, c.mask);
    const double out = outer_error(u, t, mstar, c.alpha, delta, c.mask, &c.profile.phi);
    CHECK_THAT(global_error(u, t, mstar, c.profile.phi, c.alpha, c.mask),
               WithinAbs(std::max(in, out), 1e-15));
  }
}

TEST_CASE("error regions outside the box raise range errors", "[asymptotics]") {
  const Case& c = shared();
  const Field u = ansatz(c, 20.0, 0.6, true);
  CHECK_THROWS_AS(outer_error(u, 1000.0, 0.6, c.alpha, 1.0, c.mask), Error);
  CHECK_THROWS_AS(inner_error(u, 1.0, 0.6, c.profile.phi, c.alpha, 0.25, c.mask), Error);
}

TEST_CASE("compact-set deviation of the ansatz is the Gaussian factor", "[asymptotics]") {
  const Case& c = shared();
  const double t = 50.0, mstar = 0.6, radius = 5.0;
  const Field u = ansatz(c, t, mstar, true);
  const double dev = compact_set_deviation(u, t, mstar, c.profile.phi, c.alpha, radius, c.mask);
  double expect = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!c.mask.is_exterior(i) || c.grid.radius(i) > radius) continue;
    const double g = std::exp(-c.grid.radius_squared(i) / (4.0 * c.alpha * t));
    expect = std::max(expect, c.profile.phi[i] * (1.0 - g));
  }
  CHECK_THAT(dev, WithinAbs(expect, 1e-12));
}

TEST_CASE("elliptic barrier", "[asymptotics]") {
  const Case& c = shared();
  for (double gamma : {0.25, 0.5}) {
    const EllipticBarrierResult r = check_elliptic_barrier(c.dk, c.alpha, gamma, 3.0, 6.0);
    REQUIRE(r.found);
    CHECK(r.b >= 1.0);
    CHECK(r.worst_margin >= 0.0);
    for (const auto& s : r.profile) REQUIRE(s.margin >= 0.0);
    // A larger b keeps the inequality at the sampled radii.
    for (double radius : {3.0, 4.5, 6.0}) {
      REQUIRE(elliptic_excess(c.dk, c.alpha, gamma, 2.0 * r.b, Point{radius, 0, 0, 0}) <= 0.0);
    }
  }
  // Excess improves with b at a fixed far point.
  const Point far{6.0, 0.0, 0.0, 0.0};
  double prev = elliptic_excess(c.dk, c.alpha, 0.25, 1.0, far);
  for (double b : {2.0, 4.0, 8.0, 16.0}) {
    const double e = elliptic_excess(c.dk, c.alpha, 0.25, b, far);
    REQUIRE(e <= prev);
    prev = e;
  }
}

TEST_CASE("parabolic barrier threshold does not shrink with K+", "[asymptotics]") {
  const Case& c = shared();
  ParabolicParams p;
  p.b = 1.0;
  p.R = 0.5;
  const std::vector<double> times{500.0, 1000.0};
  const std::vector<double> cands{0.002, 0.004, 0.006};
  p.k_plus = 1.0;
  const ParabolicBarrierResult one =
      check_parabolic_barrier(c.profile, c.dk, c.mask, c.alpha, p, times, cands);
  p.k_plus = 10.0;
  const ParabolicBarrierResult ten =
      check_parabolic_barrier(c.profile, c.dk, c.mask, c.alpha, p, times, cands);
  REQUIRE(one.found);
  REQUIRE(ten.found);
  CHECK(ten.delta_star >= one.delta_star);
  REQUIRE(one.margins.size() == ten.margins.size());
  for (std::size_t k = 0; k < one.margins.size(); ++k) {
    CHECK(ten.margins[k].plus_margin >= one.margins[k].plus_margin - 1e-15);
  }
}
