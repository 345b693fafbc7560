#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nldiff/error.hpp"
#include "nldiff/kernel.hpp"

using namespace nldiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Field random_field(const Grid& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Field f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = dist(rng);
  return f;
}

// Brute-force K*f: loop over every node pair within the stencil.
Field brute_convolve(const DiscreteKernel& dk, const Field& f) {
  const Grid& g = f.grid();
  Field out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index a = g.unflatten(i);
    long double acc = 0.0L;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Index b = g.unflatten(j);
      Index o{};
      for (int d = 0; d < g.dimension(); ++d) o[d] = b[d] - a[d];
      const double w = dk.weight_at(o);
      if (w != 0.0) acc += static_cast<long double>(w) * f[j];
    }
    out[i] = static_cast<double>(acc);
  }
  return out;
}

double rel_sup_diff(const Field& a, const Field& b) {
  double d = 0.0, m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    m = std::max(m, std::abs(b[i]));
  }
  return d / m;
}

// Composite Simpson on [0, R] with n panels; a different rule from the
// library's adaptive Gauss-Kronrod.
double simpson(const std::function<double(double)>& f, double R, int n) {
  const double h = R / n;
  double s = f(0.0) + f(R);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(k * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("make_kernel satisfies the admissibility invariants", "[kernel]") {
  for (auto family : {KernelFamily::smooth_bump, KernelFamily::polynomial_compact}) {
    const KernelSpec spec = make_kernel(family, 1.0, 3);
    CHECK(spec.value_at_radius(0.0) > 0.0);
    CHECK(spec.value_at_radius(1.0) == 0.0);
    CHECK(spec.value_at_radius(1.5) == 0.0);
    const auto f = [&](double r) { return spec.value_at_radius(r) * r * r; };
    CHECK_THAT(4.0 * std::numbers::pi * simpson(f, 1.0, 20000), WithinAbs(1.0, 1e-10));
  }
  CHECK_THROWS_AS(make_kernel("gaussian", 1.0, 3), Error);
  try {
    make_kernel(KernelFamily::smooth_bump, 1.0, 2);
    FAIL("expected unsupported dimension");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_dimension);
  }
}

TEST_CASE("diffusivity", "[kernel]") {
  SECTION("uniform ball in 3D has alpha = 1/10") {
    const auto uniform = [](double r) { return r < 1.0 ? 1.0 : 0.0; };
    // Closed form: (1/6) * (int r^4) / (int r^2) = (1/6)(1/5)/(1/3).
    const double closed = (1.0 / 6.0) * (1.0 / 5.0) / (1.0 / 3.0);
    const auto num = [](double r) { return r * r * r * r; };
    const auto den = [](double r) { return r * r; };
    CHECK_THAT(simpson(num, 1.0, 1000) / simpson(den, 1.0, 1000) / 6.0,
               WithinRel(closed, 1e-12));
    CHECK_THAT(diffusivity_of_profile(uniform, 1.0, 3), WithinRel(0.1, 1e-10));
  }
  SECTION("rescaling the support scales alpha by r^2") {
    const double a1 = diffusivity(make_kernel(KernelFamily::smooth_bump, 1.0, 3));
    const double a2 = diffusivity(make_kernel(KernelFamily::smooth_bump, 2.5, 3));
    CHECK_THAT(a2, WithinRel(6.25 * a1, 1e-10));
    CHECK(a1 > 0.0);
  }
  SECTION("independent tanh-sinh quadrature agrees to 1e-8") {
    for (int dim : {3, 4}) {
      const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, dim);
      boost::math::quadrature::tanh_sinh<double> ts;
      const auto p = [&](double r) { return kernel_profile(spec.family, r); };
      const double m2 = ts.integrate([&](double r) { return p(r) * std::pow(r, dim + 1); }, 0.0, 1.0);
      const double m0 = ts.integrate([&](double r) { return p(r) * std::pow(r, dim - 1); }, 0.0, 1.0);
      CHECK_THAT(diffusivity(spec), WithinRel(m2 / m0 / (2.0 * dim), 1e-8));
    }
    const KernelSpec poly = make_kernel(KernelFamily::polynomial_compact, 1.0, 3);
    // (1-s^2)^4: B(5/2, 5) / B(3/2, 5) = 3/13.
    CHECK_THAT(diffusivity(poly), WithinRel(3.0 / 13.0 / 6.0, 1e-10));
  }
}

TEST_CASE("discretize", "[kernel]") {
  const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, 3);
  const Grid g = build_grid(3, 17, 2.0);  // h = 0.25
  const DiscreteKernel dk = discretize(spec, g);

  const auto w = dk.weights();
  double forward = 0.0, backward = 0.0;
  for (double v : w) forward += v;
  for (auto it = w.rbegin(); it != w.rend(); ++it) backward += *it;
  CHECK(forward == 1.0);
  CHECK(backward == 1.0);
  CHECK(std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0; }));
  for (const Index& o : dk.offsets()) {
    const Index neg{-o[0], -o[1], -o[2], 0};
    CHECK(dk.weight_at(o) == dk.weight_at(neg));
  }
  CHECK(dk.spectrum().values[0] == 1.0);
  // The lattice second moment tracks the continuous one.
  CHECK_THAT(dk.discrete_alpha(), WithinRel(dk.alpha(), 5e-3));

  SECTION("under-resolved support") {
    const Grid coarse = build_grid(3, 17, 8.0);  // h = 1
    CHECK_THROWS_AS(discretize(spec, coarse), Error);
  }
}

TEST_CASE("convolve", "[kernel]") {
  const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, 3);
  const Grid g = build_grid(3, 17, 3.2);  // h = 0.4, reach 2
  const DiscreteKernel dk = discretize(spec, g);

  SECTION("constant field stays constant away from the box edge") {
    const Field out = convolve(dk, Field(g, 3.0));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Index idx = g.unflatten(i);
      bool interior = true;
      for (int d = 0; d < 3; ++d) interior = interior && idx[d] >= 3 && idx[d] <= 13;
      if (interior) CHECK_THAT(out[i], WithinRel(3.0, 1e-15));
    }
  }
  SECTION("delta reproduces the weights") {
    Field delta(g);
    const int c = g.center_index();
    delta[g.flatten({c, c, c, 0})] = 1.0;
    const Field out = convolve(dk, delta);
    const Field ref = kernel_as_field(dk);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(out[i] == ref[i]);
  }
  SECTION("direct and spectral paths match brute force") {
    const Field f = random_field(g, 7);
    const Field ref = brute_convolve(dk, f);
    CHECK(rel_sup_diff(convolve(dk, f, ConvolutionMethod::direct), ref) <= 1e-12);
    CHECK(rel_sup_diff(convolve(dk, f, ConvolutionMethod::spectral), ref) <= 1e-12);
  }
  SECTION("linearity, positivity, sup-norm, mass leakage") {
    const Field f = random_field(g, 11);
    const Field h = random_field(g, 12);
    const double a = 0.7, b = -1.3;
    Field comb(g);
    for (std::size_t i = 0; i < g.size(); ++i) comb[i] = a * f[i] + b * h[i];
    const Field kf = convolve(dk, f), kh = convolve(dk, h), kc = convolve(dk, comb);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, std::abs(kc[i] - (a * kf[i] + b * kh[i])));
    }
    CHECK(err <= 1e-12);

    const Field pos = random_field(g, 13, 0.0, 1.0);
    const Field kp = convolve(dk, pos);
    CHECK(kp.min() >= 0.0);
    CHECK(kp.max_abs() <= pos.max_abs());
    CHECK(convolve(dk, f).max_abs() <= f.max_abs());

    // Leakage is confined to the one-support-radius outer shell.
    const double L = g.extent(), r = spec.support_radius;
    const double shell = std::pow(2 * L, 3) - std::pow(2 * (L - r), 3);
    CHECK(std::abs(integrate(kp) - integrate(pos)) <= pos.max_abs() * shell);
  }
  SECTION("grid mismatch") {
    CHECK_THROWS_AS(convolve(dk, Field(build_grid(3, 19, 3.2))), Error);
  }
}

TEST_CASE("convolution_power", "[kernel]") {
  const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, 3);
  const Grid g = build_grid(3, 17, 3.2);
  const DiscreteKernel dk = discretize(spec, g);

  const DiscreteKernel one = convolution_power(dk, 1);
  CHECK(std::equal(one.weights().begin(), one.weights().end(), dk.weights().begin()));

  const DiscreteKernel two = convolution_power(dk, 2);
  const Field direct = convolve(dk, kernel_as_field(dk), ConvolutionMethod::direct);
  const Field via_power = kernel_as_field(two);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(direct[i] - via_power[i]));
  CHECK(err <= 1e-12);

  const Grid big = build_grid(3, 65, 12.8);  // h = 0.4, padded period 135
  const DiscreteKernel dkb = discretize(spec, big);
  for (int n : {2, 3, 7, 16, 33}) {
    const DiscreteKernel p = convolution_power(dkb, n);
    double s = 0.0;
    for (double v : p.weights()) s += v;
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
    CHECK_THAT(p.discrete_alpha(), WithinRel(n * dkb.discrete_alpha(), 1e-10));
  }
  CHECK_THROWS_AS(convolution_power(dkb, 40), Error);
}

TEST_CASE("assemble_dense matches the convolution path", "[kernel]") {
  const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, 3);
  const Grid g = build_grid(3, 9, 1.6);  // h = 0.4
  const DiscreteKernel dk = discretize(spec, g);
  HoleSet holes;
  HolePrimitive p;
  p.size[0] = 0.2;
  holes.primitives.push_back(p);
  const DomainMask mask = rasterize(holes, g, 1.0, {.enforce_margin = false});
  REQUIRE(mask.count(NodeClass::hole) == 1);

  const Eigen::MatrixXd a = assemble_dense(dk, mask);
  Eigen::MatrixXd k = a;
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    if (!mask.is_hole(static_cast<std::size_t>(i))) k(i, i) += 1.0;
  }
  // K is symmetric on rows and columns outside the hole.
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (mask.is_hole(i) || mask.is_hole(j)) continue;
      CHECK(k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mask.is_hole(i)) continue;
    CHECK(a.row(static_cast<Eigen::Index>(i)).sum() <= 1e-15);
  }

  const Field f = random_field(g, 5);
  const Eigen::VectorXd af = a * Eigen::Map<const Eigen::VectorXd>(f.values().data(), f.size());
  std::vector<double> out(g.size());
  apply_generator(dk, mask, f.values(), out);
  const Field kf = convolve(dk, f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expect = mask.is_hole(i) ? 0.0 : kf[i] - f[i];
    CHECK_THAT(af(static_cast<Eigen::Index>(i)), WithinAbs(expect, 1e-13));
    CHECK_THAT(out[i], WithinAbs(expect, 1e-13));
  }
  CHECK_THROWS_AS(assemble_dense(dk, mask, PadPolicy::evolve, 100), Error);
}

TEST_CASE("interior row sums of the generator vanish", "[kernel]") {
  const KernelSpec spec = make_kernel(KernelFamily::smooth_bump, 1.0, 3);
  const Grid g = build_grid(3, 13, 2.4);  // h = 0.4
  const DiscreteKernel dk = discretize(spec, g);
  const DomainMask mask = rasterize(HoleSet{}, g, 1.0);
  const Eigen::MatrixXd a = assemble_dense(dk, mask);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = a.row(static_cast<Eigen::Index>(i)).sum();
    if (mask.is_exterior(i)) {
      CHECK(s == 0.0);
    } else {
      CHECK(s <= 0.0);
    }
  }
}
