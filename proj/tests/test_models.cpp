#include <doctest.h>

#include <cmath>

#include "laminaire/models.hpp"

using namespace lam;

TEST_CASE("henon map inverts exactly and escapes past its radius") {
  const HenonMap f = default_henon();
  CHECK(f.degree() == 2);
  const C2 p{cplx{0.3, -0.7}, cplx{1.1, 0.2}};
  const C2 q = f.apply_inverse(f.apply(p));
  CHECK(std::abs(q.z - p.z) < 1e-14);
  CHECK(std::abs(q.w - p.w) < 1e-14);

  // once past the escape radius the z-coordinate grows monotonically
  C2 x{cplx{f.escape_radius() + 0.5, 0.0}, cplx{0.0, 0.0}};
  double prev = std::abs(x.z);
  for (int i = 0; i < 5; ++i) {
    x = f.apply(x);
    CHECK(std::abs(x.z) > prev);
    prev = std::abs(x.z);
  }
}

TEST_CASE("henon green obeys the functional equation") {
  const HenonMap f = default_henon();
  for (const C2& x : {C2{cplx{0.2, 0.1}, cplx{-0.4, 0.3}}, C2{cplx{2.5, 0.0}, cplx{1.0, 1.0}},
                      C2{cplx{-1.1, 0.6}, cplx{0.3, -0.2}}}) {
    const double g = henon_green(f, +1, x);
    const double gf = henon_green(f, +1, f.apply(x));
    CHECK(gf == doctest::Approx(2.0 * g).epsilon(1e-6));
    const double gm = henon_green(f, -1, x);
    const double gmf = henon_green(f, -1, f.apply_inverse(x));
    CHECK(gmf == doctest::Approx(2.0 * gm).epsilon(1e-6));
  }
}

TEST_CASE("henon green matches log|z| far away") {
  const HenonMap f = default_henon();
  const double g = henon_green(f, +1, C2{cplx{1e6, 0.0}, cplx{0.0, 0.0}});
  CHECK(g == doctest::Approx(std::log(1e6)).epsilon(1e-6));
}

TEST_CASE("first iterated line measures are exact") {
  const HenonMap f = default_henon();
  const Line L{C2{cplx{0, 0}, cplx{0, 0}}, C2{cplx{1, 0}, cplx{0, 0}}};
  const Line Lp{C2{cplx{0.1, 0}, cplx{0, 0}}, C2{cplx{0, 0}, cplx{1, 0}}};
  const LineMeasure m1 = iterated_line_measure(f, L, Lp, 1);
  CHECK(m1.expected == 4);
  CHECK(m1.found == 4);
  CHECK(m1.mu.size() == 4);
  CHECK(m1.mu.mass() == 1.0);
  // every atom of f(L) cap f^{-1}(L') maps into L' under f
  for (const auto& a : m1.mu.atoms()) {
    const C2 img = f.apply(a.p);
    CHECK(std::abs(img.z - cplx{0.1, 0.0}) < 1e-9);
  }
  const LineMeasure m2 = iterated_line_measure(f, L, Lp, 2);
  CHECK(m2.expected == 16);
  CHECK(m2.mu.size() == 16);
  CHECK(m2.mu.mass() == 1.0);
}

TEST_CASE("pencil fixture carries its exact product measure") {
  const PencilFixture fx = transverse_pencils();
  CHECK(fx.horizontal.size() == 1);
  CHECK(fx.horizontal[0].disks.size() == 3);
  CHECK(fx.product.size() == 9);
  CHECK(fx.product.mass() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fx.horizontal[0].mass() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("demailly potential is the max of clipped logs") {
  const DemaillyModel m = demailly_current();
  CHECK(m.potential(C2{cplx{0, 0}, cplx{0, 0}}) == 0.0);
  CHECK(m.potential(C2{cplx{2, 0}, cplx{0, 0}}) == doctest::Approx(std::log(2.0)));
  CHECK(m.potential(C2{cplx{0.5, 0}, cplx{0, -3}}) == doctest::Approx(std::log(3.0)));
  CHECK(m.decomposition.size() == 3);
  for (const auto& fam : m.decomposition)
    CHECK(fam.mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cantor product potentials match their defining sums") {
  const CantorProduct cp = cantor_product_currents();
  REQUIRE(cp.points.size() == 8);
  REQUIRE(cp.weights.size() == 8);
  const C2 p{cplx{0.123, -0.456}, cplx{0.789, 0.1}};
  double uh = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < cp.points.size(); ++i) {
    uh += cp.weights[i] * std::log(std::abs(p.w - cp.points[i]));
    uv += cp.weights[i] * std::log(std::abs(p.z - cp.points[i]));
  }
  CHECK(cp.u_h(p) == doctest::Approx(uh).epsilon(1e-14));
  CHECK(cp.u_v(p) == doctest::Approx(uv).epsilon(1e-14));
  CHECK(cp.product.mass() == 1.0);
}

TEST_CASE("equilibrium potential is constant on the stage intervals") {
  const OneDimGreen g = equilibrium_green(3);
  double total = 0.0;
  for (double q : g.charges) total += q;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  // raw potential vanishes (robin subtracted) at interval midpoints, up to
  // the point-charge wiggle of order (interval mass)/(nodes per interval)
  const auto worst_mid = [](const OneDimGreen& gg) {
    double worst = 0.0;
    for (const auto& [a, b] : gg.intervals)
      worst = std::max(worst, std::abs(gg.raw(cplx{(a + b) / 2, 0.0})));
    return worst;
  };
  const double w48 = worst_mid(g);
  CHECK(w48 < 0.05);
  // refining the charges shrinks the wiggle
  CHECK(worst_mid(equilibrium_green(3, 384)) < 0.5 * w48);
  // clipped version is 0 on K and positive in the far gap
  CHECK(g(cplx{(g.intervals[0].first + g.intervals[0].second) / 2, 0.0}) <= 0.05);
  CHECK(g(cplx{0.5, 0.0}) > 0.05);
}

TEST_CASE("interval green matches the closed form limit") {
  // G of [0,1] vanishes on the set and grows like log|z| + log 4
  CHECK(interval_green(cplx{0.5, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(interval_green(cplx{0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(interval_green(cplx{1e6, 0.0}) ==
        doctest::Approx(std::log(1e6) + std::log(4.0)).epsilon(1e-5));
  // depth-0 equilibrium stage approximates it away from the endpoints
  const OneDimGreen g0 = equilibrium_green(0);
  for (double x : {-0.5, 2.0}) {
    CHECK(g0(cplx{x, 0.0}) == doctest::Approx(interval_green(cplx{x, 0.0})).epsilon(5e-3));
  }
}

TEST_CASE("max green fixture exposes its one dimensional stage") {
  const MaxGreenModel m = max_green_current(3);
  CHECK(m.g.depth == 3);
  CHECK(m.g.intervals.size() == 8);
  const cplx z{0.37, 0.21};
  CHECK(m.potential(C2{z, cplx{0.1, 0.0}}) == doctest::Approx(std::max(m.g(z), m.g(cplx{0.1, 0.0}))));
}

TEST_CASE("max green wedge concentrates unit mass on the product set") {
  // coarse-charge stage keeps the sampling cheap; the Riesz masses still
  // multiply to one
  const OneDimGreen g1 = equilibrium_green(2, 16);
  const PotentialFn u = [g1](const C2& p) { return std::max(g1(p.z), g1(p.w)); };
  const double h = 0.1;
  const C2 c{cplx{0.5, 0.0}, cplx{0.5, 0.0}};
  const double R = 1.0 + 8 * h;
  const Grid4 g = sample_potential(u, Polydisk{c, R, R}, h, "max_green_coarse");
  const Subdivision s = make_subdivision(BaseRegion::disk(cplx{0.5, 0.0}, 1.0), 0.5);
  const WedgeResult w =
      wedge_by_potentials(g, g, {2 * h, h}, CubeGrid{s, s},
                          WedgeRegion::polydisk(Polydisk{c, 1.0, 1.0}));
  CHECK(w.measure.total() == doctest::Approx(1.0).epsilon(0.1));
}
