#include <doctest.h>

#include <cmath>

#include "laminaire/potential.hpp"

using namespace lam;

namespace {

const C2 kOrigin{cplx{0, 0}, cplx{0, 0}};

Grid4 quad_grid(double h, double R) {
  return sample_potential([](const C2& p) { return norm2(p); },
                          Polydisk{kOrigin, R, R}, h, "quad");
}

CubeGrid one_cell_bins(double half) {
  const Subdivision s = make_subdivision(BaseRegion::disk(cplx{0, 0}, half), 2 * half, {},
                                         cplx{-half, -half});
  return CubeGrid{s, s};
}

}  // namespace

TEST_CASE("complex hessian is exact on quadratics") {
  const Grid4 g = quad_grid(0.25, 1.0);
  const ComplexHessian H = complex_hessian(g, g.nx / 2, g.ny / 2, g.ns / 2, g.nt / 2);
  CHECK(H.zz == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(H.ww == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(H.zw) < 1e-10);

  // u = Re(z * conj(w)) has zz = ww = 0 and zw = 1/2
  const Grid4 m = sample_potential(
      [](const C2& p) { return (p.z * std::conj(p.w)).real(); },
      Polydisk{kOrigin, 1.0, 1.0}, 0.25, "mixed");
  const ComplexHessian Hm = complex_hessian(m, m.nx / 2, m.ny / 2, m.ns / 2, m.nt / 2);
  CHECK(std::abs(Hm.zz) < 1e-10);
  CHECK(std::abs(Hm.ww) < 1e-10);
  CHECK(std::abs(Hm.zw - cplx{0.5, 0.0}) < 1e-10);
}

TEST_CASE("mixed density constants for model pairs") {
  const double h = 0.2;
  const Grid4 q = quad_grid(h, 1.0);
  const Grid4 dq = mixed_ma_density(q, q);
  // (4/pi^2)(1*1 + 1*1) everywhere
  CHECK(dq.v[dq.idx(dq.nx / 2, dq.ny / 2, dq.ns / 2, dq.nt / 2)] ==
        doctest::Approx(8.0 / (M_PI * M_PI)).epsilon(1e-9));

  const Grid4 uz = sample_potential([](const C2& p) { return std::norm(p.z); },
                                    Polydisk{kOrigin, 1.0, 1.0}, h, "zz");
  const Grid4 uw = sample_potential([](const C2& p) { return std::norm(p.w); },
                                    Polydisk{kOrigin, 1.0, 1.0}, h, "ww");
  const Grid4 dm = mixed_ma_density(uz, uw);
  CHECK(dm.v[dm.idx(dm.nx / 2, dm.ny / 2, dm.ns / 2, dm.nt / 2)] ==
        doctest::Approx(4.0 / (M_PI * M_PI)).epsilon(1e-9));

  // pluriharmonic factor kills the density
  const Grid4 ph = sample_potential([](const C2& p) { return (p.z * p.z + p.z * p.w).real(); },
                                    Polydisk{kOrigin, 1.0, 1.0}, h, "pluri");
  const Grid4 dp = mixed_ma_density(ph, q);
  CHECK(std::abs(dp.v[dp.idx(dp.nx / 2, dp.ny / 2, dp.ns / 2, dp.nt / 2)]) < 1e-9);
}

TEST_CASE("mollify drops support layers and fixes quadratics up to a constant") {
  const Grid4 g = quad_grid(0.2, 2.0);
  const Grid4 m = mollify(g, 0.4);  // ceil(3 * 0.4 / 0.2) = 6 layers per side
  CHECK(m.nx == g.nx - 12);
  CHECK(m.h == g.h);
  // nodes keep the lattice: x of the first kept node
  CHECK(m.x(0) == doctest::Approx(g.x(6)).epsilon(1e-14));
  // Hessian of the mollified quadratic is unchanged
  const ComplexHessian H = complex_hessian(m, m.nx / 2, m.ny / 2, m.ns / 2, m.nt / 2);
  CHECK(H.zz == doctest::Approx(1.0).epsilon(1e-9));
  // the added constant is the kernel's second moment, equal at every node
  const double c0 = m.v[m.idx(m.nx / 2, m.ny / 2, m.ns / 2, m.nt / 2)] -
                    norm2(m.node(m.nx / 2, m.ny / 2, m.ns / 2, m.nt / 2));
  const double c1 = m.v[m.idx(1, 2, 3, 1)] - norm2(m.node(1, 2, 3, 1));
  CHECK(c0 == doctest::Approx(c1).epsilon(1e-8));
  CHECK(c0 > 0.0);
}

TEST_CASE("quadratic wedge mass equals eight over the unit polydisk") {
  const double h = 0.2;
  const Grid4 g = quad_grid(h, 1.0 + 8 * h);
  const WedgeResult w =
      wedge_by_potentials(g, g, {2 * h, h}, one_cell_bins(1.0),
                          WedgeRegion::polydisk(Polydisk{kOrigin, 1.0, 1.0}));
  CHECK(w.measure.total() == doctest::Approx(8.0).epsilon(1e-6));
  CHECK(w.measure.overflow == 0.0);

  const Grid4 uz = sample_potential([](const C2& p) { return std::norm(p.z); },
                                    Polydisk{kOrigin, 1.0 + 8 * h, 1.0 + 8 * h}, h, "zz");
  const Grid4 uw = sample_potential([](const C2& p) { return std::norm(p.w); },
                                    Polydisk{kOrigin, 1.0 + 8 * h, 1.0 + 8 * h}, h, "ww");
  const WedgeResult wm =
      wedge_by_potentials(uz, uw, {2 * h, h}, one_cell_bins(1.0),
                          WedgeRegion::polydisk(Polydisk{kOrigin, 1.0, 1.0}));
  CHECK(wm.measure.total() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("log pole wedged with the round factor gives its Riesz mass") {
  // u = log|z - a| carries a unit point mass in the z-plane; v = |w|^2
  // contributes 2 per unit w-area, so the polydisk total is 2.
  const double h = 0.1;
  const cplx a{0.0137, 0.0137};
  const Grid4 gu = sample_potential(
      [a](const C2& p) { return std::log(std::abs(p.z - a)); },
      Polydisk{kOrigin, 1.0 + 8 * h, 1.0 + 8 * h}, h, "log");
  const Grid4 gv = sample_potential([](const C2& p) { return std::norm(p.w); },
                                    Polydisk{kOrigin, 1.0 + 8 * h, 1.0 + 8 * h}, h, "round");
  const WedgeResult w =
      wedge_by_potentials(gu, gv, {2 * h, h}, one_cell_bins(1.0),
                          WedgeRegion::polydisk(Polydisk{kOrigin, 1.0, 1.0}));
  CHECK(w.measure.total() == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("wedge rejects regions that fail to fit after mollification") {
  const double h = 0.2;
  const Grid4 g = quad_grid(h, 1.0);  // no margin for the support layers
  CHECK_THROWS_AS(wedge_by_potentials(g, g, {2 * h, h}, one_cell_bins(1.0),
                                      WedgeRegion::polydisk(Polydisk{kOrigin, 1.0, 1.0})),
                  error);
}

TEST_CASE("modulus of continuity grows with the radius") {
  const Grid4 g = quad_grid(0.2, 1.0);
  const double m1 = modulus_of_continuity(g, 0.2);
  const double m2 = modulus_of_continuity(g, 0.4);
  const double m3 = modulus_of_continuity(g, 0.8);
  CHECK(m1 > 0.0);
  CHECK(m1 <= m2);
  CHECK(m2 <= m3);
  // |z|^2 + |w|^2 on the unit polydisk moves at most ~2 * sqrt(2) * r + r^2
  CHECK(m2 <= 2 * std::sqrt(2.0) * 0.4 + 0.4 * 0.4 + 1e-9);
}

TEST_CASE("plateau function is one on the core and zero outside") {
  const Subdivision s = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 1.0);
  const CubeGrid grid{s, s};
  const auto key = grid.bin_of(C2{cplx{0.5, 0.5}, cplx{0.5, 0.5}});
  REQUIRE(key.has_value());
  const FourCube cube = grid.cube(*key);
  const PlateauFunction chi = plateau_function(cube, 0.6);
  CHECK(chi(cube.center()) == doctest::Approx(1.0).epsilon(1e-12));
  // corner of the cube is outside the ramp
  const C2 corner = Chart{cube.p1, cube.p2}.embed(
      cube.s1.iso.apply(cube.s1.corner), cube.s2.iso.apply(cube.s2.corner));
  CHECK(chi(corner) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(chi.hessian_bound > 0.0);
}
