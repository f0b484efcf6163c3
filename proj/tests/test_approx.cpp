#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "laminaire/approx.hpp"

using namespace lam;

namespace {

CurveIterate straight_line() {
  CurveIterate c;
  c.eval = [](cplx t) {
    return std::pair<C2, C2>{C2{t, cplx{0.25, 0.0}}, C2{cplx{1, 0}, cplx{0, 0}}};
  };
  c.degree = 1.0;
  c.param_box = Box::square(cplx{0, 0}, 1.6);
  c.label = "line";
  return c;
}

CurveIterate parabola_pair() {
  // t -> (t^2, t): degree two over the z-base, branch point at the origin
  CurveIterate c;
  c.eval = [](cplx t) {
    return std::pair<C2, C2>{C2{t * t, t}, C2{2.0 * t, cplx{1, 0}}};
  };
  c.degree = 2.0;
  c.param_box = Box::square(cplx{0, 0}, 1.3);
  c.label = "parabola";
  return c;
}

}  // namespace

TEST_CASE("curve iterates satisfy the Cauchy-Riemann residual check") {
  CHECK(straight_line().cr_residual() < 1e-9);
  CHECK(parabola_pair().cr_residual() < 1e-9);
}

TEST_CASE("classification of a straight line is all good with conservation") {
  const Subdivision cells = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.5, {},
                                             cplx{0.1, 0.1});
  const Classification cls = classify_components(straight_line(), chart_zw(), cells);
  REQUIRE(cls.certified);
  CHECK(!cls.components.empty());
  for (const auto& comp : cls.components) {
    CHECK(comp.good);
    CHECK(comp.degree == 1);
  }
  CHECK(cls.bad_area_proj == 0.0);
  CHECK(cls.total_area_proj == doctest::Approx(cls.good_area_proj).epsilon(1e-15));
  const DefectReport d = defect_mass(cls, 1.0);
  CHECK(d.normalized_defect == 0.0);
}

TEST_CASE("branch point cell goes bad, everything stays conserved") {
  const Subdivision cells = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.4, {},
                                             cplx{0.2, 0.2});
  const Classification cls = classify_components(parabola_pair(), chart_zw(), cells);
  REQUIRE(cls.certified);
  bool found_bad = false, found_good = false;
  for (const auto& comp : cls.components) {
    if (comp.good) {
      found_good = true;
      CHECK(comp.degree == 1);
    } else if (comp.degree >= 2) {
      found_bad = true;
    }
  }
  CHECK(found_good);
  CHECK(found_bad);
  CHECK(cls.good_area_proj + cls.bad_area_proj ==
        doctest::Approx(cls.total_area_proj).epsilon(1e-12));
  CHECK(cls.bad_area_proj > 0.0);
}

TEST_CASE("sheet graphs reproduce the curve over good components") {
  const Subdivision cells = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.5, {},
                                             cplx{0.1, 0.1});
  const SheetFamily fam =
      build_uniform_pieces(straight_line(), chart_zw(), chart_wz(), cells, cells);
  CHECK(fam.defect.normalized_defect == 0.0);
  REQUIRE(!fam.pieces.empty());
  std::size_t disks = 0;
  for (const auto& piece : fam.pieces)
    for (const auto& wd : piece.disks) {
      ++disks;
      const cplx zeta = wd.disk.base.center();
      const auto [val, der] = wd.disk.graph(zeta);
      CHECK(std::abs(val - cplx{0.25, 0.0}) < 1e-10);  // w = 0.25 everywhere
      CHECK(std::abs(der) < 1e-8);
      CHECK(wd.weight == 1.0);
    }
  CHECK(disks == cells.size());
}

TEST_CASE("translate search sees no escape when atoms sit at cell centers") {
  const Subdivision sub = make_subdivision(BaseRegion::rect(-1, 1, -1, 1), 0.5);
  const CubeGrid grid{sub, sub};
  AtomicMeasure nu;
  for (double x : {-0.75, -0.25, 0.25, 0.75})
    for (double s : {-0.75, 0.25}) nu.add(C2{cplx{x, x}, cplx{s, -s}}, 0.125);
  const TranslateReport tr = translate_search(nu, grid, 0.9);
  CHECK(tr.min_escaped == 0.0);
  CHECK(tr.expected_escape == doctest::Approx((1.0 - std::pow(0.9, 4.0)) * 1.0));
  CHECK(tr.avg_escaped >= 0.0);
  CHECK(tr.avg_escaped <= 1.0);
  // the winning offset recenters the lattice onto the atoms
  const TranslateReport tight = translate_search(nu, grid, 0.2);
  CHECK(tight.min_escaped <= tight.avg_escaped);
}

TEST_CASE("translate search on a density matches the atomic version roughly") {
  // uniform density over the square against a matching uniform cloud
  const double h = 0.1;
  const Polydisk dom{C2{cplx{0, 0}, cplx{0, 0}}, 1.0, 1.0};
  Grid4 dens = Grid4::shape(dom, h, "uniform");
  std::fill(dens.v.begin(), dens.v.end(), 1.0 / (M_PI * M_PI));
  const WedgeRegion region = WedgeRegion::polydisk(Polydisk{C2{cplx{0, 0}, cplx{0, 0}}, 0.9, 0.9});
  const TranslateReport tr = translate_search_density(dens, region, 0.45, 0.8);
  // region mass: (1/pi^2) * (pi * 0.81)^2
  CHECK(tr.expected_escape ==
        doctest::Approx((1.0 - std::pow(0.8, 4.0)) * 0.81 * 0.81).epsilon(1e-6));
  CHECK(tr.avg_escaped == doctest::Approx(tr.expected_escape).epsilon(0.05));
  CHECK(tr.min_escaped <= tr.avg_escaped + 1e-12);
}
