#include <doctest.h>

#include <cmath>

#include "laminaire/roots.hpp"

using namespace lam;

namespace {

HoloFn poly_fn(std::vector<cplx> coeffs) {
  return [c = std::move(coeffs)](cplx z) {
    cplx v{0, 0}, d{0, 0};
    for (std::size_t i = c.size(); i-- > 0;) {
      d = d * z + v;
      v = v * z + c[i];
    }
    return std::pair<cplx, cplx>{v, d};
  };
}

}  // namespace

TEST_CASE("winding number counts zeros with multiplicity") {
  const Box b = Box::square(cplx{0, 0}, 1.5);
  CHECK(winding_number(poly_fn({cplx{-1, 0}, {}, {}, cplx{1, 0}}), b) == 3);  // z^3 - 1
  CHECK(winding_number(poly_fn({cplx{0, 0}, {}, cplx{1, 0}}), b) == 2);       // z^2
  CHECK(winding_number(poly_fn({cplx{8, 0}, cplx{1, 0}}), b) == 0);           // z + 8
  // boundary through the only zero: not certifiable
  CHECK(!winding_number(poly_fn({cplx{0, 0}, cplx{1, 0}}), Box{0, 1, 0, 1}).has_value());
}

TEST_CASE("find_roots certifies the cube roots of unity") {
  const RootFindResult res =
      find_roots(poly_fn({cplx{-1, 0}, {}, {}, cplx{1, 0}}), Box::square(cplx{0, 0}, 1.7));
  REQUIRE(res.certified);
  REQUIRE(res.roots.size() == 3);
  CHECK(res.winding_total == 3);
  for (const auto& r : res.roots) {
    CHECK(r.multiplicity == 1);
    CHECK(std::abs(std::abs(r.z) - 1.0) < 1e-12);
    CHECK(std::abs(r.z * r.z * r.z - cplx{1, 0}) < 1e-12);
  }
  // sorted by (re, im)
  CHECK(res.roots[0].z.real() <= res.roots[1].z.real());
  CHECK(res.roots[1].z.real() <= res.roots[2].z.real());
}

TEST_CASE("find_roots reports a double root as one cluster") {
  // Rounded coefficients split the analytic double root into fp roots about
  // 1e-8 apart, so the cluster scale must sit above that.
  RootFindOptions opt;
  opt.isolation = 1e-6;
  const RootFindResult res = find_roots(
      poly_fn({cplx{0.09, 0}, cplx{-0.6, 0}, cplx{1, 0}}),  // (z - 0.3)^2
      Box::square(cplx{0, 0}, 1.0), opt);
  REQUIRE(res.certified);
  REQUIRE(res.roots.size() == 1);
  CHECK(res.roots[0].multiplicity == 2);
  CHECK(std::abs(res.roots[0].z - cplx{0.3, 0}) < 1e-6);
}

TEST_CASE("find_roots handles degree five") {
  const RootFindResult res =
      find_roots(poly_fn({cplx{-5, 0}, {}, {}, {}, {}, cplx{1, 0}}),  // z^5 = 5
                 Box::square(cplx{0, 0}, 2.0));
  REQUIRE(res.certified);
  REQUIRE(res.roots.size() == 5);
  const double mod = std::pow(5.0, 0.2);
  for (const auto& r : res.roots) CHECK(std::abs(std::abs(r.z) - mod) < 1e-12);
}

TEST_CASE("find_roots survives a zero close to the first cut line") {
  // roots straddle the vertical midline of the box at distance 1e-7
  const cplx a{1e-7, 0.0}, b{-1e-7, 0.3};
  const RootFindResult res = find_roots(
      poly_fn({a * b, -(a + b), cplx{1, 0}}), Box::square(cplx{0, 0}, 1.0));
  REQUIRE(res.certified);
  REQUIRE(res.roots.size() == 2);
  CHECK(res.winding_total == 2);
}

TEST_CASE("newton_polish converges quadratically on a simple root") {
  const auto f = poly_fn({cplx{-2, 0}, {}, cplx{1, 0}});  // z^2 - 2
  const auto z = newton_polish(f, cplx{1.4, 0.0}, 1e-15);
  REQUIRE(z.has_value());
  CHECK(std::abs(*z - cplx{std::sqrt(2.0), 0.0}) < 1e-14);
  // a linear function lands exactly in one step
  const auto lin = newton_polish(poly_fn({cplx{-0.5, 0}, cplx{1, 0}}), cplx{0.9, 0.1}, 1e-15);
  REQUIRE(lin.has_value());
  CHECK(lin->real() == 0.5);
  CHECK(lin->imag() == 0.0);
}
