#include <doctest.h>

#include <cmath>

#include "laminaire/geometry.hpp"
#include "laminaire/potential.hpp"

using namespace lam;

TEST_CASE("disk_rect_area quarter and cover") {
  const double quarter = disk_rect_area(cplx{0, 0}, 1.0, 0.0, 1.0, 0.0, 1.0);
  CHECK(quarter == doctest::Approx(M_PI / 4).epsilon(1e-12));
  const double cover = disk_rect_area(cplx{0, 0}, 1.0, -2.0, 2.0, -2.0, 2.0);
  CHECK(cover == doctest::Approx(M_PI).epsilon(1e-12));
  CHECK(disk_rect_area(cplx{0, 0}, 1.0, 2.0, 3.0, 2.0, 3.0) == 0.0);
  const double inside = disk_rect_area(cplx{0, 0}, 1.0, -0.2, 0.2, -0.2, 0.2);
  CHECK(inside == doctest::Approx(0.16).epsilon(1e-14));
}

TEST_CASE("disk_rect_area partitions the disk for any lattice offset") {
  for (double off : {0.0, 0.137, -0.05}) {
    const double h = 0.23;
    double sum = 0.0;
    for (int i = -12; i <= 12; ++i)
      for (int j = -12; j <= 12; ++j) {
        const double x0 = off + i * h, y0 = off + j * h;
        sum += disk_rect_area(cplx{0.3, -0.1}, 1.0, x0, x0 + h, y0, y0 + h);
      }
    CHECK(sum == doctest::Approx(M_PI).epsilon(1e-10));
  }
}

TEST_CASE("cell_index half-open with edge snapping") {
  CHECK(cell_index(0.0, 0.0, 0.5) == 0);
  CHECK(cell_index(0.4999999, 0.0, 0.5) == 0);
  CHECK(cell_index(0.5, 0.0, 0.5) == 1);
  // values within 1e-12 of an edge snap onto it first
  CHECK(cell_index(0.5 - 1e-13, 0.0, 0.5) == 1);
  CHECK(cell_index(-1e-13, 0.0, 0.5) == 0);
  CHECK(cell_index(-0.1, 0.0, 0.5) == -1);
}

TEST_CASE("affine square is half open") {
  const AffineSquare sq{0, cplx{0.0, 0.0}, 1.0, {}};
  CHECK(sq.contains(cplx{0.0, 0.0}));
  CHECK(sq.contains(cplx{0.999, 0.5}));
  CHECK(!sq.contains(cplx{1.0, 0.5}));
  CHECK(!sq.contains(cplx{-0.001, 0.5}));
  CHECK(sq.interior_margin(cplx{0.5, 0.5}) == doctest::Approx(0.5));
  CHECK(sq.interior_margin(cplx{1.2, 0.5}) < 0.0);
  const AffineSquare s = sq.shrink(0.5);
  CHECK(s.r == doctest::Approx(0.5));
  CHECK(s.corner.real() == doctest::Approx(0.25));
}

TEST_CASE("subdivision covers the region and reduces its offset") {
  const Subdivision sub = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.3, {},
                                           cplx{0.95, -0.35});
  CHECK(sub.offset.real() >= 0.0);
  CHECK(sub.offset.real() < 0.3);
  CHECK(sub.offset.imag() >= 0.0);
  CHECK(sub.offset.imag() < 0.3);
  // same structure for offsets differing by lattice vectors
  const Subdivision sub2 = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.3, {},
                                            cplx{0.95 - 0.9, -0.35 + 0.6});
  CHECK(sub.cells == sub2.cells);

  // every point of a sample grid in the region lies in a listed cell
  for (double x = -0.99; x <= 0.99; x += 0.18)
    for (double y = -0.99; y <= 0.99; y += 0.18) {
      if (std::abs(cplx{x, y}) >= 1.0) continue;
      const auto [j, k] = sub.cell_of(cplx{x, y});
      CHECK(sub.has_cell(j, k));
      const AffineSquare sq = sub.square(j, k);
      CHECK(sq.contains(cplx{x, y}));
    }
  // cells are sorted and unique
  for (std::size_t i = 1; i < sub.cells.size(); ++i) CHECK(sub.cells[i - 1] < sub.cells[i]);
}

TEST_CASE("four cube membership and projections") {
  const Subdivision sub = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.5);
  const CubeGrid grid{sub, sub};
  const auto key = grid.bin_of(C2{cplx{0.1, 0.1}, cplx{-0.2, 0.3}});
  REQUIRE(key.has_value());
  const FourCube cube = grid.cube(*key);
  CHECK(cube.contains(C2{cplx{0.1, 0.1}, cplx{-0.2, 0.3}}));
  CHECK(!cube.contains(C2{cplx{0.1 + 0.5, 0.1}, cplx{-0.2, 0.3}}));
  CHECK(!grid.bin_of(C2{cplx{5.0, 0.0}, cplx{0.0, 0.0}}).has_value());
}

TEST_CASE("bin_measure counts overflow and binned_distance is an L1 norm") {
  const Subdivision sub = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.5);
  const CubeGrid grid{sub, sub};
  AtomicMeasure a;
  a.add(C2{cplx{0.1, 0.1}, cplx{0.1, 0.1}}, 0.5);
  a.add(C2{cplx{3.0, 0.0}, cplx{0.0, 0.0}}, 0.25);  // outside every cell
  const BinnedMass ba = bin_measure(a, grid);
  CHECK(ba.overflow == doctest::Approx(0.25));
  CHECK(ba.total() == doctest::Approx(0.75));

  AtomicMeasure b;
  b.add(C2{cplx{0.1, 0.1}, cplx{0.1, 0.1}}, 0.125);
  CHECK(binned_distance(a, a, grid) == 0.0);
  CHECK(binned_distance(a, b, grid) == doctest::Approx(0.375 + 0.25));
  CHECK(binned_distance(b, a, grid) == binned_distance(a, b, grid));
}

TEST_CASE("atomic measure accumulates mass and rejects negative weights") {
  AtomicMeasure m;
  m.add(C2{cplx{0, 0}, cplx{0, 0}}, 0.5);
  m.add(C2{cplx{1, 0}, cplx{0, 1}}, 0.5);
  CHECK(m.mass() == 1.0);
  CHECK(m.size() == 2);
  CHECK_THROWS_AS(m.add(C2{}, -0.1), error);
}
