#include "laminaire/geometry.hpp"

#include <algorithm>

namespace lam {

bool Subdivision::has_cell(long j, long k) const {
  return std::binary_search(cells.begin(), cells.end(), std::make_pair(j, k));
}

namespace {

// Distance from point to a closed axis-aligned square [a,a+r] x [b,b+r].
double dist2_to_cell(cplx p, double a, double b, double r) {
  const double dx = std::max({a - p.real(), 0.0, p.real() - (a + r)});
  const double dy = std::max({b - p.imag(), 0.0, p.imag() - (b + r)});
  return dx * dx + dy * dy;
}

}  // namespace

Subdivision make_subdivision(const BaseRegion& region, double r, const PlaneIsometry& iso,
                             cplx offset) {
  LAM_REQUIRE(r > 0.0, "subdivision size must be positive");

  Subdivision s;
  s.r = r;
  s.iso = iso;
  s.region = region;

  // Reduce the offset modulo the lattice; offsets differing by a lattice
  // vector must produce the identical cell list.
  const double ox = offset.real() - r * std::floor(offset.real() / r);
  const double oy = offset.imag() - r * std::floor(offset.imag() / r);
  s.offset = cplx{ox == r ? 0.0 : ox, oy == r ? 0.0 : oy};

  // Region in the pre-isometry plane. Disks stay disks; rectangles are only
  // supported under identity rotation.
  BaseRegion pre = region;
  if (region.kind == BaseRegion::Disk) {
    pre.center = iso.invert(region.center);
  } else {
    LAM_REQUIRE(std::abs(iso.rot - cplx{1.0, 0.0}) <= 1e-14,
                "rectangular regions require an axis-aligned isometry");
    pre.x0 = region.x0 - iso.shift.real();
    pre.x1 = region.x1 - iso.shift.real();
    pre.y0 = region.y0 - iso.shift.imag();
    pre.y1 = region.y1 - iso.shift.imag();
  }

  double bx0, bx1, by0, by1;
  if (pre.kind == BaseRegion::Disk) {
    bx0 = pre.center.real() - pre.radius;
    bx1 = pre.center.real() + pre.radius;
    by0 = pre.center.imag() - pre.radius;
    by1 = pre.center.imag() + pre.radius;
  } else {
    bx0 = pre.x0;
    bx1 = pre.x1;
    by0 = pre.y0;
    by1 = pre.y1;
  }

  const long j0 = static_cast<long>(std::floor((bx0 - s.offset.real()) / r)) - 1;
  const long j1 = static_cast<long>(std::floor((bx1 - s.offset.real()) / r)) + 1;
  const long k0 = static_cast<long>(std::floor((by0 - s.offset.imag()) / r)) - 1;
  const long k1 = static_cast<long>(std::floor((by1 - s.offset.imag()) / r)) + 1;

  for (long j = j0; j <= j1; ++j) {
    for (long k = k0; k <= k1; ++k) {
      const double a = s.offset.real() + static_cast<double>(j) * r;
      const double b = s.offset.imag() + static_cast<double>(k) * r;
      bool meets;
      if (pre.kind == BaseRegion::Disk) {
        meets = dist2_to_cell(pre.center, a, b, r) < pre.radius * pre.radius;
      } else {
        meets = a < pre.x1 && a + r > pre.x0 && b < pre.y1 && b + r > pre.y0;
      }
      if (meets) s.cells.emplace_back(j, k);
    }
  }
  std::sort(s.cells.begin(), s.cells.end());
  return s;
}

BinnedMass bin_measure(const AtomicMeasure& m, const CubeGrid& grid) {
  BinnedMass out;
  for (const auto& a : m.atoms()) {
    if (auto key = grid.bin_of(a.p)) {
      out.bins[*key] += a.weight;
    } else {
      out.overflow += a.weight;
    }
  }
  return out;
}

double binned_distance(const BinnedMass& a, const BinnedMass& b) {
  double d = std::abs(a.overflow - b.overflow);
  auto ia = a.bins.begin();
  auto ib = b.bins.begin();
  while (ia != a.bins.end() || ib != b.bins.end()) {
    if (ib == b.bins.end() || (ia != a.bins.end() && ia->first < ib->first)) {
      d += std::abs(ia->second);
      ++ia;
    } else if (ia == a.bins.end() || ib->first < ia->first) {
      d += std::abs(ib->second);
      ++ib;
    } else {
      d += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return d;
}

double binned_distance(const AtomicMeasure& m1, const AtomicMeasure& m2, const CubeGrid& grid) {
  return binned_distance(bin_measure(m1, grid), bin_measure(m2, grid));
}

}  // namespace lam
