#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "laminaire/core.hpp"

namespace lam {

// Orientation-preserving plane isometry u -> rot*u + shift, |rot| = 1.
struct PlaneIsometry {
  cplx rot{1.0, 0.0};
  cplx shift{0.0, 0.0};

  cplx apply(cplx u) const { return rot * u + shift; }
  cplx invert(cplx v) const { return std::conj(rot) * (v - shift); }
  bool is_identity() const {
    return std::abs(rot - cplx{1.0, 0.0}) <= 1e-14 && std::abs(shift) <= 1e-14;
  }
};

// Lattice coordinate with the half-open boundary rule: values within 1e-12 of
// a cell edge are snapped onto it first, so near-edge points land in a unique
// cell no matter which arithmetic path produced them.
inline long cell_index(double x, double origin, double r) {
  double t = (x - origin) / r;
  const double tr = std::round(t);
  if (std::abs(t - tr) * r <= 1e-12) t = tr;
  return static_cast<long>(std::floor(t));
}

// Half-open square in a projection base plane: iso(corner + [0,r) x [0,r)).
// corner is the lower-left corner in the pre-isometry plane.
struct AffineSquare {
  int proj_id = 0;
  cplx corner{0.0, 0.0};
  double r = 1.0;
  PlaneIsometry iso;

  cplx center() const { return iso.apply(corner + cplx{r / 2, r / 2}); }

  bool contains(cplx p) const {
    const cplx u = iso.invert(p);
    return cell_index(u.real(), corner.real(), r) == 0 &&
           cell_index(u.imag(), corner.imag(), r) == 0;
  }

  // Strict interior margin: distance from the pre-iso coordinates to the
  // square's boundary (negative outside).
  double interior_margin(cplx p) const {
    const cplx u = iso.invert(p) - corner;
    const double mx = std::min(u.real(), r - u.real());
    const double my = std::min(u.imag(), r - u.imag());
    return std::min(mx, my);
  }

  AffineSquare shrink(double lambda) const {
    LAM_REQUIRE(lambda > 0.0 && lambda <= 1.0, "shrink factor must lie in (0,1]");
    AffineSquare s = *this;
    const double m = (1.0 - lambda) * r / 2;
    s.corner = corner + cplx{m, m};
    s.r = lambda * r;
    return s;
  }
};

struct BaseRegion {
  enum Kind { Disk, Rect } kind = Disk;
  cplx center{0.0, 0.0};
  double radius = 1.0;                   // Disk
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0; // Rect

  static BaseRegion disk(cplx c, double R) {
    BaseRegion b;
    b.kind = Disk;
    b.center = c;
    b.radius = R;
    return b;
  }
  static BaseRegion rect(double x0, double x1, double y0, double y1) {
    BaseRegion b;
    b.kind = Rect;
    b.x0 = x0;
    b.x1 = x1;
    b.y0 = y0;
    b.y1 = y1;
    return b;
  }

  bool contains(cplx p) const {
    if (kind == Disk) return std::abs(p - center) < radius;
    return p.real() >= x0 && p.real() < x1 && p.imag() >= y0 && p.imag() < y1;
  }
  double area() const {
    if (kind == Disk) return M_PI * radius * radius;
    return (x1 - x0) * (y1 - y0);
  }
};

// Lattice subdivision of a base region: cells (j,k) whose closed square meets
// the open region. The offset is stored reduced modulo the lattice, so any
// two offsets differing by a lattice vector yield the identical structure.
struct Subdivision {
  double r = 1.0;
  PlaneIsometry iso;
  cplx offset{0.0, 0.0};  // reduced: components in [0, r)
  BaseRegion region;
  std::vector<std::pair<long, long>> cells;  // sorted lexicographically

  bool has_cell(long j, long k) const;
  std::pair<long, long> cell_of(cplx p) const {
    const cplx u = iso.invert(p);
    return {cell_index(u.real(), offset.real(), r), cell_index(u.imag(), offset.imag(), r)};
  }
  AffineSquare square(long j, long k, int proj_id = 0) const {
    return AffineSquare{proj_id,
                        offset + cplx{static_cast<double>(j) * r, static_cast<double>(k) * r}, r,
                        iso};
  }
  std::size_t size() const { return cells.size(); }
};

Subdivision make_subdivision(const BaseRegion& region, double r, const PlaneIsometry& iso = {},
                             cplx offset = {0.0, 0.0});

// Product of two affine squares under independent projections.
struct FourCube {
  AffineSquare s1;
  AffineSquare s2;
  Projection p1;
  Projection p2;

  FourCube(AffineSquare a, AffineSquare b, Projection q1, Projection q2)
      : s1(a), s2(b), p1(q1), p2(q2) {
    LAM_REQUIRE(std::abs(det(p1, p2)) > 1e-14, "four-cube projections must be independent");
  }

  bool contains(const C2& p) const { return s1.contains(p1(p)) && s2.contains(p2(p)); }
  C2 center() const { return Chart{p1, p2}.embed(s1.center(), s2.center()); }
  FourCube shrink(double lambda) const { return FourCube{s1.shrink(lambda), s2.shrink(lambda), p1, p2}; }
};

struct Atom {
  C2 p;
  double weight = 0.0;
};

class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  void add(const C2& p, double weight) {
    LAM_REQUIRE(weight >= 0.0, "atom weights must be nonnegative");
    atoms_.push_back(Atom{p, weight});
    mass_ += weight;
  }
  const std::vector<Atom>& atoms() const { return atoms_; }
  double mass() const { return mass_; }
  std::size_t size() const { return atoms_.size(); }

  template <class Pred>
  AtomicMeasure restrict(Pred&& keep) const {
    AtomicMeasure out;
    for (const auto& a : atoms_)
      if (keep(a.p)) out.add(a.p, a.weight);
    return out;
  }

 private:
  std::vector<Atom> atoms_;
  double mass_ = 0.0;
};

// 4-cube bin grid induced by a pair of base subdivisions. Points falling
// outside the listed cells of either factor go to the overflow bin.
struct CubeGrid {
  Subdivision s1;
  Subdivision s2;
  Projection p1{cplx{1.0, 0.0}, cplx{0.0, 0.0}};
  Projection p2{cplx{0.0, 0.0}, cplx{1.0, 0.0}};

  using Key = std::array<long, 4>;

  std::optional<Key> bin_of(const C2& p) const {
    const auto [j1, k1] = s1.cell_of(p1(p));
    const auto [j2, k2] = s2.cell_of(p2(p));
    if (!s1.has_cell(j1, k1) || !s2.has_cell(j2, k2)) return std::nullopt;
    return Key{j1, k1, j2, k2};
  }
  FourCube cube(const Key& k) const {
    return FourCube{s1.square(k[0], k[1], 0), s2.square(k[2], k[3], 1), p1, p2};
  }
};

struct BinnedMass {
  std::map<CubeGrid::Key, double> bins;
  double overflow = 0.0;

  double total() const {
    double s = overflow;
    for (const auto& [k, v] : bins) s += v;
    return s;
  }
};

BinnedMass bin_measure(const AtomicMeasure& m, const CubeGrid& grid);
double binned_distance(const BinnedMass& a, const BinnedMass& b);
double binned_distance(const AtomicMeasure& m1, const AtomicMeasure& m2, const CubeGrid& grid);

}  // namespace lam
