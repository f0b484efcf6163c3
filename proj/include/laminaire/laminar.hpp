#pragma once

#include "laminaire/geometry.hpp"
#include "laminaire/potential.hpp"
#include "laminaire/roots.hpp"

namespace lam {

// Optional restriction of a graph disk to a sub-region of its base square.
// Membership is strict, with a guard band so that intersection candidates
// produced by the root solver (accurate to ~1e-12) are classified stably:
// model constructions place their spurious meets exactly on these boundaries.
struct BaseMask {
  enum Kind { None, OpenDisk, OpenAnnulus, OpenBandRe, OpenBandIm } kind = None;
  cplx center{0.0, 0.0};
  double r_in = 0.0, r_out = 0.0;  // disk/annulus
  double lo = 0.0, hi = 0.0;       // bands (on re or im of the base coordinate)

  static constexpr double kGuard = 1e-9;

  bool contains(cplx zeta) const {
    switch (kind) {
      case None:
        return true;
      case OpenDisk:
        return std::abs(zeta - center) < r_out - kGuard;
      case OpenAnnulus: {
        const double d = std::abs(zeta - center);
        return d > r_in + kGuard && d < r_out - kGuard;
      }
      case OpenBandRe:
        return zeta.real() > lo + kGuard && zeta.real() < hi - kGuard;
      case OpenBandIm:
        return zeta.imag() > lo + kGuard && zeta.imag() < hi - kGuard;
    }
    return false;
  }
};

// Graph map over a base coordinate: either a polynomial (ascending
// coefficients) or an evaluator returning (value, derivative).
struct GraphMap {
  std::vector<cplx> poly;
  std::function<std::pair<cplx, cplx>(cplx)> evaluator;

  bool is_poly() const { return !evaluator; }
  std::pair<cplx, cplx> eval(cplx zeta) const {
    if (evaluator) return evaluator(zeta);
    cplx v{0.0, 0.0}, d{0.0, 0.0};
    for (std::size_t i = poly.size(); i-- > 0;) {
      d = d * zeta + v;
      v = v * zeta + poly[i];
    }
    return {v, d};
  }
  static GraphMap constant(cplx c) { return GraphMap{{c}, nullptr}; }
  static GraphMap linear(cplx c0, cplx c1) { return GraphMap{{c0, c1}, nullptr}; }
};

struct GraphDisk {
  Chart chart;
  AffineSquare base;
  BaseMask mask;
  GraphMap phi;

  std::pair<cplx, cplx> graph(cplx zeta) const { return phi.eval(zeta); }
  C2 point_at(cplx zeta) const { return chart.embed(zeta, phi.eval(zeta).first); }
  bool base_contains(cplx zeta) const { return base.contains(zeta) && mask.contains(zeta); }

  // Max discrete Cauchy-Riemann residual over an n x n interior sample.
  double cr_residual(int n = 8) const;
};

struct WeightedDisk {
  GraphDisk disk;
  double weight = 0.0;
};

// Finite family of weighted disjoint graphs over a common chart.
struct UniformLaminarPiece {
  std::vector<WeightedDisk> disks;

  double mass() const {
    double m = 0.0;
    for (const auto& d : disks) m += d.weight;
    return m;
  }
};

struct DisjointReport {
  bool ok = true;
  double min_separation = 0.0;
  int first = -1, second = -1;  // offending pair when !ok
};

// Sampled pairwise separation check; reports, never mutates.
DisjointReport check_disjoint(const UniformLaminarPiece& piece, double threshold = 1e-10,
                              int samples = 10);

struct IntersectionPoint {
  C2 p;
  cplx zeta;  // coordinate in the first disk's base
  bool tangential = false;
};

struct DiskIntersection {
  std::vector<IntersectionPoint> points;
  bool identified = false;
  bool regraph_failed = false;
  bool certified = true;
};

// Isolated intersections of two graph disks. Same-chart pairs compare graph
// maps directly; transverse charts trace the first graph through the second
// chart. Identified disks (sup distance below tol * chart scale) return the
// empty list with the flag set. Tangencies are counted once and flagged.
DiskIntersection disk_intersection(const GraphDisk& d1, const GraphDisk& d2,
                                   double ident_tol = 1e-10);

struct GeometricWedge {
  AtomicMeasure measure;
  double excluded_weight = 0.0;  // weight of pairs that could not be re-graphed
  long identified_pairs = 0;
  long tangential_points = 0;
  bool certified = true;
};

// Sum over disk pairs of the isolated-intersection Dirac masses. Self pairs
// and identified pairs contribute zero. Atoms are emitted sorted by
// coordinates, so the operation is symmetric as a multiset.
GeometricWedge geometric_wedge(const std::vector<UniformLaminarPiece>& f1,
                               const std::vector<UniformLaminarPiece>& f2,
                               double ident_tol = 1e-10);

struct AdmissibilityReport {
  bool admissible = true;
  double min_separation = 0.0;
  int piece1 = -1, disk1 = -1, piece2 = -1, disk2 = -1;  // shared leaf when found
};

AdmissibilityReport admissibility_check(const std::vector<UniformLaminarPiece>& f1,
                                        const std::vector<UniformLaminarPiece>& f2,
                                        double ident_tol = 1e-10);

struct LaminarStage {
  std::vector<UniformLaminarPiece> pieces;
  CubeGrid cells;  // subdivision pair whose skeleton the stage must avoid
};

struct AssembleReport {
  bool increasing = true;
  int violating_stage = -1, violating_disk = -1;
  double skeleton_mass = 0.0;  // sampled trace mass near the stage skeletons
  std::vector<double> stage_masses;
};

// Validates an increasing sequence of uniformly laminar pieces: stage masses
// must not decrease and every disk must continue into the next stage
// (identified continuation of at least its own weight).
AssembleReport assemble_increasing(const std::vector<LaminarStage>& stages,
                                   double skeleton_eps = 1e-3, double skeleton_tol = 1e-2);

struct UniformWedgeComparison {
  BinnedMass potential_side;
  BinnedMass geometric_side;
  GeometricWedge geometric;
  WedgeResult wedge;
  double distance = 0.0;            // binned distance between the two answers
  double max_domination_defect = 0; // max over bins of (geometric - potential)
};

// Potential of a uniformly laminar piece: sum of weight * log |trans - phi(base)|.
PotentialFn piece_potential(const std::vector<UniformLaminarPiece>& family);

// Runs both routes for the same pair of families on a shared grid and
// compares per bin. The two routes stay independent: the potential side never
// sees the disk structure, only sampled values.
UniformWedgeComparison uniform_wedge_compare(const std::vector<UniformLaminarPiece>& f1,
                                             const std::vector<UniformLaminarPiece>& f2,
                                             const Polydisk& sample_dom, double h,
                                             const std::vector<double>& sigmas,
                                             const CubeGrid& bins, const WedgeRegion& region);

}  // namespace lam
