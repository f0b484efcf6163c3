#pragma once

#include <string>

#include "laminaire/geometry.hpp"

namespace lam {

struct Polydisk {
  C2 center{};
  double rz = 1.0;
  double rw = 1.0;

  bool contains(const C2& p) const {
    return std::abs(p.z - center.z) < rz && std::abs(p.w - center.w) < rw;
  }
};

// Cell-centered 4-D grid over the bounding box of a polydisk, row-major over
// (x, y, s, t). Node (i,j,k,l) sits at origin + (i+1/2)h per axis.
struct Grid4 {
  Polydisk dom;
  double h = 0.0;
  int nx = 0, ny = 0, ns = 0, nt = 0;
  std::string label;
  std::vector<double> v;

  static Grid4 shape(const Polydisk& dom, double h, const std::string& label);

  std::size_t idx(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * ny + j) * ns + k) * nt + l;
  }
  std::size_t size() const {
    return static_cast<std::size_t>(nx) * ny * static_cast<std::size_t>(ns) * nt;
  }
  double x(int i) const { return dom.center.z.real() - dom.rz + (i + 0.5) * h; }
  double y(int j) const { return dom.center.z.imag() - dom.rz + (j + 0.5) * h; }
  double s(int k) const { return dom.center.w.real() - dom.rw + (k + 0.5) * h; }
  double t(int l) const { return dom.center.w.imag() - dom.rw + (l + 0.5) * h; }
  C2 node(int i, int j, int k, int l) const { return C2{cplx{x(i), y(j)}, cplx{s(k), t(l)}}; }
};

using PotentialFn = std::function<double(const C2&)>;

// Fills a grid by evaluation; any non-finite sample aborts with its node.
Grid4 sample_potential(const PotentialFn& u, const Polydisk& dom, double h,
                       const std::string& label = "");

// Convolution with the normalized radial bump (1 - rho^2)^3 supported in
// |xi| < 3*sigma. The returned grid keeps the node lattice and drops
// ceil(3*sigma/h) boundary layers per side.
Grid4 mollify(const Grid4& u, double sigma);

// Same lattice and trim contract with a product of per-axis bumps, computed
// by direct axis passes. Needs two working arrays of the input size where the
// padded transforms of mollify would need roughly four; takes the input by
// value so the caller can move the larger grids in.
Grid4 mollify_separable(Grid4 u, double sigma);

struct ComplexHessian {
  double zz = 0.0;  // d2u / dz dzbar
  double ww = 0.0;
  cplx zw{0.0, 0.0};
};

// Central second differences; requires the node at least 2h inside the domain
// (indices 2..n-3). Exact on polynomials of total degree <= 2.
ComplexHessian complex_hessian(const Grid4& u, int i, int j, int k, int l);

// Pointwise mixed Monge-Ampere density of the pair, on the 2-node-interior
// sub-grid. With the dd^c normalization in use the density of two smooth
// potentials is (4/pi^2) [u_zz vbar_ww + u_ww v_zz - 2 Re(u_zw conj(v_zw))].
Grid4 mixed_ma_density(const Grid4& u, const Grid4& v);

// Product integration region with per-cell coverage weights.
struct WedgeRegion {
  enum Kind { PolydiskRegion, FullGrid } kind = PolydiskRegion;
  Polydisk disk;

  static WedgeRegion polydisk(const Polydisk& d) { return WedgeRegion{PolydiskRegion, d}; }
  static WedgeRegion full() { return WedgeRegion{FullGrid, {}}; }
};

// Exact area of the intersection of the disk (center,R) with the rectangle.
double disk_rect_area(cplx center, double R, double x0, double x1, double y0, double y1);

// Bins density mass over the region into the cube grid (overflow collects
// region mass outside the listed bins).
BinnedMass bin_density(const Grid4& density, const WedgeRegion& region, const CubeGrid& bins);

// Per-factor region coverage of each node's h-cell: first vector indexed
// (i*ny + j) over the z-plane, second (k*nt + l) over the w-plane. Node mass
// = density * coverage_z * coverage_w.
std::pair<std::vector<double>, std::vector<double>> region_axis_coverage(const Grid4& density,
                                                                         const WedgeRegion& region);

struct WedgeResult {
  BinnedMass measure;           // binning at the last sigma
  double cauchy_indicator = 0;  // max bin-mass change between last two sigmas
  std::vector<double> sigma_totals;
};

// Mollified wedge dd^c(u) ^ dd^c(v) along a decreasing sigma sequence.
WedgeResult wedge_by_potentials(const Grid4& u, const Grid4& v, const std::vector<double>& sigmas,
                                const CubeGrid& bins, const WedgeRegion& region);

// Smooth plateau adapted to a 4-cube: product of four 1-D C-infinity ramps,
// 1 on a neighborhood of shrink(cube, lambda), 0 near the boundary.
struct PlateauFunction {
  FourCube cube;
  double lambda = 0.5;
  double hessian_bound = 0.0;  // upper estimate for max |dd^c chi| entry

  explicit PlateauFunction(FourCube c) : cube(std::move(c)) {}
  double operator()(const C2& p) const;

 private:
  friend PlateauFunction plateau_function(const FourCube&, double);
  double edge = 0.0;  // ramp width as a fraction of the half-side, per factor
};

PlateauFunction plateau_function(const FourCube& cube, double lambda);

// Largest increment over axis-aligned and diagonal node pairs at distance
// <= r. Monotone in r by construction.
double modulus_of_continuity(const Grid4& u, double r);

// One pass building the increment table up to r_max; omega(r) then answers
// all smaller radii without rescanning the grid.
struct ModulusProfile {
  std::vector<std::pair<double, double>> steps;  // (distance, max increment), sorted

  double omega(double r) const {
    double m = 0.0;
    for (const auto& [d, inc] : steps) {
      if (d > r + 1e-12) break;
      m = std::max(m, inc);
    }
    return m;
  }
};

ModulusProfile modulus_profile(const Grid4& u, double r_max);

}  // namespace lam
