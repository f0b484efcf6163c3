#pragma once

#include <optional>

#include "laminaire/core.hpp"

namespace lam {

// Holomorphic function handle: returns (value, derivative).
using HoloFn = std::function<std::pair<cplx, cplx>(cplx)>;

struct Box {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  cplx center() const { return cplx{(x0 + x1) / 2, (y0 + y1) / 2}; }
  double diam() const { return std::hypot(width(), height()); }
  bool contains(cplx p) const {
    return p.real() >= x0 && p.real() < x1 && p.imag() >= y0 && p.imag() < y1;
  }
  static Box square(cplx c, double half) {
    return Box{c.real() - half, c.real() + half, c.imag() - half, c.imag() + half};
  }
};

struct WindingOptions {
  double min_modulus = 1e-280;  // boundary samples below this abort the walk
  int max_seg_depth = 42;
};

// Winding number of F along the boundary of the box, by adaptive argument
// tracking (every accepted step turns by less than pi/2). nullopt when the
// boundary cannot be certified (F too small on it, or refinement exhausted).
std::optional<long> winding_number(const HoloFn& F, const Box& b, const WindingOptions& opt = {});

struct CertifiedRoot {
  cplx z;
  long multiplicity = 1;
  bool polished = false;  // Newton converged; false for clustered/tangential roots
};

struct RootFindOptions {
  double isolation = 1e-9;      // boxes at this diameter become root clusters
  double min_modulus = 1e-280;
  int max_depth = 48;
  int nudge_tries = 6;
};

struct RootFindResult {
  std::vector<CertifiedRoot> roots;
  long winding_total = 0;  // winding of the outer box
  bool certified = false;  // all splits balanced and all boundaries resolved
};

// All zeros of F in the box, certified by subdivision: each split must
// conserve the winding count, with deterministic cross-point nudges when a
// zero sits too close to a cut line. Roots are reported once per cluster with
// their winding multiplicity, sorted by (re, im).
RootFindResult find_roots(const HoloFn& F, const Box& b, const RootFindOptions& opt = {});

// Newton refinement used by find_roots; exposed for graph evaluators.
std::optional<cplx> newton_polish(const HoloFn& F, cplx z0, double tol, int max_iter = 60);

}  // namespace lam
