#pragma once

#include "laminaire/laminar.hpp"
#include "laminaire/potential.hpp"

namespace lam {

// (z, w) -> (p(z) - a w, z) with real polynomial p of degree >= 2.
struct HenonMap {
  std::vector<double> p;  // ascending coefficients
  double a = 0.0;

  long degree() const { return static_cast<long>(p.size()) - 1; }
  std::pair<cplx, cplx> p_eval(cplx z) const {
    cplx v{0.0, 0.0}, d{0.0, 0.0};
    for (std::size_t i = p.size(); i-- > 0;) {
      d = d * z + v;
      v = v * z + p[i];
    }
    return {v, d};
  }
  C2 apply(const C2& x) const { return C2{p_eval(x.z).first - a * x.w, x.z}; }
  C2 apply_inverse(const C2& x) const { return C2{x.w, (p_eval(x.w).first - x.z) / a}; }
  // Forward-invariant escape radius: R >= 2 + |a| + sum |p_k|.
  double escape_radius() const {
    double s = 0.0;
    for (double c : p) s += std::abs(c);
    return 2.0 + std::abs(a) + s;
  }
};

HenonMap default_henon();  // z^2 - 1.2, a = 0.3

struct GreenOptions {
  int n_max = 60;
  double big = 1e100;  // stop once the orbit coordinate passes this
};

// Escape-rate potential G±: d^{-n} log+ |z-coordinate of f^{±n}| at the
// deepest usable iterate. sign = +1 forward, -1 backward.
double henon_green(const HenonMap& f, int sign, const C2& x, const GreenOptions& opt = {});

// Affine line t -> p0 + t * dir.
struct Line {
  C2 p0, dir;
  C2 at(cplx t) const { return C2{p0.z + t * dir.z, p0.w + t * dir.w}; }
};

struct LineMeasure {
  AtomicMeasure mu;
  long expected = 0;   // d^(2n)
  long found = 0;
  double box_half = 0; // parameter box that certified the full count
};

// Intersection measure of f^n(L) with f^{-n}(L'): certified roots of the
// evaluated (never expanded) function t -> A'(f^{2n}(l(t))), atoms at
// f^n(l(t)) with exact dyadic weights d^(-2n). Throws if the certified count
// differs from d^(2n).
LineMeasure iterated_line_measure(const HenonMap& f, const Line& L, const Line& Lp, int n);

// Example fixtures ------------------------------------------------------

// Two transverse pencils of 3 parallel lines (weights 1/3) and their exact
// 9-atom product measure.
struct PencilFixture {
  std::vector<UniformLaminarPiece> horizontal;  // w = b over z
  std::vector<UniformLaminarPiece> vertical;    // z = a over w
  AtomicMeasure product;                        // 9 atoms, weight 1/9
};
PencilFixture transverse_pencils(double half_base = 1.6);

// dd^c max(log+|z|, log+|w|): potential plus the three-family decomposition
// (horizontals, verticals, cone graphs w = e^{-i theta} z over 1 < |z|).
struct DemaillyModel {
  PotentialFn potential;
  std::vector<UniformLaminarPiece> decomposition;  // all three families
  Polydisk domain;
};
DemaillyModel demailly_current(int n_disks = 48, double truncation = 1.45);

// Product of two copies of a finite measure on X in the disk: horizontal
// family {w = b}, vertical family {z = a}, and the subdivided alternative
// representations cut along lines through the atoms (their geometric wedge
// vanishes although they carry the same currents).
struct CantorProduct {
  std::vector<cplx> points;
  std::vector<double> weights;
  std::vector<UniformLaminarPiece> horizontal, vertical;
  std::vector<UniformLaminarPiece> horizontal_alt, vertical_alt;
  AtomicMeasure product;  // mu (x) mu
  PotentialFn u_h, u_v;
};
CantorProduct cantor_product_currents();

// Equilibrium potential of a middle-third Cantor stage on [0,1]: logarithmic
// charges balanced so the potential is constant on the set.
struct OneDimGreen {
  std::vector<double> nodes;
  std::vector<double> charges;  // sum exactly renormalized to 1
  double robin = 0.0;           // potential value on K
  int depth = 0;
  std::vector<std::pair<double, double>> intervals;

  double raw(cplx z) const {  // sum q log|z - x| - robin
    double s = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) s += charges[j] * std::log(std::abs(z - nodes[j]));
    return s - robin;
  }
  double operator()(cplx z) const { return std::max(0.0, raw(z)); }
  bool in_K(double x, double pad = 0.0) const {
    for (const auto& [a, b] : intervals)
      if (x >= a - pad && x <= b + pad) return true;
    return false;
  }
};
OneDimGreen equilibrium_green(int depth, int charges_per_interval = 48);

// Closed-form Green function of [0,1] with pole at infinity.
double interval_green(cplx z);

struct MaxGreenModel {
  PotentialFn potential;  // max(G_K(z), G_K(w))
  OneDimGreen g;
  Polydisk domain;
};
MaxGreenModel max_green_current(int depth);

}  // namespace lam
