#include "laminaire/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

namespace lam {

HenonMap default_henon() { return HenonMap{{-1.2, 0.0, 1.0}, 0.3}; }

double henon_green(const HenonMap& f, int sign, const C2& x, const GreenOptions& opt) {
  LAM_REQUIRE(sign == 1 || sign == -1, "henon_green: sign must be +1 or -1");
  LAM_REQUIRE(f.a != 0.0 && f.degree() >= 2, "henon_green: degenerate map");
  const double d = static_cast<double>(f.degree());
  C2 y = x;
  int n = 0;
  for (; n < opt.n_max; ++n) {
    if (std::abs(y.z) > opt.big || std::abs(y.w) > opt.big) break;
    y = sign > 0 ? f.apply(y) : f.apply_inverse(y);
  }
  const double az = std::abs(y.z);
  return az > 1.0 ? std::log(az) / std::pow(d, n) : 0.0;
}

LineMeasure iterated_line_measure(const HenonMap& f, const Line& L, const Line& Lp, int n) {
  LAM_REQUIRE(n >= 0, "iterated_line_measure: n must be >= 0");
  LAM_REQUIRE(std::abs(L.dir.z * Lp.dir.w - L.dir.w * Lp.dir.z) > 1e-12,
              "iterated_line_measure: parallel lines");
  const long d = f.degree();
  long expected = 1;
  for (int k = 0; k < 2 * n; ++k) expected *= d;

  // A'(p) = 0 is the affine equation of L'.
  const cplx ez = Lp.dir.z, ew = Lp.dir.w;
  HoloFn F = [&](cplx t) {
    C2 y = L.at(t);
    C2 dy = L.dir;
    for (int k = 0; k < 2 * n; ++k) {
      const auto [pv, pd] = f.p_eval(y.z);
      const C2 y2{pv - f.a * y.w, y.z};
      const C2 dy2{pd * dy.z - f.a * dy.w, dy.z};
      y = y2;
      dy = dy2;
    }
    return std::pair<cplx, cplx>{(y.z - Lp.p0.z) * ew - (y.w - Lp.p0.w) * ez,
                                 dy.z * ew - dy.w * ez};
  };

  LineMeasure out;
  out.expected = expected;
  // Grow the parameter box until the boundary integral certifies the full
  // Bezout count. Larger boxes overflow the doubled-up iterates, so the
  // ladder stays short.
  for (double half : {3.0, 4.5, 6.0, 8.0}) {
    const Box box = Box::square(cplx{0.0, 0.0}, half);
    const auto w = winding_number(F, box, {});
    if (w && *w == expected) {
      out.box_half = half;
      break;
    }
  }
  LAM_REQUIRE(out.box_half > 0.0, "iterated_line_measure: count not certified on any box");

  const RootFindResult roots = find_roots(F, Box::square(cplx{0.0, 0.0}, out.box_half), {});
  long mult_total = 0;
  for (const auto& r : roots.roots) mult_total += r.multiplicity;
  out.found = mult_total;
  LAM_REQUIRE(roots.certified, "iterated_line_measure: uncertified boxes at maximum depth");
  LAM_REQUIRE(mult_total == expected, "iterated_line_measure: root count mismatch");

  const double weight = 1.0 / static_cast<double>(expected);
  for (const auto& r : roots.roots) {
    C2 y = L.at(r.z);
    for (int k = 0; k < n; ++k) y = f.apply(y);
    for (long m = 0; m < r.multiplicity; ++m) out.mu.add(y, weight);
  }
  return out;
}

namespace {

AffineSquare full_square(double half) {
  return AffineSquare{0, cplx{-half, -half}, 2.0 * half, {}};
}

BaseMask disk_mask(double r_out) {
  BaseMask m;
  m.kind = BaseMask::OpenDisk;
  m.r_out = r_out;
  return m;
}

BaseMask annulus_mask(double r_in, double r_out) {
  BaseMask m;
  m.kind = BaseMask::OpenAnnulus;
  m.r_in = r_in;
  m.r_out = r_out;
  return m;
}

BaseMask band_mask(BaseMask::Kind kind, double lo, double hi) {
  BaseMask m;
  m.kind = kind;
  m.lo = lo;
  m.hi = hi;
  return m;
}

}  // namespace

PencilFixture transverse_pencils(double half_base) {
  PencilFixture fx;
  const double vals[3] = {-0.5, 0.0, 0.5};
  UniformLaminarPiece h, v;
  for (double b : vals)
    h.disks.push_back({GraphDisk{chart_zw(), full_square(half_base), {},
                                 GraphMap::constant(cplx{b, 0.0})},
                       1.0 / 3.0});
  for (double a : vals)
    v.disks.push_back({GraphDisk{chart_wz(), full_square(half_base), {},
                                 GraphMap::constant(cplx{a, 0.0})},
                       1.0 / 3.0});
  fx.horizontal = {h};
  fx.vertical = {v};
  for (double a : vals)
    for (double b : vals) fx.product.add(C2{cplx{a, 0.0}, cplx{b, 0.0}}, 1.0 / 9.0);
  return fx;
}

DemaillyModel demailly_current(int n_disks, double truncation) {
  LAM_REQUIRE(n_disks >= 2, "demailly_current: need at least 2 disks");
  DemaillyModel m;
  m.potential = [](const C2& p) {
    return std::max({std::log(std::abs(p.z)), std::log(std::abs(p.w)), 0.0});
  };
  m.domain = Polydisk{C2{cplx{0, 0}, cplx{0, 0}}, 1.25, 1.25};

  UniformLaminarPiece horiz, vert, cone;
  const double r_cone = truncation;
  for (int k = 0; k < n_disks; ++k) {
    const double th = 2.0 * M_PI * k / n_disks;
    const cplx e{std::cos(th), std::sin(th)};
    horiz.disks.push_back({GraphDisk{chart_zw(), full_square(1.1), disk_mask(1.0),
                                     GraphMap::constant(e)},
                           1.0 / n_disks});
    vert.disks.push_back({GraphDisk{chart_wz(), full_square(1.1), disk_mask(1.0),
                                    GraphMap::constant(e)},
                          1.0 / n_disks});
    cone.disks.push_back({GraphDisk{chart_zw(), full_square(1.5),
                                    annulus_mask(1.0, r_cone),
                                    GraphMap::linear(cplx{0, 0}, std::conj(e))},
                          1.0 / n_disks});
  }
  m.decomposition = {horiz, vert, cone};
  return m;
}

CantorProduct cantor_product_currents() {
  CantorProduct cp;
  cp.points = {cplx{0.3, 0.3},  cplx{-0.3, 0.3},  cplx{-0.3, -0.3}, cplx{0.3, -0.3},
               cplx{0.9, 0.3},  cplx{-0.9, -0.3}, cplx{0.3, 0.9},   cplx{-0.3, -0.9}};
  cp.weights.assign(cp.points.size(), 1.0 / cp.points.size());

  UniformLaminarPiece h, v;
  for (std::size_t i = 0; i < cp.points.size(); ++i) {
    h.disks.push_back({GraphDisk{chart_zw(), full_square(1.2), disk_mask(1.0),
                                 GraphMap::constant(cp.points[i])},
                       cp.weights[i]});
    v.disks.push_back({GraphDisk{chart_wz(), full_square(1.2), disk_mask(1.0),
                                 GraphMap::constant(cp.points[i])},
                       cp.weights[i]});
  }
  cp.horizontal = {h};
  cp.vertical = {v};

  // Subdivided complements: the same graphs cut along lines through the
  // atoms' coordinates, so every candidate intersection lands exactly on an
  // excluded cut and the geometric wedge vanishes.
  const double cuts[4] = {-0.9, -0.3, 0.3, 0.9};
  auto banded = [&](const Chart& chart, BaseMask::Kind kind, cplx value, double weight,
                    UniformLaminarPiece& dst) {
    double lo = -1.2;
    for (int c = 0; c <= 4; ++c) {
      const double hi = c < 4 ? cuts[c] : 1.2;
      dst.disks.push_back({GraphDisk{chart, full_square(1.2), band_mask(kind, lo, hi),
                                     GraphMap::constant(value)},
                           weight});
      lo = hi;
    }
  };
  UniformLaminarPiece ha, va;
  for (std::size_t i = 0; i < cp.points.size(); ++i) {
    banded(chart_zw(), BaseMask::OpenBandRe, cp.points[i], cp.weights[i], ha);
    banded(chart_wz(), BaseMask::OpenBandIm, cp.points[i], cp.weights[i], va);
  }
  cp.horizontal_alt = {ha};
  cp.vertical_alt = {va};

  for (std::size_t i = 0; i < cp.points.size(); ++i)
    for (std::size_t j = 0; j < cp.points.size(); ++j)
      cp.product.add(C2{cp.points[i], cp.points[j]}, cp.weights[i] * cp.weights[j]);

  auto pts = std::make_shared<std::vector<cplx>>(cp.points);
  auto wts = std::make_shared<std::vector<double>>(cp.weights);
  cp.u_h = [pts, wts](const C2& p) {
    double u = 0.0;
    for (std::size_t i = 0; i < pts->size(); ++i)
      u += (*wts)[i] * std::log(std::abs(p.w - (*pts)[i]));
    return u;
  };
  cp.u_v = [pts, wts](const C2& p) {
    double u = 0.0;
    for (std::size_t i = 0; i < pts->size(); ++i)
      u += (*wts)[i] * std::log(std::abs(p.z - (*pts)[i]));
    return u;
  };
  return cp;
}

OneDimGreen equilibrium_green(int depth, int charges_per_interval) {
  LAM_REQUIRE(depth >= 0 && depth <= 8, "equilibrium_green: depth out of range");
  OneDimGreen g;
  g.depth = depth;
  g.intervals = {{0.0, 1.0}};
  for (int k = 0; k < depth; ++k) {
    std::vector<std::pair<double, double>> next;
    for (const auto& [a, b] : g.intervals) {
      const double len = (b - a) / 3.0;
      next.push_back({a, a + len});
      next.push_back({b - len, b});
    }
    g.intervals = next;
  }
  const int m = std::max(6, charges_per_interval >> depth);
  std::vector<double> colloc;
  for (const auto& [a, b] : g.intervals) {
    const double mid = 0.5 * (a + b), hl = 0.5 * (b - a);
    for (int j = 0; j < m; ++j) {
      g.nodes.push_back(mid + hl * std::cos(M_PI * (2 * j + 1) / (2.0 * m)));
      colloc.push_back(mid + hl * std::cos(M_PI * (j + 1) / (m + 1.0)));
    }
  }
  const int M = static_cast<int>(g.nodes.size());
  Eigen::MatrixXd A(M + 1, M + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M + 1);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) A(i, j) = std::log(std::abs(colloc[i] - g.nodes[j]));
    A(i, M) = -1.0;
  }
  for (int j = 0; j < M; ++j) A(M, j) = 1.0;
  A(M, M) = 0.0;
  rhs(M) = 1.0;
  const Eigen::VectorXd q = A.colPivHouseholderQr().solve(rhs);
  double s = 0.0;
  for (int j = 0; j < M; ++j) s += q(j);
  g.charges.resize(M);
  for (int j = 0; j < M; ++j) g.charges[j] = q(j) / s;
  g.robin = q(M);
  return g;
}

double interval_green(cplx z) {
  const cplx u = 2.0 * z - 1.0;
  cplx s = std::sqrt(u * u - 1.0);
  if (std::abs(u + s) < 1.0) s = -s;
  return std::log(std::abs(u + s));
}

MaxGreenModel max_green_current(int depth) {
  MaxGreenModel m;
  m.g = equilibrium_green(depth);
  const OneDimGreen g = m.g;
  m.potential = [g](const C2& p) { return std::max(g(p.z), g(p.w)); };
  m.domain = Polydisk{C2{cplx{0.5, 0.0}, cplx{0.5, 0.0}}, 0.85, 0.85};
  return m;
}

}  // namespace lam
