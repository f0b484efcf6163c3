#include "laminaire/laminar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace lam {

namespace {

Box preiso_box(const AffineSquare& sq, double inflate = 0.0) {
  return Box{sq.corner.real() - inflate, sq.corner.real() + sq.r + inflate,
             sq.corner.imag() - inflate, sq.corner.imag() + sq.r + inflate};
}

// Affine embed: the differential is exact as a finite difference.
C2 embed_derivative(const Chart& chart, cplx zeta, cplx phi_val, cplx phi_der) {
  const C2 p0 = chart.embed(zeta, phi_val);
  const C2 p1 = chart.embed(zeta + 1.0, phi_val + phi_der);
  return C2{p1.z - p0.z, p1.w - p0.w};
}

struct PairGeometry {
  bool same_chart = false;
  // F(zeta) = signed transverse gap seen from d2's chart, as a function of
  // d1's base coordinate. Roots of F are the candidate intersections.
  std::function<std::pair<cplx, cplx>(cplx)> F;
  std::function<cplx(cplx)> xi;  // d2 base coordinate of the traced point
};

PairGeometry make_pair_geometry(const GraphDisk& d1, const GraphDisk& d2) {
  PairGeometry g;
  g.same_chart = chart_equal(d1.chart, d2.chart);
  if (g.same_chart) {
    g.xi = [](cplx zeta) { return zeta; };
    g.F = [&d1, &d2](cplx zeta) {
      const auto [v1, dv1] = d1.phi.eval(zeta);
      const auto [v2, dv2] = d2.phi.eval(zeta);
      return std::pair<cplx, cplx>{v1 - v2, dv1 - dv2};
    };
    return g;
  }
  const Chart c1 = d1.chart, c2 = d2.chart;
  g.xi = [c1, c2, &d1](cplx zeta) {
    const auto [v, dv] = d1.phi.eval(zeta);
    (void)dv;
    return c2.base(c1.embed(zeta, v));
  };
  g.F = [c1, c2, &d1, &d2](cplx zeta) {
    const auto [v, dv] = d1.phi.eval(zeta);
    const C2 p = c1.embed(zeta, v);
    const C2 dp = embed_derivative(c1, zeta, v, dv);
    const cplx xi = c2.base(p);
    const cplx dxi = c2.base(dp);
    const auto [v2, dv2] = d2.phi.eval(xi);
    return std::pair<cplx, cplx>{c2.trans(p) - v2, c2.trans(dp) - dv2 * dxi};
  };
  return g;
}

// Sampled sup of |F| over base coordinates lying in both disks. Returns the
// sup and the count of common samples; identification needs enough coverage.
std::pair<double, int> sampled_overlap_gap(const GraphDisk& d1, const GraphDisk& d2,
                                           const PairGeometry& g, int n = 12) {
  const Box b = preiso_box(d1.base);
  double sup = 0.0;
  int common = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx pre{b.x0 + (i + 0.5) * b.width() / n, b.y0 + (j + 0.5) * b.height() / n};
      const cplx zeta = d1.base.iso.apply(pre);
      if (!d1.base_contains(zeta)) continue;
      const cplx xi = g.xi(zeta);
      if (!d2.base_contains(xi)) continue;
      const auto [f, df] = g.F(zeta);
      (void)df;
      if (!std::isfinite(std::abs(f))) return {std::numeric_limits<double>::infinity(), common};
      sup = std::max(sup, std::abs(f));
      ++common;
    }
  return {sup, common};
}

double pair_scale(const GraphDisk& d1, const GraphDisk& d2) {
  double s = std::max({1.0, d1.chart.scale(), d2.chart.scale()});
  const Box b = preiso_box(d1.base);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const cplx pre{b.x0 + (i + 0.5) * b.width() / 4, b.y0 + (j + 0.5) * b.height() / 4};
      const auto [v, dv] = d1.phi.eval(d1.base.iso.apply(pre));
      (void)dv;
      const double a = std::abs(v);
      if (std::isfinite(a)) s = std::max(s, a);
    }
  return s;
}

// Sampled ambient bounding box of a graph, inflated by a Lipschitz reach so it
// encloses the whole sheet. Disjoint boxes mean disjoint sheets: no
// intersection points and no identification, so the pair can be skipped
// outright. A non-finite sample leaves ok false and the pair is never skipped.
struct DiskRange {
  bool ok = false;
  double lo[4] = {0, 0, 0, 0};
  double hi[4] = {0, 0, 0, 0};
  double reach = 0.0;
};

DiskRange sampled_disk_range(const GraphDisk& d) {
  DiskRange r;
  const Box b = preiso_box(d.base);
  const int n = 4;
  double maxd = 0.0;
  for (int k = 0; k < 4; ++k) {
    r.lo[k] = 1e300;
    r.hi[k] = -1e300;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx pre{b.x0 + (i + 0.5) * b.width() / n, b.y0 + (j + 0.5) * b.height() / n};
      const cplx zeta = d.base.iso.apply(pre);
      const auto [v, dv] = d.phi.eval(zeta);
      const C2 p = d.chart.embed(zeta, v);
      const C2 dp = embed_derivative(d.chart, zeta, v, dv);
      const double c[4] = {p.z.real(), p.z.imag(), p.w.real(), p.w.imag()};
      const double dn = std::hypot(std::abs(dp.z), std::abs(dp.w));
      if (!std::isfinite(dn) || !std::isfinite(c[0] + c[1] + c[2] + c[3])) return r;
      maxd = std::max(maxd, dn);
      for (int k = 0; k < 4; ++k) {
        r.lo[k] = std::min(r.lo[k], c[k]);
        r.hi[k] = std::max(r.hi[k], c[k]);
      }
    }
  r.reach = 1.5 * maxd * (b.diam() / n) + 0.02 * d.base.r;
  r.ok = true;
  return r;
}

bool ranges_disjoint(const DiskRange& a, const DiskRange& b) {
  if (!a.ok || !b.ok) return false;
  const double pad = a.reach + b.reach;
  for (int k = 0; k < 4; ++k)
    if (a.hi[k] + pad < b.lo[k] || b.hi[k] + pad < a.lo[k]) return true;
  return false;
}

struct BoxRoots {
  std::vector<CertifiedRoot> roots;
  bool certified = true;
};

// Root search over d1's (inflated) base box. When d2's graph map is an
// evaluator it is only trusted near its own base square, so the box is
// subdivided until the traced coordinate stays in that trust region.
void search_roots(const PairGeometry& g, const GraphDisk& d2, const Box& box, int depth,
                  BoxRoots& out) {
  const bool evaluator2 = !g.same_chart && !d2.phi.is_poly();
  bool need_split = false;
  if (evaluator2) {
    const Box b2 = preiso_box(d2.base, 0.4 * d2.base.r);
    const Box b2far = preiso_box(d2.base, 0.05 * d2.base.r);
    double maxd = 0.0;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    bool finite = true;
    for (int i = 0; i < 5 && finite; ++i)
      for (int j = 0; j < 5; ++j) {
        const cplx zeta{box.x0 + (i + 0.5) * box.width() / 5,
                        box.y0 + (j + 0.5) * box.height() / 5};
        const cplx xi = g.xi(zeta);
        if (!std::isfinite(xi.real()) || !std::isfinite(xi.imag())) {
          finite = false;
          break;
        }
        xlo = std::min(xlo, xi.real());
        xhi = std::max(xhi, xi.real());
        ylo = std::min(ylo, xi.imag());
        yhi = std::max(yhi, xi.imag());
        const cplx zeta2 = zeta + cplx{box.width() * 0.01, 0.0};
        const cplx xi2 = g.xi(zeta2);
        if (std::isfinite(std::abs(xi2)))
          maxd = std::max(maxd, std::abs(xi2 - xi) / (box.width() * 0.01));
      }
    if (finite) {
      const double pad = maxd * box.diam() * 0.75;
      const Box reach{xlo - pad, xhi + pad, ylo - pad, yhi + pad};
      const bool misses = reach.x1 < b2far.x0 || reach.x0 > b2far.x1 || reach.y1 < b2far.y0 ||
                          reach.y0 > b2far.y1;
      if (misses && d2.base.iso.is_identity()) return;  // traced point cannot enter d2's base
      const bool inside = reach.x0 >= b2.x0 && reach.x1 <= b2.x1 && reach.y0 >= b2.y0 &&
                          reach.y1 <= b2.y1;
      if (!inside && depth < 6) need_split = true;
    } else if (depth < 6) {
      need_split = true;
    }
  }
  if (need_split) {
    const double xm = 0.5 * (box.x0 + box.x1), ym = 0.5 * (box.y0 + box.y1);
    search_roots(g, d2, Box{box.x0, xm, box.y0, ym}, depth + 1, out);
    search_roots(g, d2, Box{xm, box.x1, box.y0, ym}, depth + 1, out);
    search_roots(g, d2, Box{box.x0, xm, ym, box.y1}, depth + 1, out);
    search_roots(g, d2, Box{xm, box.x1, ym, box.y1}, depth + 1, out);
    return;
  }
  HoloFn F = [&g](cplx zeta) { return g.F(zeta); };
  const RootFindResult r = find_roots(F, box, {});
  if (!r.certified) out.certified = false;
  for (const auto& root : r.roots) out.roots.push_back(root);
}

}  // namespace

double GraphDisk::cr_residual(int n) const {
  const Box b = preiso_box(base);
  const double delta = 1e-5 * base.r;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx pre{b.x0 + (i + 0.5) * b.width() / n, b.y0 + (j + 0.5) * b.height() / n};
      const cplx zeta = base.iso.apply(pre);
      const cplx fx = (phi.eval(zeta + delta).first - phi.eval(zeta - delta).first) /
                      (2.0 * delta);
      const cplx fy = (phi.eval(zeta + cplx{0, delta}).first -
                       phi.eval(zeta - cplx{0, delta}).first) /
                      (2.0 * delta);
      worst = std::max(worst, 0.5 * std::abs(fx + cplx{0, 1} * fy));
    }
  return worst;
}

DisjointReport check_disjoint(const UniformLaminarPiece& piece, double threshold, int samples) {
  DisjointReport rep;
  rep.min_separation = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(piece.disks.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const GraphDisk& d1 = piece.disks[a].disk;
      const GraphDisk& d2 = piece.disks[b].disk;
      if (!chart_equal(d1.chart, d2.chart)) continue;
      const Box bx = preiso_box(d1.base);
      for (int i = 0; i < samples; ++i)
        for (int j = 0; j < samples; ++j) {
          const cplx pre{bx.x0 + (i + 0.5) * bx.width() / samples,
                         bx.y0 + (j + 0.5) * bx.height() / samples};
          const cplx zeta = d1.base.iso.apply(pre);
          if (!d1.base_contains(zeta) || !d2.base_contains(zeta)) continue;
          const double gap = std::abs(d1.phi.eval(zeta).first - d2.phi.eval(zeta).first);
          if (gap < rep.min_separation) {
            rep.min_separation = gap;
            if (gap < threshold) {
              rep.ok = false;
              rep.first = a;
              rep.second = b;
            }
          }
        }
    }
  return rep;
}

DiskIntersection disk_intersection(const GraphDisk& d1, const GraphDisk& d2, double ident_tol) {
  DiskIntersection out;
  // Equal polynomial graphs in the same chart carry no isolated intersections
  // anywhere (mask cuts of one graph included), so the pair is identified.
  if (chart_equal(d1.chart, d2.chart) && d1.phi.is_poly() && d2.phi.is_poly()) {
    const std::size_t m = std::max(d1.phi.poly.size(), d2.phi.poly.size());
    bool same = true;
    for (std::size_t k = 0; k < m && same; ++k) {
      const cplx c1 = k < d1.phi.poly.size() ? d1.phi.poly[k] : cplx{0.0, 0.0};
      const cplx c2 = k < d2.phi.poly.size() ? d2.phi.poly[k] : cplx{0.0, 0.0};
      same = c1 == c2;
    }
    if (same) {
      out.identified = true;
      return out;
    }
  }
  const PairGeometry g = make_pair_geometry(d1, d2);
  const double scale = pair_scale(d1, d2);

  const auto [sup, common] = sampled_overlap_gap(d1, d2, g);
  if (common >= 8 && sup <= ident_tol * scale) {
    out.identified = true;
    return out;
  }

  BoxRoots found;
  search_roots(g, d2, preiso_box(d1.base, 0.02 * d1.base.r), 0, found);
  if (!found.certified) out.certified = false;

  std::vector<std::pair<cplx, bool>> kept;
  for (const auto& root : found.roots) {
    const cplx zeta = root.z;
    if (!d1.base_contains(zeta)) continue;
    const cplx xi = g.xi(zeta);
    if (!d2.base_contains(xi)) continue;
    if (!root.polished && root.multiplicity == 1) out.certified = false;
    const bool tangent = root.multiplicity >= 2;
    kept.push_back({zeta, tangent});
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
    return a.first.imag() < b.first.imag();
  });
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0 && std::abs(kept[i].first - kept[i - 1].first) < 3e-9) continue;
    IntersectionPoint pt;
    pt.zeta = kept[i].first;
    pt.p = d1.point_at(kept[i].first);
    pt.tangential = kept[i].second;
    out.points.push_back(pt);
  }
  return out;
}

namespace {

// Canonical orientation for a disk pair so that the wedge is symmetric as a
// computation, not only in exact arithmetic.
std::array<double, 12> disk_key(const GraphDisk& d) {
  const cplx pc = d.phi.eval(d.base.center()).first;
  return {d.chart.base.a.real(), d.chart.base.a.imag(), d.chart.base.b.real(),
          d.chart.base.b.imag(), d.chart.trans.a.real(), d.chart.trans.a.imag(),
          d.chart.trans.b.real(), d.chart.trans.b.imag(), d.base.corner.real(),
          d.base.corner.imag(), d.base.r, std::abs(pc)};
}

bool base_boxes_disjoint(const GraphDisk& a, const GraphDisk& b) {
  if (!chart_equal(a.chart, b.chart)) return false;
  if (!a.base.iso.is_identity() || !b.base.iso.is_identity()) return false;
  const Box ba = preiso_box(a.base), bb = preiso_box(b.base);
  const double gap = 1e-12;
  return ba.x1 < bb.x0 - gap || bb.x1 < ba.x0 - gap || ba.y1 < bb.y0 - gap ||
         bb.y1 < ba.y0 - gap;
}

}  // namespace

GeometricWedge geometric_wedge(const std::vector<UniformLaminarPiece>& f1,
                               const std::vector<UniformLaminarPiece>& f2, double ident_tol) {
  GeometricWedge out;
  const bool same_family = &f1 == &f2;
  struct RawAtom {
    C2 p;
    double w;
    bool operator<(const RawAtom& o) const {
      if (p.z.real() != o.p.z.real()) return p.z.real() < o.p.z.real();
      if (p.z.imag() != o.p.z.imag()) return p.z.imag() < o.p.z.imag();
      if (p.w.real() != o.p.w.real()) return p.w.real() < o.p.w.real();
      return p.w.imag() < o.p.w.imag();
    }
  };
  std::vector<RawAtom> atoms;
  const auto ranges_of = [](const std::vector<UniformLaminarPiece>& f) {
    std::vector<std::vector<DiskRange>> r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      r[i].reserve(f[i].disks.size());
      for (const auto& wd : f[i].disks) r[i].push_back(sampled_disk_range(wd.disk));
    }
    return r;
  };
  const std::vector<std::vector<DiskRange>> r1 = ranges_of(f1);
  const std::vector<std::vector<DiskRange>> r2 = same_family ? r1 : ranges_of(f2);
  for (std::size_t i1 = 0; i1 < f1.size(); ++i1)
    for (std::size_t j1 = 0; j1 < f1[i1].disks.size(); ++j1)
      for (std::size_t i2 = 0; i2 < f2.size(); ++i2)
        for (std::size_t j2 = 0; j2 < f2[i2].disks.size(); ++j2) {
          if (same_family && i1 == i2 && j1 == j2) continue;
          const WeightedDisk& a = f1[i1].disks[j1];
          const WeightedDisk& b = f2[i2].disks[j2];
          if (base_boxes_disjoint(a.disk, b.disk)) continue;
          if (ranges_disjoint(r1[i1][j1], r2[i2][j2])) continue;
          const bool swap = disk_key(b.disk) < disk_key(a.disk);
          const GraphDisk& lo = swap ? b.disk : a.disk;
          const GraphDisk& hi = swap ? a.disk : b.disk;
          const DiskIntersection isect = disk_intersection(lo, hi, ident_tol);
          if (isect.identified) {
            ++out.identified_pairs;
            continue;
          }
          if (!isect.certified) {
            out.certified = false;
            out.excluded_weight += a.weight * b.weight;
            continue;
          }
          for (const auto& pt : isect.points) {
            atoms.push_back({pt.p, a.weight * b.weight});
            if (pt.tangential) ++out.tangential_points;
          }
        }
  std::sort(atoms.begin(), atoms.end());
  for (const auto& a : atoms) out.measure.add(a.p, a.w);
  return out;
}

AdmissibilityReport admissibility_check(const std::vector<UniformLaminarPiece>& f1,
                                        const std::vector<UniformLaminarPiece>& f2,
                                        double ident_tol) {
  AdmissibilityReport rep;
  rep.min_separation = std::numeric_limits<double>::infinity();
  for (std::size_t i1 = 0; i1 < f1.size(); ++i1)
    for (std::size_t j1 = 0; j1 < f1[i1].disks.size(); ++j1)
      for (std::size_t i2 = 0; i2 < f2.size(); ++i2)
        for (std::size_t j2 = 0; j2 < f2[i2].disks.size(); ++j2) {
          const GraphDisk& d1 = f1[i1].disks[j1].disk;
          const GraphDisk& d2 = f2[i2].disks[j2].disk;
          if (base_boxes_disjoint(d1, d2)) continue;
          const PairGeometry g = make_pair_geometry(d1, d2);
          const double scale = pair_scale(d1, d2);
          const auto [sup, common] = sampled_overlap_gap(d1, d2, g);
          if (common < 8) continue;
          if (sup <= ident_tol * scale) {
            rep.admissible = false;
            rep.piece1 = static_cast<int>(i1);
            rep.disk1 = static_cast<int>(j1);
            rep.piece2 = static_cast<int>(i2);
            rep.disk2 = static_cast<int>(j2);
            return rep;
          }
          rep.min_separation = std::min(rep.min_separation, sup);
        }
  return rep;
}

AssembleReport assemble_increasing(const std::vector<LaminarStage>& stages, double skeleton_eps,
                                   double skeleton_tol) {
  AssembleReport rep;
  auto stage_mass = [](const LaminarStage& st) {
    double m = 0.0;
    for (const auto& piece : st.pieces)
      for (const auto& d : piece.disks) m += d.weight * d.disk.base.r * d.disk.base.r;
    return m;
  };
  for (const auto& st : stages) rep.stage_masses.push_back(stage_mass(st));
  for (std::size_t s = 0; s + 1 < stages.size(); ++s) {
    if (rep.stage_masses[s + 1] < rep.stage_masses[s] - 1e-12) {
      rep.increasing = false;
      rep.violating_stage = static_cast<int>(s + 1);
      return rep;
    }
    int flat_index = 0;
    for (const auto& piece : stages[s].pieces)
      for (const auto& wd : piece.disks) {
        bool continued = false;
        for (const auto& piece2 : stages[s + 1].pieces) {
          for (const auto& wd2 : piece2.disks) {
            if (wd2.weight + 1e-12 < wd.weight) continue;
            const PairGeometry g = make_pair_geometry(wd2.disk, wd.disk);
            const auto [sup, common] = sampled_overlap_gap(wd2.disk, wd.disk, g);
            const double scale = pair_scale(wd2.disk, wd.disk);
            if (common >= 4 && sup <= 1e-9 * scale) {
              continued = true;
              break;
            }
          }
          if (continued) break;
        }
        if (!continued) {
          rep.increasing = false;
          rep.violating_stage = static_cast<int>(s);
          rep.violating_disk = flat_index;
          return rep;
        }
        ++flat_index;
      }
  }
  // Trace mass near the stage skeleton: fraction of base samples within
  // skeleton_eps of the matching subdivision's cell lines.
  double skel = 0.0, total = 0.0;
  for (const auto& st : stages) {
    for (const auto& piece : st.pieces)
      for (const auto& wd : piece.disks) {
        const Subdivision& sub =
            chart_equal(wd.disk.chart, chart_zw()) ? st.cells.s1 : st.cells.s2;
        const Box b = preiso_box(wd.disk.base);
        const int n = 12;
        int near_line = 0, inside = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const cplx pre{b.x0 + (i + 0.5) * b.width() / n,
                           b.y0 + (j + 0.5) * b.height() / n};
            const cplx zeta = wd.disk.base.iso.apply(pre);
            if (!wd.disk.base_contains(zeta)) continue;
            ++inside;
            const cplx local = sub.iso.invert(zeta) - sub.offset;
            const double fx = std::abs(local.real() / sub.r - std::round(local.real() / sub.r));
            const double fy = std::abs(local.imag() / sub.r - std::round(local.imag() / sub.r));
            if (std::min(fx, fy) * sub.r < skeleton_eps) ++near_line;
          }
        const double m = wd.weight * wd.disk.base.r * wd.disk.base.r;
        total += m;
        if (inside > 0) skel += m * near_line / inside;
      }
  }
  rep.skeleton_mass = total > 0 ? skel / total : 0.0;
  if (rep.skeleton_mass > skeleton_tol) rep.increasing = false;
  return rep;
}

PotentialFn piece_potential(const std::vector<UniformLaminarPiece>& family) {
  struct Term {
    Chart chart;
    GraphMap phi;
    double weight;
  };
  auto terms = std::make_shared<std::vector<Term>>();
  for (const auto& piece : family)
    for (const auto& wd : piece.disks) terms->push_back({wd.disk.chart, wd.disk.phi, wd.weight});
  return [terms](const C2& p) {
    double u = 0.0;
    for (const auto& t : *terms) {
      const cplx gap = t.chart.trans(p) - t.phi.eval(t.chart.base(p)).first;
      u += t.weight * std::log(std::abs(gap));
    }
    return u;
  };
}

UniformWedgeComparison uniform_wedge_compare(const std::vector<UniformLaminarPiece>& f1,
                                             const std::vector<UniformLaminarPiece>& f2,
                                             const Polydisk& sample_dom, double h,
                                             const std::vector<double>& sigmas,
                                             const CubeGrid& bins, const WedgeRegion& region) {
  UniformWedgeComparison cmp;
  const Grid4 u1 = sample_potential(piece_potential(f1), sample_dom, h, "u1");
  const Grid4 u2 = sample_potential(piece_potential(f2), sample_dom, h, "u2");
  cmp.wedge = wedge_by_potentials(u1, u2, sigmas, bins, region);
  cmp.potential_side = cmp.wedge.measure;
  cmp.geometric = geometric_wedge(f1, f2);
  cmp.geometric_side = bin_measure(cmp.geometric.measure, bins);
  cmp.distance = binned_distance(cmp.potential_side, cmp.geometric_side);
  for (const auto& [key, gm] : cmp.geometric_side.bins) {
    const auto it = cmp.potential_side.bins.find(key);
    const double pm = it == cmp.potential_side.bins.end() ? 0.0 : it->second;
    cmp.max_domination_defect = std::max(cmp.max_domination_defect, gm - pm);
  }
  return cmp;
}

}  // namespace lam
