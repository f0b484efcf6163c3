#include "laminaire/approx.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <tuple>

namespace lam {

double CurveIterate::cr_residual(int n) const {
  const double delta = 1e-5 * std::max(param_box.width(), param_box.height());
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx t{param_box.x0 + (i + 0.5) * param_box.width() / n,
                   param_box.y0 + (j + 0.5) * param_box.height() / n};
      const C2 px = eval(t + delta).first, mx = eval(t - delta).first;
      const C2 py = eval(t + cplx{0, delta}).first, my = eval(t - cplx{0, delta}).first;
      const cplx zx = (px.z - mx.z) / (2 * delta), zy = (py.z - my.z) / (2 * delta);
      const cplx wx = (px.w - mx.w) / (2 * delta), wy = (py.w - my.w) / (2 * delta);
      const double denom = 1.0 + std::abs(eval(t).second.z) + std::abs(eval(t).second.w);
      worst = std::max(worst, 0.5 * std::abs(zx + cplx{0, 1} * zy) / denom);
      worst = std::max(worst, 0.5 * std::abs(wx + cplx{0, 1} * wy) / denom);
    }
  return worst;
}

namespace {

constexpr double kGauss3Nodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGauss3Weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

struct Leaf {
  Box b;
  long j = 0, k = 0;
  bool ambiguous = false;
  double area_proj = 0.0, area_full = 0.0, area_param = 0.0;
  cplx t_center, zeta_center;
};

struct Explorer {
  const CurveIterate& c;
  const Chart& chart;
  const Subdivision& cells;
  const ClassifyOptions& opt;
  std::vector<Leaf> leaves;
  bool certified = true;

  void measure(Leaf& lf) const {
    double ap = 0.0, af = 0.0;
    for (int gi = 0; gi < 3; ++gi)
      for (int gj = 0; gj < 3; ++gj) {
        const cplx t{0.5 * (lf.b.x0 + lf.b.x1) + 0.5 * lf.b.width() * kGauss3Nodes[gi],
                     0.5 * (lf.b.y0 + lf.b.y1) + 0.5 * lf.b.height() * kGauss3Nodes[gj]};
        const C2 dp = c.eval(t).second;
        const double w = kGauss3Weights[gi] * kGauss3Weights[gj];
        ap += w * std::norm(chart.base(dp));
        af += w * (std::norm(dp.z) + std::norm(dp.w));
      }
    const double scale = 0.25 * lf.b.width() * lf.b.height();
    lf.area_proj = ap * scale;
    lf.area_full = af * scale;
    lf.area_param = lf.b.width() * lf.b.height();
  }

  void explore(const Box& b, int depth) {
    const int n = 4;
    double zxlo = 1e300, zxhi = -1e300, zylo = 1e300, zyhi = -1e300;
    double min_eta = 1e300, max_dz = 0.0, max_deta = 0.0;
    bool finite = true;
    cplx center_zeta;
    for (int i = 0; i < n && finite; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx t{b.x0 + (i + 0.5) * b.width() / n, b.y0 + (j + 0.5) * b.height() / n};
        const auto [p, dp] = c.eval(t);
        const cplx zeta = chart.base(p), eta = chart.trans(p);
        if (!std::isfinite(std::abs(zeta)) || !std::isfinite(std::abs(eta))) {
          finite = false;
          break;
        }
        zxlo = std::min(zxlo, zeta.real());
        zxhi = std::max(zxhi, zeta.real());
        zylo = std::min(zylo, zeta.imag());
        zyhi = std::max(zyhi, zeta.imag());
        min_eta = std::min(min_eta, std::abs(eta));
        max_dz = std::max(max_dz, std::abs(chart.base(dp)));
        max_deta = std::max(max_deta, std::abs(chart.trans(dp)));
        if (i == 1 && j == 1) center_zeta = zeta;
      }
    if (!finite) {
      if (depth < opt.max_depth) {
        split(b, depth);
      } else {
        certified = false;  // numeric range exceeded: area dropped, flagged
      }
      return;
    }
    // Sample gap to any point of the box is diam/(2n) in each direction.
    const double reach = 1.5 * b.diam() / n;
    if (min_eta - max_deta * reach > opt.transverse_cap) return;  // leaves the cylinder
    const double pad = max_dz * reach + 1e-12;
    const long jlo = cell_index(zxlo - pad, cells.offset.real(), cells.r);
    const long jhi = cell_index(zxhi + pad, cells.offset.real(), cells.r);
    const long klo = cell_index(zylo - pad, cells.offset.imag(), cells.r);
    const long khi = cell_index(zyhi + pad, cells.offset.imag(), cells.r);
    if (jlo == jhi && klo == khi) {
      if (!cells.has_cell(jlo, klo)) return;
      Leaf lf;
      lf.b = b;
      lf.j = jlo;
      lf.k = klo;
      lf.t_center = cplx{0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1)};
      lf.zeta_center = center_zeta;
      measure(lf);
      leaves.push_back(lf);
      return;
    }
    if ((jhi - jlo + 1) * (khi - klo + 1) <= 64) {
      bool any = false;
      for (long j = jlo; j <= jhi && !any; ++j)
        for (long k = klo; k <= khi; ++k)
          if (cells.has_cell(j, k)) {
            any = true;
            break;
          }
      if (!any) return;
    }
    const double zdiam = std::hypot(zxhi - zxlo, zyhi - zylo) + 2 * pad;
    if (depth >= opt.max_depth || zdiam < 2e-3 * cells.r) {
      // Unresolved straddle: conservatively bad, assigned by its center.
      const auto [j, k] = cells.cell_of(center_zeta);
      if (!cells.has_cell(j, k)) return;
      Leaf lf;
      lf.b = b;
      lf.j = j;
      lf.k = k;
      lf.ambiguous = true;
      lf.t_center = cplx{0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1)};
      lf.zeta_center = center_zeta;
      measure(lf);
      leaves.push_back(lf);
      return;
    }
    split(b, depth);
  }

  void split(const Box& b, int depth) {
    const double xm = 0.5 * (b.x0 + b.x1), ym = 0.5 * (b.y0 + b.y1);
    explore(Box{b.x0, xm, b.y0, ym}, depth + 1);
    explore(Box{xm, b.x1, b.y0, ym}, depth + 1);
    explore(Box{b.x0, xm, ym, b.y1}, depth + 1);
    explore(Box{xm, b.x1, ym, b.y1}, depth + 1);
  }
};

struct DSU {
  std::vector<int> parent;
  explicit DSU(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Merge leaves sharing a positive-length edge within one cell. Quadtree
// coordinates are dyadic, so exact comparisons match.
void connect_leaves(const std::vector<Leaf>& leaves, const std::vector<int>& idx, DSU& dsu) {
  struct Edge {
    double coord, lo, hi;
    int leaf;
  };
  std::vector<Edge> lefts, rights, bottoms, tops;
  for (int id : idx) {
    const Box& b = leaves[id].b;
    lefts.push_back({b.x0, b.y0, b.y1, id});
    rights.push_back({b.x1, b.y0, b.y1, id});
    bottoms.push_back({b.y0, b.x0, b.x1, id});
    tops.push_back({b.y1, b.x0, b.x1, id});
  }
  auto match = [&dsu](std::vector<Edge>& a, std::vector<Edge>& b) {
    auto cmp = [](const Edge& u, const Edge& v) {
      if (u.coord != v.coord) return u.coord < v.coord;
      return u.lo < v.lo;
    };
    std::sort(a.begin(), a.end(), cmp);
    std::sort(b.begin(), b.end(), cmp);
    std::size_t jb = 0;
    for (std::size_t ia = 0; ia < a.size(); ++ia) {
      while (jb < b.size() &&
             (b[jb].coord < a[ia].coord || (b[jb].coord == a[ia].coord && b[jb].hi <= a[ia].lo)))
        ++jb;
      for (std::size_t j = jb; j < b.size() && b[j].coord == a[ia].coord && b[j].lo < a[ia].hi;
           ++j)
        if (std::min(a[ia].hi, b[j].hi) - std::max(a[ia].lo, b[j].lo) > 0)
          dsu.unite(a[ia].leaf, b[j].leaf);
    }
  };
  match(rights, lefts);  // right edge of one box against left edge of another
  match(tops, bottoms);
}

}  // namespace

Classification classify_components(const CurveIterate& c, const Chart& chart,
                                   const Subdivision& cells, const ClassifyOptions& opt) {
  LAM_REQUIRE(chart.valid(), "classify_components: degenerate chart");
  Classification cls;
  cls.cells = cells;
  cls.chart = chart;

  Explorer ex{c, chart, cells, opt, {}, true};
  ex.explore(c.param_box, 0);
  cls.certified = ex.certified;
  auto& leaves = ex.leaves;

  // Group leaves by cell, then merge edge-adjacent boxes into components.
  std::map<std::pair<long, long>, std::vector<int>> by_cell;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    by_cell[{leaves[i].j, leaves[i].k}].push_back(static_cast<int>(i));
  DSU dsu(static_cast<int>(leaves.size()));
  for (const auto& [cell, idx] : by_cell) connect_leaves(leaves, idx, dsu);

  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    groups[dsu.find(static_cast<int>(i))].push_back(static_cast<int>(i));

  for (const auto& [root, members] : groups) {
    ComponentRecord comp;
    comp.jz = leaves[root].j;
    comp.kz = leaves[root].k;
    bool any_resolved = false;
    for (int id : members) {
      const Leaf& lf = leaves[id];
      comp.area_proj += lf.area_proj;
      comp.area_full += lf.area_full;
      comp.area_param += lf.area_param;
      comp.boxes.push_back(lf.b);
      if (lf.ambiguous)
        comp.area_sliver += lf.area_proj;
      else
        any_resolved = true;
    }
    comp.pure_ambiguous = !any_resolved;
    // Seeds come from resolved boxes only; a Newton start inside a boundary
    // sliver could converge onto the neighboring sheet.
    std::vector<int> resolved;
    for (int id : members)
      if (!leaves[id].ambiguous) resolved.push_back(id);
    const std::vector<int>& seed_pool = resolved.empty() ? members : resolved;
    const std::size_t stride = std::max<std::size_t>(1, seed_pool.size() / opt.max_seeds);
    for (std::size_t m = 0; m < seed_pool.size(); m += stride)
      comp.seeds.push_back({leaves[seed_pool[m]].t_center, leaves[seed_pool[m]].zeta_center});
    cls.components.push_back(std::move(comp));
  }

  // Certified covering degree per component: winding of (base o gamma) - q
  // summed over member boxes (internal edges cancel as exact integers). Boxes
  // whose image stays away from the probe contribute zero without integration.
  const double r = cells.r;
  const cplx probe_nudges[3] = {cplx{0, 0}, cplx{0.0137, 0.0071}, cplx{-0.0093, 0.0113}};
  const cplx probe_offsets[5] = {cplx{0, 0}, cplx{0.22, 0.22}, cplx{-0.22, 0.22},
                                 cplx{-0.22, -0.22}, cplx{0.22, -0.22}};
  parallel_nodes(cls.components.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t ci = lo; ci < hi; ++ci) {
      ComponentRecord& comp = cls.components[ci];
      const AffineSquare sq = cells.square(comp.jz, comp.kz);
      const cplx cc = sq.center();
      bool all_one = true, failed = false;
      long max_deg = 0;
      for (const cplx& off : probe_offsets) {
        std::optional<long> deg;
        for (const cplx& nudge : probe_nudges) {
          const cplx q = cc + (off + nudge) * r;
          long total = 0;
          bool ok = true;
          for (const Box& b : comp.boxes) {
            // Quick reject: probe outside the box's reachable image.
            double zxlo = 1e300, zxhi = -1e300, zylo = 1e300, zyhi = -1e300, md = 0.0;
            for (int i = 0; i < 3 && ok; ++i)
              for (int j = 0; j < 3; ++j) {
                const cplx t{b.x0 + (i + 0.5) * b.width() / 3,
                             b.y0 + (j + 0.5) * b.height() / 3};
                const auto [p, dp] = c.eval(t);
                const cplx zeta = chart.base(p);
                if (!std::isfinite(std::abs(zeta))) {
                  ok = false;
                  break;
                }
                zxlo = std::min(zxlo, zeta.real());
                zxhi = std::max(zxhi, zeta.real());
                zylo = std::min(zylo, zeta.imag());
                zyhi = std::max(zyhi, zeta.imag());
                md = std::max(md, std::abs(chart.base(dp)));
              }
            if (!ok) break;
            const double pad = md * b.diam() * 0.5 + 1e-12;
            if (q.real() < zxlo - pad || q.real() > zxhi + pad || q.imag() < zylo - pad ||
                q.imag() > zyhi + pad)
              continue;
            HoloFn F = [&](cplx t) {
              const auto [p, dp] = c.eval(t);
              return std::pair<cplx, cplx>{chart.base(p) - q, chart.base(dp)};
            };
            const auto w = winding_number(F, b, {});
            if (!w) {
              ok = false;
              break;
            }
            total += *w;
          }
          if (ok) {
            deg = total;
            break;
          }
        }
        if (!deg) {
          failed = true;
          break;
        }
        max_deg = std::max(max_deg, *deg);
        if (*deg != 1) all_one = false;
      }
      comp.degree = failed ? -1 : max_deg;
      const double area_slack = opt.graph_area_tol * r * r + comp.area_sliver;
      const bool area_ok = std::abs(comp.area_proj - r * r) <= area_slack &&
                           comp.area_sliver <= 0.25 * r * r;
      comp.good = !comp.pure_ambiguous && !failed && all_one && area_ok;
    }
  });
  if (std::any_of(cls.components.begin(), cls.components.end(),
                  [](const ComponentRecord& cr) { return cr.degree < 0; }))
    cls.certified = false;

  for (const auto& comp : cls.components) {
    cls.total_area_proj += comp.area_proj;
    (comp.good ? cls.good_area_proj : cls.bad_area_proj) += comp.area_proj;
  }
  return cls;
}

DefectReport defect_mass(const Classification& cls, double d_n) {
  LAM_REQUIRE(d_n > 0, "defect_mass: degree must be positive");
  DefectReport rep;
  rep.r = cls.cells.r;
  rep.normalized_defect = cls.bad_area_proj / d_n;
  rep.constant_estimate = rep.normalized_defect / (rep.r * rep.r);
  return rep;
}

GraphMap sheet_graph(const CurveIterate& c, const Chart& chart,
                     std::shared_ptr<const ComponentRecord> comp) {
  GraphMap g;
  const auto eval = c.eval;
  const Projection base = chart.base, trans = chart.trans;
  g.evaluator = [eval, base, trans, comp](cplx xi) -> std::pair<cplx, cplx> {
    double best = 1e300;
    cplx t{0, 0};
    for (const auto& [ts, zs] : comp->seeds) {
      const double d = std::abs(zs - xi);
      if (d < best) {
        best = d;
        t = ts;
      }
    }
    const double tol = 1e-14 * (1.0 + std::abs(xi));
    for (int it = 0; it < 60; ++it) {
      const auto [p, dp] = eval(t);
      const cplx f = base(p) - xi;
      const cplx df = base(dp);
      if (std::abs(f) <= tol) return {trans(p), trans(dp) / df};
      if (!(std::abs(df) > 0.0) || !std::isfinite(std::abs(f))) break;
      t -= f / df;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {cplx{nan, nan}, cplx{nan, nan}};
  };
  return g;
}

namespace {

// Boxes of one classification tile disjointly, so summed pairwise
// intersections against another tiling equal the area shared with its union.
// A bucketed index keeps that pairing near-linear in the box count.
class BoxCoverage {
 public:
  BoxCoverage(const std::vector<const ComponentRecord*>& comps, const Box& root) {
    std::size_t total = 0;
    for (const auto* c : comps) total += c->boxes.size();
    const int n = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(total))) + 1, 1, 1024);
    nx_ = ny_ = n;
    x0_ = root.x0;
    y0_ = root.y0;
    cx_ = root.width() / nx_;
    cy_ = root.height() / ny_;
    boxes_.reserve(total);
    for (const auto* c : comps) boxes_.insert(boxes_.end(), c->boxes.begin(), c->boxes.end());
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (const Box& b : boxes_) {
      const auto [i0, i1, j0, j1] = span(b);
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) ++start_[static_cast<std::size_t>(i) * ny_ + j + 1];
    }
    std::partial_sum(start_.begin(), start_.end(), start_.begin());
    entries_.resize(start_.back());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (int bi = 0; bi < static_cast<int>(boxes_.size()); ++bi) {
      const auto [i0, i1, j0, j1] = span(boxes_[bi]);
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j)
          entries_[static_cast<std::size_t>(fill[static_cast<std::size_t>(i) * ny_ + j]++)] = bi;
    }
    stamp_.assign(boxes_.size(), 0);
  }

  double shared_with(const Box& b) {
    ++epoch_;
    const auto [i0, i1, j0, j1] = span(b);
    double shared = 0.0;
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        const std::size_t cell = static_cast<std::size_t>(i) * ny_ + j;
        for (int e = start_[cell]; e < start_[cell + 1]; ++e) {
          const int bi = entries_[e];
          if (stamp_[bi] == epoch_) continue;
          stamp_[bi] = epoch_;
          const Box& ob = boxes_[bi];
          const double w = std::min(b.x1, ob.x1) - std::max(b.x0, ob.x0);
          const double h = std::min(b.y1, ob.y1) - std::max(b.y0, ob.y0);
          if (w > 0 && h > 0) shared += w * h;
        }
      }
    return shared;
  }

 private:
  std::array<int, 4> span(const Box& b) const {
    return {std::clamp(static_cast<int>((b.x0 - x0_) / cx_), 0, nx_ - 1),
            std::clamp(static_cast<int>((b.x1 - x0_) / cx_), 0, nx_ - 1),
            std::clamp(static_cast<int>((b.y0 - y0_) / cy_), 0, ny_ - 1),
            std::clamp(static_cast<int>((b.y1 - y0_) / cy_), 0, ny_ - 1)};
  }

  double x0_ = 0.0, y0_ = 0.0, cx_ = 1.0, cy_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<Box> boxes_;
  std::vector<int> start_, entries_;
  std::vector<unsigned> stamp_;
  unsigned epoch_ = 0;
};

}  // namespace

SheetFamily build_uniform_pieces(const CurveIterate& c, const Chart& chart1, const Chart& chart2,
                                 const Subdivision& s1, const Subdivision& s2,
                                 const ClassifyOptions& opt) {
  SheetFamily fam;
  fam.cls1 = classify_components(c, chart1, s1, opt);
  fam.cls2 = classify_components(c, chart2, s2, opt);

  auto good_of = [](const Classification& cls) {
    std::vector<const ComponentRecord*> g;
    for (const auto& comp : cls.components)
      if (comp.good) g.push_back(&comp);
    return g;
  };
  auto median_full = [](const std::vector<const ComponentRecord*>& g) {
    if (g.empty()) return 0.0;
    std::vector<double> a;
    for (const auto* comp : g) a.push_back(comp->area_full);
    std::sort(a.begin(), a.end());
    return a[a.size() / 2];
  };

  std::vector<const ComponentRecord*> good1 = good_of(fam.cls1), good2 = good_of(fam.cls2);
  double removed_proj = 0.0;
  auto apply_cap = [&](std::vector<const ComponentRecord*>& g) {
    const double cap = 10.0 * median_full(g);
    std::vector<const ComponentRecord*> kept;
    for (const auto* comp : g) {
      if (cap > 0 && comp->area_full > cap) {
        fam.removed_overvolume += comp->area_full;
        removed_proj += comp->area_proj;
      } else {
        kept.push_back(comp);
      }
    }
    g = kept;
  };
  apply_cap(good1);
  apply_cap(good2);

  // Union semantics: drop chart-2 sheets already mostly covered by chart-1
  // sheets (same curve piece graphed twice).
  BoxCoverage cover1(good1, c.param_box);
  std::vector<const ComponentRecord*> kept2;
  for (const auto* comp : good2) {
    double shared = 0.0;
    for (const Box& b : comp->boxes) shared += cover1.shared_with(b);
    if (shared > 0.5 * comp->area_param) {
      fam.duplicate_overlap += shared;
    } else {
      kept2.push_back(comp);
    }
  }

  const double w = 1.0 / c.degree;
  std::map<std::tuple<int, long, long>, UniformLaminarPiece> pieces;
  auto emit = [&](const std::vector<const ComponentRecord*>& comps, const Chart& chart,
                  const Subdivision& cells, int which) {
    for (const auto* comp : comps) {
      auto holder = std::make_shared<ComponentRecord>(*comp);
      GraphDisk d{chart, cells.square(comp->jz, comp->kz, which), {},
                  sheet_graph(c, chart, holder)};
      pieces[{which, comp->jz, comp->kz}].disks.push_back({std::move(d), w});
    }
  };
  emit(good1, chart1, s1, 0);
  emit(kept2, chart2, s2, 1);
  for (auto& [key, piece] : pieces) fam.pieces.push_back(std::move(piece));

  fam.defect.r = s1.r;
  fam.defect.normalized_defect =
      (fam.cls1.bad_area_proj + fam.cls2.bad_area_proj + removed_proj) / c.degree;
  fam.defect.constant_estimate = fam.defect.normalized_defect / (s1.r * s1.r);
  return fam;
}

namespace {

double axis_origin(const Subdivision& s, bool imag_part) {
  return imag_part ? s.offset.imag() : s.offset.real();
}

bool core_contains(double x, double origin, double shift, double r, double lambda) {
  const double f = x - origin - shift;
  const double frac = f - r * std::floor(f / r);
  return std::abs(frac - 0.5 * r) <= 0.5 * lambda * r;
}

}  // namespace

TranslateReport translate_search(const AtomicMeasure& nu, const CubeGrid& grid, double lambda,
                                 int grid_n) {
  LAM_REQUIRE(lambda > 0.0 && lambda < 1.0, "translate_search: lambda must be in (0,1)");
  LAM_REQUIRE(nu.mass() <= 1.0 + 1e-9, "translate_search: measure mass must be <= 1");
  LAM_REQUIRE(grid.s1.iso.is_identity() && grid.s2.iso.is_identity(),
              "translate_search: identity isometries only");
  const double r = grid.s1.r;
  LAM_REQUIRE(std::abs(grid.s2.r - r) < 1e-12, "translate_search: factor sizes differ");
  const int n = grid_n;
  const double origins[4] = {axis_origin(grid.s1, false), axis_origin(grid.s1, true),
                             axis_origin(grid.s2, false), axis_origin(grid.s2, true)};

  std::vector<double> stay(static_cast<std::size_t>(n) * n * n * n, 0.0);
  std::vector<std::array<std::vector<char>, 4>> marks(nu.atoms().size());
  for (std::size_t ai = 0; ai < nu.atoms().size(); ++ai) {
    const C2& p = nu.atoms()[ai].p;
    const double coords[4] = {grid.p1(p).real(), grid.p1(p).imag(), grid.p2(p).real(),
                              grid.p2(p).imag()};
    for (int a = 0; a < 4; ++a) {
      marks[ai][a].resize(n);
      for (int q = 0; q < n; ++q)
        marks[ai][a][q] =
            core_contains(coords[a], origins[a], (q + 0.5) * r / n, r, lambda) ? 1 : 0;
    }
  }
  for (std::size_t ai = 0; ai < nu.atoms().size(); ++ai) {
    const double w = nu.atoms()[ai].weight;
    const auto& m = marks[ai];
    for (int a = 0; a < n; ++a) {
      if (!m[0][a]) continue;
      for (int b = 0; b < n; ++b) {
        if (!m[1][b]) continue;
        for (int cq = 0; cq < n; ++cq) {
          if (!m[2][cq]) continue;
          for (int d = 0; d < n; ++d)
            if (m[3][d]) stay[((static_cast<std::size_t>(a) * n + b) * n + cq) * n + d] += w;
        }
      }
    }
  }

  TranslateReport rep;
  rep.grid_n = n;
  rep.expected_escape = (1.0 - std::pow(lambda, 4)) * nu.mass();
  double best = -1.0, sum = 0.0;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < stay.size(); ++i) {
    sum += stay[i];
    if (stay[i] > best) {
      best = stay[i];
      best_idx = i;
    }
  }
  rep.avg_escaped = nu.mass() - sum / static_cast<double>(stay.size());
  rep.min_escaped = nu.mass() - best;
  const int d = static_cast<int>(best_idx % n);
  const int cq = static_cast<int>((best_idx / n) % n);
  const int b = static_cast<int>((best_idx / n / n) % n);
  const int a = static_cast<int>(best_idx / n / n / n);
  rep.Z = C2{cplx{(a + 0.5) * r / n, (b + 0.5) * r / n},
             cplx{(cq + 0.5) * r / n, (d + 0.5) * r / n}};
  return rep;
}

TranslateReport translate_search_density(const Grid4& density, const WedgeRegion& region,
                                         double r, double lambda, int grid_n) {
  LAM_REQUIRE(lambda > 0.0 && lambda < 1.0, "translate_search: lambda must be in (0,1)");
  const int n = grid_n;
  const auto [covz, covw] = region_axis_coverage(density, region);

  auto axis_marks = [&](int count, auto coord) {
    std::vector<char> m(static_cast<std::size_t>(count) * n);
    for (int i = 0; i < count; ++i)
      for (int q = 0; q < n; ++q)
        m[static_cast<std::size_t>(i) * n + q] =
            core_contains(coord(i), 0.0, (q + 0.5) * r / n, r, lambda) ? 1 : 0;
    return m;
  };
  const auto mx = axis_marks(density.nx, [&](int i) { return density.x(i); });
  const auto my = axis_marks(density.ny, [&](int j) { return density.y(j); });
  const auto ms = axis_marks(density.ns, [&](int k) { return density.s(k); });
  const auto mt = axis_marks(density.nt, [&](int l) { return density.t(l); });

  const std::size_t nx = density.nx, ny = density.ny, ns = density.ns, nt = density.nt;
  double total_mass = 0.0;
  // Contract the t axis for each of the n offsets, then s, y, x; the region
  // coverage factors are folded in where their index pair is eliminated.
  std::vector<double> A1(static_cast<std::size_t>(n) * nx * ny * ns, 0.0);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double cz = covz[i * ny + j];
      if (cz == 0.0) continue;
      for (std::size_t k = 0; k < ns; ++k) {
        const double* row = &density.v[density.idx(static_cast<int>(i), static_cast<int>(j),
                                                   static_cast<int>(k), 0)];
        double tm = 0.0;
        double acc[16] = {0};
        for (std::size_t l = 0; l < nt; ++l) {
          const double w = row[l] * covw[k * nt + l];
          tm += w;
          for (int q = 0; q < n; ++q)
            if (mt[l * n + q]) acc[q] += w;
        }
        total_mass += tm * cz;
        for (int q = 0; q < n; ++q)
          A1[((static_cast<std::size_t>(q) * nx + i) * ny + j) * ns + k] = acc[q] * cz;
      }
    }

  std::vector<double> A2(static_cast<std::size_t>(n) * n * nx * ny, 0.0);
  for (int q = 0; q < n; ++q)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        const double* src = &A1[((static_cast<std::size_t>(q) * nx + i) * ny + j) * ns];
        double acc[16] = {0};
        for (std::size_t k = 0; k < ns; ++k)
          for (int p = 0; p < n; ++p)
            if (ms[k * n + p]) acc[p] += src[k];
        for (int p = 0; p < n; ++p)
          A2[((static_cast<std::size_t>(p) * n + q) * nx + i) * ny + j] = acc[p];
      }

  std::vector<double> A3(static_cast<std::size_t>(n) * n * n * nx, 0.0);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (std::size_t i = 0; i < nx; ++i) {
        const double* src = &A2[((static_cast<std::size_t>(p) * n + q) * nx + i) * ny];
        double acc[16] = {0};
        for (std::size_t j = 0; j < ny; ++j)
          for (int u = 0; u < n; ++u)
            if (my[j * n + u]) acc[u] += src[j];
        for (int u = 0; u < n; ++u)
          A3[(((static_cast<std::size_t>(u) * n + p) * n + q) * nx) + i] = acc[u];
      }

  TranslateReport rep;
  rep.grid_n = n;
  rep.expected_escape = (1.0 - std::pow(lambda, 4)) * total_mass;
  double best = -1.0, sum = 0.0;
  int bi[4] = {0, 0, 0, 0};
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          const double* src = &A3[(((static_cast<std::size_t>(u) * n + p) * n + q) * nx)];
          double stay = 0.0;
          for (std::size_t i = 0; i < nx; ++i)
            if (mx[i * n + v]) stay += src[i];
          sum += stay;
          if (stay > best) {
            best = stay;
            bi[0] = v;
            bi[1] = u;
            bi[2] = p;
            bi[3] = q;
          }
        }
  const double cell = r / n;
  rep.avg_escaped = total_mass - sum / (static_cast<double>(n) * n * n * n);
  rep.min_escaped = total_mass - best;
  rep.Z = C2{cplx{(bi[0] + 0.5) * cell, (bi[1] + 0.5) * cell},
             cplx{(bi[2] + 0.5) * cell, (bi[3] + 0.5) * cell}};
  return rep;
}

namespace {

using RefKey = std::array<long, 8>;

struct RefinedBins {
  std::map<RefKey, double> bins;
  double overflow = 0.0;
};

std::optional<RefKey> refined_key(const C2& p, const CubeGrid& g1, const CubeGrid& g2) {
  const auto k1 = g1.bin_of(p);
  const auto k2 = g2.bin_of(p);
  if (!k1 || !k2) return std::nullopt;
  return RefKey{(*k1)[0], (*k1)[1], (*k1)[2], (*k1)[3],
                (*k2)[0], (*k2)[1], (*k2)[2], (*k2)[3]};
}

RefinedBins refined_bin_atoms(const AtomicMeasure& m, const CubeGrid& g1, const CubeGrid& g2) {
  RefinedBins out;
  for (const auto& a : m.atoms()) {
    if (auto key = refined_key(a.p, g1, g2))
      out.bins[*key] += a.weight;
    else
      out.overflow += a.weight;
  }
  return out;
}

RefinedBins refined_bin_density(const Grid4& density, const WedgeRegion& region,
                                const CubeGrid& g1, const CubeGrid& g2) {
  const auto [covz, covw] = region_axis_coverage(density, region);
  // Per-plane cell lookups are shared by all nodes of that plane pair.
  const std::size_t nx = density.nx, ny = density.ny, ns = density.ns, nt = density.nt;
  struct PlaneCell {
    bool ok;
    std::array<long, 4> c;  // (j,k) in grid1 and grid2
  };
  std::vector<PlaneCell> zplane(nx * ny), wplane(ns * nt);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const cplx z{density.x(static_cast<int>(i)), density.y(static_cast<int>(j))};
      const auto [a1, b1] = g1.s1.cell_of(z);
      const auto [a2, b2] = g2.s1.cell_of(z);
      zplane[i * ny + j] = {g1.s1.has_cell(a1, b1) && g2.s1.has_cell(a2, b2),
                           {a1, b1, a2, b2}};
    }
  for (std::size_t k = 0; k < ns; ++k)
    for (std::size_t l = 0; l < nt; ++l) {
      const cplx w{density.s(static_cast<int>(k)), density.t(static_cast<int>(l))};
      const auto [a1, b1] = g1.s2.cell_of(w);
      const auto [a2, b2] = g2.s2.cell_of(w);
      wplane[k * nt + l] = {g1.s2.has_cell(a1, b1) && g2.s2.has_cell(a2, b2),
                           {a1, b1, a2, b2}};
    }
  RefinedBins out;
  std::map<std::array<long, 4>, std::map<std::array<long, 4>, double>> acc;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double cz = covz[i * ny + j];
      if (cz == 0.0) continue;
      const PlaneCell& zc = zplane[i * ny + j];
      for (std::size_t k = 0; k < ns; ++k) {
        const double* row =
            &density.v[density.idx(static_cast<int>(i), static_cast<int>(j),
                                   static_cast<int>(k), 0)];
        for (std::size_t l = 0; l < nt; ++l) {
          const double m = row[l] * cz * covw[k * nt + l];
          if (m == 0.0) continue;
          const PlaneCell& wc = wplane[k * nt + l];
          if (zc.ok && wc.ok)
            acc[zc.c][wc.c] += m;
          else
            out.overflow += m;
        }
      }
    }
  for (const auto& [zc, ws] : acc)
    for (const auto& [wc, m] : ws)
      out.bins[RefKey{zc[0], zc[1], wc[0], wc[1], zc[2], zc[3], wc[2], wc[3]}] += m;
  return out;
}

}  // namespace

PipelineReport intersection_pipeline(const PipelineCurrent& c1, const PipelineCurrent& c2,
                                     const PipelineOptions& opt) {
  LAM_REQUIRE(!opt.r_sequence.empty(), "pipeline: empty r sequence");
  for (std::size_t i = 1; i < opt.r_sequence.size(); ++i)
    LAM_REQUIRE(opt.r_sequence[i] < opt.r_sequence[i - 1], "pipeline: r sequence must decrease");
  LAM_REQUIRE(!opt.sigmas.empty(), "pipeline: empty sigma sequence");

  PipelineReport rep;

  // Reference measure: mollified mixed density at the final sigma; the
  // previous sigma provides a Cauchy indicator on a coarse diagnostic grid.
  const double sig_last = opt.sigmas.back();
  const Grid4 u1m = mollify(c1.potential, sig_last);
  const Grid4 u2m = mollify(c2.potential, sig_last);
  const Grid4 nu_density = mixed_ma_density(u1m, u2m);
  const WedgeRegion region = WedgeRegion::polydisk(opt.window);
  if (opt.sigmas.size() >= 2) {
    const double sig_prev = opt.sigmas[opt.sigmas.size() - 2];
    const Grid4 prev = mixed_ma_density(mollify(c1.potential, sig_prev),
                                        mollify(c2.potential, sig_prev));
    const double rd = opt.r_sequence.back();
    const BaseRegion zr = BaseRegion::disk(opt.window.center.z, opt.window.rz);
    const BaseRegion wr = BaseRegion::disk(opt.window.center.w, opt.window.rw);
    const CubeGrid diag{make_subdivision(zr, rd), make_subdivision(wr, rd)};
    const BinnedMass a = bin_density(nu_density, region, diag);
    const BinnedMass b = bin_density(prev, region, diag);
    double worst = std::abs(a.overflow - b.overflow);
    auto it = a.bins.begin();
    auto jt = b.bins.begin();
    while (it != a.bins.end() || jt != b.bins.end()) {
      if (jt == b.bins.end() || (it != a.bins.end() && it->first < jt->first))
        worst = std::max(worst, std::abs((it++)->second));
      else if (it == a.bins.end() || jt->first < it->first)
        worst = std::max(worst, std::abs((jt++)->second));
      else {
        worst = std::max(worst, std::abs(it->second - jt->second));
        ++it, ++jt;
      }
    }
    rep.cauchy_indicator = worst;
  }

  const BaseRegion zregion = BaseRegion::disk(opt.window.center.z, opt.window.rz);
  const BaseRegion wregion = BaseRegion::disk(opt.window.center.w, opt.window.rw);

  for (const double r : opt.r_sequence) {
    PipelineRow row;
    row.r = r;
    row.omega_u1 = modulus_of_continuity(c1.potential, r);
    row.omega_u2 = modulus_of_continuity(c2.potential, r);
    const double osum = row.omega_u1 + row.omega_u2;
    row.lambda = opt.use_remark_rule
                     ? std::clamp(1.0 - std::cbrt(osum), opt.lambda_floor, opt.lambda_cap)
                     : opt.fixed_lambda;

    const TranslateReport tr = translate_search_density(nu_density, region, r, row.lambda);
    row.Z = tr.Z;

    const Subdivision s1 = make_subdivision(zregion, r, {}, tr.Z.z);
    const Subdivision s2 = make_subdivision(wregion, r, {}, tr.Z.w);
    const CubeGrid grid{s1, s2};

    auto family = [&](const PipelineCurrent& c) {
      if (!c.has_curve) return c.fixed_family;
      return build_uniform_pieces(c.curve, c.chart1, c.chart2, s1, s2, opt.classify).pieces;
    };
    const std::vector<UniformLaminarPiece> f1 = family(c1);
    const std::vector<UniformLaminarPiece> f2 = family(c2);

    const GeometricWedge gw = geometric_wedge(f1, f2);
    const Polydisk win = opt.window;
    const AtomicMeasure nuQ =
        gw.measure.restrict([&win](const C2& p) { return win.contains(p); });

    const RefinedBins nu_b = refined_bin_density(nu_density, region, grid, grid);
    const RefinedBins nuQ_b = refined_bin_atoms(nuQ, grid, grid);

    row.nu_mass = nu_b.overflow;
    for (const auto& [k, v] : nu_b.bins) row.nu_mass += v;
    row.nuQ_mass = nuQ.mass();

    double mdiff = std::abs(nu_b.overflow - nuQ_b.overflow);
    double worst = 0.0;
    auto it = nu_b.bins.begin();
    auto jt = nuQ_b.bins.begin();
    while (it != nu_b.bins.end() || jt != nuQ_b.bins.end()) {
      double nv = 0.0, qv = 0.0;
      if (jt == nuQ_b.bins.end() || (it != nu_b.bins.end() && it->first < jt->first))
        nv = (it++)->second;
      else if (it == nu_b.bins.end() || jt->first < it->first)
        qv = (jt++)->second;
      else {
        nv = it->second;
        qv = jt->second;
        ++it, ++jt;
      }
      mdiff += std::abs(nv - qv);
      worst = std::max(worst, qv - nv);
    }
    row.defect_mass = mdiff;
    row.domination_worst = worst;
    row.rate_ratio = osum > 0 ? mdiff / std::cbrt(osum) : 0.0;

    const double tol = opt.domination_tol_factor * c1.potential.h * c1.potential.h *
                       std::max(row.nu_mass, 1e-12);
    if (worst > tol) {
      rep.domination_ok = false;
      LAM_REQUIRE(!opt.abort_on_domination, "pipeline: domination nu_Q <= nu violated");
    }
    rep.rows.push_back(row);
  }

  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (rep.rows[i].nuQ_mass < rep.rows[i - 1].nuQ_mass - 1e-9) rep.nuQ_monotone = false;
  if (rep.rows.size() >= 2) {
    const PipelineRow& first = rep.rows.front();
    const PipelineRow& last = rep.rows.back();
    rep.geometric_verdict = last.defect_mass <= 0.5 * first.defect_mass &&
                            last.nuQ_mass >= 0.5 * last.nu_mass;
  }
  return rep;
}

}  // namespace lam
