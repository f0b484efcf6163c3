#include "laminaire/roots.hpp"

#include <algorithm>

namespace lam {

namespace {

struct BoundaryUnsafe {};

struct EdgeSample {
  cplx p;
  cplx f;
  double rate = 0.0;  // |F'/F|, the local angular speed bound
};

// Accumulated argument variation from a to b. A step is accepted only when
// the principal-branch turn is small, endpoint and midpoint moduli are
// comparable, and the sampled |F'/F| caps the possible advance well below a
// half turn. The last condition kills aliasing: for clustered zeros the
// argument can sweep a full turn while the modulus barely moves, so turn and
// modulus tracking alone would stride past it and miscount the winding. A
// zero sitting on the contour itself is caught by the modulus floor (the
// image path doubles back through 0). Midpoint samples are reused across the
// recursion.
double arg_delta(const HoloFn& F, const EdgeSample& a, const EdgeSample& b,
                 const WindingOptions& opt, int depth) {
  EdgeSample m;
  m.p = (a.p + b.p) / 2.0;
  const auto [fm, dm] = F(m.p);
  if (!std::isfinite(fm.real()) || !std::isfinite(fm.imag()) || std::abs(fm) < opt.min_modulus)
    throw BoundaryUnsafe{};
  m.f = fm;
  m.rate = std::abs(dm) / std::abs(fm);
  const double d = std::arg(b.f / a.f);
  const double ma = std::abs(a.f), mb = std::abs(b.f);
  const double lo = std::min(ma, mb), hi = std::max(ma, mb);
  const double advance =
      std::max({a.rate, m.rate, b.rate}) * std::abs(b.p - a.p);
  if (std::abs(d) <= M_PI / 2 - 0.2 && hi <= 4.0 * lo && 4.0 * std::abs(fm) >= lo &&
      advance <= 1.4 && depth > 0)
    return d;
  if (depth >= opt.max_seg_depth) throw BoundaryUnsafe{};
  return arg_delta(F, a, m, opt, depth + 1) + arg_delta(F, m, b, opt, depth + 1);
}

}  // namespace

std::optional<long> winding_number(const HoloFn& F, const Box& b, const WindingOptions& opt) {
  const cplx corners[5] = {cplx{b.x0, b.y0}, cplx{b.x1, b.y0}, cplx{b.x1, b.y1}, cplx{b.x0, b.y1},
                           cplx{b.x0, b.y0}};
  const auto sample = [&](cplx p) -> std::optional<EdgeSample> {
    const auto [f, df] = F(p);
    if (!std::isfinite(f.real()) || !std::isfinite(f.imag()) || std::abs(f) < opt.min_modulus)
      return std::nullopt;
    return EdgeSample{p, f, std::abs(df) / std::abs(f)};
  };
  try {
    double total = 0.0;
    auto prev = sample(corners[0]);
    if (!prev) return std::nullopt;
    for (int e = 0; e < 4; ++e) {
      const auto next = sample(corners[e + 1]);
      if (!next) return std::nullopt;
      total += arg_delta(F, *prev, *next, opt, 0);
      prev = next;
    }
    const double w = total / (2 * M_PI);
    const double wr = std::round(w);
    if (std::abs(w - wr) > 0.25) return std::nullopt;
    return static_cast<long>(wr);
  } catch (const BoundaryUnsafe&) {
    return std::nullopt;
  }
}

std::optional<cplx> newton_polish(const HoloFn& F, cplx z0, double tol, int max_iter) {
  cplx z = z0;
  for (int i = 0; i < max_iter; ++i) {
    const auto [f, df] = F(z);
    if (!std::isfinite(f.real()) || !std::isfinite(f.imag())) return std::nullopt;
    if (std::abs(df) == 0.0) return std::nullopt;
    const cplx step = f / df;
    z -= step;
    if (std::abs(step) <= tol * (1.0 + std::abs(z))) return z;
  }
  return std::nullopt;
}

namespace {

// Cut-point offsets tried when a zero sits on a split line. Fixed sequence,
// so the subdivision tree is reproducible.
constexpr double kNudges[] = {0.0, 0.0731, -0.0611, 0.1187, -0.1409, 0.0353};

struct Search {
  const HoloFn& F;
  const RootFindOptions& opt;
  WindingOptions wopt;
  std::vector<CertifiedRoot> roots;
  bool certified = true;

  void emit(const Box& b, long mult) {
    const cplx c = b.center();
    const double tol = std::max(1e-14, opt.isolation * 1e-4);
    if (mult == 1) {
      if (auto z = newton_polish(F, c, tol)) {
        // accept the polished root only if it stayed near the box
        if (std::abs(*z - c) <= 4.0 * b.diam() + 10 * opt.isolation) {
          roots.push_back(CertifiedRoot{*z, 1, true});
          return;
        }
      }
    }
    roots.push_back(CertifiedRoot{c, mult, false});
  }

  void descend(const Box& b, long w, int depth) {
    if (w == 0) return;
    if (b.diam() <= opt.isolation || depth >= opt.max_depth) {
      if (depth >= opt.max_depth && b.diam() > opt.isolation) certified = false;
      emit(b, w);
      return;
    }
    for (double nx : kNudges) {
      for (double ny : kNudges) {
        const double cx = b.x0 + b.width() * (0.5 + nx);
        const double cy = b.y0 + b.height() * (0.5 + ny);
        const Box q[4] = {Box{b.x0, cx, b.y0, cy}, Box{cx, b.x1, b.y0, cy},
                          Box{b.x0, cx, cy, b.y1}, Box{cx, b.x1, cy, b.y1}};
        long ws[4];
        long sum = 0;
        bool ok = true;
        for (int i = 0; i < 4 && ok; ++i) {
          if (auto wi = winding_number(F, q[i], wopt)) {
            ws[i] = *wi;
            sum += *wi;
          } else {
            ok = false;
          }
        }
        if (ok && sum == w) {
          for (int i = 0; i < 4; ++i)
            if (ws[i] > 0) descend(q[i], ws[i], depth + 1);
          return;
        }
        // a failed nudge pair is retried with the next offsets
        (void)ny;
      }
    }
    // No cut certified; treat the whole box as one cluster.
    certified = false;
    emit(b, w);
  }
};

}  // namespace

RootFindResult find_roots(const HoloFn& F, const Box& b, const RootFindOptions& opt) {
  Search s{F, opt, WindingOptions{opt.min_modulus, 42}, {}, true};
  RootFindResult out;
  const auto w = winding_number(F, b, s.wopt);
  if (!w) {
    out.certified = false;
    return out;
  }
  out.winding_total = *w;
  s.descend(b, *w, 0);
  // Two reported roots inside one isolation radius contradict the stated
  // resolution; fold them into a cluster (multiplicity-weighted center).
  std::vector<CertifiedRoot> merged;
  for (const auto& r : s.roots) {
    bool folded = false;
    for (auto& m : merged)
      if (std::abs(m.z - r.z) <= opt.isolation) {
        m.z = (m.z * double(m.multiplicity) + r.z * double(r.multiplicity)) /
              double(m.multiplicity + r.multiplicity);
        m.multiplicity += r.multiplicity;
        m.polished = false;
        folded = true;
        break;
      }
    if (!folded) merged.push_back(r);
  }
  std::sort(merged.begin(), merged.end(), [](const CertifiedRoot& a, const CertifiedRoot& c) {
    if (a.z.real() != c.z.real()) return a.z.real() < c.z.real();
    return a.z.imag() < c.z.imag();
  });
  out.roots = std::move(merged);
  out.certified = s.certified;
  return out;
}

}  // namespace lam
