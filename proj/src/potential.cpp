#include "laminaire/potential.hpp"

#include <algorithm>
#include <sstream>

namespace lam {

Grid4 Grid4::shape(const Polydisk& dom, double h, const std::string& label) {
  LAM_REQUIRE(h > 0.0, "grid spacing must be positive");
  LAM_REQUIRE(dom.rz > 0.0 && dom.rw > 0.0, "polydisk radii must be positive");
  Grid4 g;
  g.dom = dom;
  g.h = h;
  g.label = label;
  g.nx = g.ny = std::max<int>(1, std::lround(2.0 * dom.rz / h));
  g.ns = g.nt = std::max<int>(1, std::lround(2.0 * dom.rw / h));
  g.v.assign(g.size(), 0.0);
  return g;
}

Grid4 sample_potential(const PotentialFn& u, const Polydisk& dom, double h,
                       const std::string& label) {
  Grid4 g = Grid4::shape(dom, h, label);
  parallel_blocks(static_cast<std::size_t>(g.nx), 64, [&](std::size_t, std::size_t ilo, std::size_t ihi) {
    for (std::size_t i = ilo; i < ihi; ++i) {
      for (int j = 0; j < g.ny; ++j) {
        for (int k = 0; k < g.ns; ++k) {
          for (int l = 0; l < g.nt; ++l) {
            const double val = u(g.node(static_cast<int>(i), j, k, l));
            if (!std::isfinite(val)) {
              std::ostringstream os;
              os << "non-finite potential sample at node (" << i << "," << j << "," << k << ","
                 << l << ") = (" << g.x(static_cast<int>(i)) << "," << g.y(j) << "," << g.s(k)
                 << "," << g.t(l) << ")";
              throw error(os.str());
            }
            g.v[g.idx(static_cast<int>(i), j, k, l)] = val;
          }
        }
      }
    }
  });
  return g;
}

ComplexHessian complex_hessian(const Grid4& u, int i, int j, int k, int l) {
  LAM_REQUIRE(i >= 2 && i <= u.nx - 3 && j >= 2 && j <= u.ny - 3 && k >= 2 && k <= u.ns - 3 &&
                  l >= 2 && l <= u.nt - 3,
              "hessian node must be at least 2h inside the domain");
  const double h2 = u.h * u.h;
  const auto at = [&](int di, int dj, int dk, int dl) {
    return u.v[u.idx(i + di, j + dj, k + dk, l + dl)];
  };
  const double c = at(0, 0, 0, 0);
  const double uxx = (at(1, 0, 0, 0) - 2 * c + at(-1, 0, 0, 0)) / h2;
  const double uyy = (at(0, 1, 0, 0) - 2 * c + at(0, -1, 0, 0)) / h2;
  const double uss = (at(0, 0, 1, 0) - 2 * c + at(0, 0, -1, 0)) / h2;
  const double utt = (at(0, 0, 0, 1) - 2 * c + at(0, 0, 0, -1)) / h2;
  const auto cross = [&](int a, int b) {
    // d^2u/(dA dB) for distinct axes A,B via the four diagonal neighbors
    int d1[4] = {0, 0, 0, 0}, d2[4] = {0, 0, 0, 0};
    d1[a] = 1;
    d2[b] = 1;
    return (u.v[u.idx(i + d1[0] + d2[0], j + d1[1] + d2[1], k + d1[2] + d2[2], l + d1[3] + d2[3])] +
            u.v[u.idx(i - d1[0] - d2[0], j - d1[1] - d2[1], k - d1[2] - d2[2], l - d1[3] - d2[3])] -
            u.v[u.idx(i + d1[0] - d2[0], j + d1[1] - d2[1], k + d1[2] - d2[2], l + d1[3] - d2[3])] -
            u.v[u.idx(i - d1[0] + d2[0], j - d1[1] + d2[1], k - d1[2] + d2[2], l - d1[3] + d2[3])]) /
           (4 * h2);
  };
  const double uxs = cross(0, 2), uyt = cross(1, 3), uxt = cross(0, 3), uys = cross(1, 2);
  ComplexHessian out;
  out.zz = 0.25 * (uxx + uyy);
  out.ww = 0.25 * (uss + utt);
  out.zw = 0.25 * cplx{uxs + uyt, uxt - uys};
  return out;
}

namespace {

void require_same_shape(const Grid4& u, const Grid4& v) {
  LAM_REQUIRE(std::abs(u.h - v.h) <= 1e-12, "grid spacings differ");
  LAM_REQUIRE(u.nx == v.nx && u.ny == v.ny && u.ns == v.ns && u.nt == v.nt,
              "grid extents differ");
  LAM_REQUIRE(std::abs(u.dom.center.z - v.dom.center.z) <= 1e-12 &&
                  std::abs(u.dom.center.w - v.dom.center.w) <= 1e-12 &&
                  std::abs(u.dom.rz - v.dom.rz) <= 1e-12 && std::abs(u.dom.rw - v.dom.rw) <= 1e-12,
              "grid domains differ");
}

}  // namespace

Grid4 mixed_ma_density(const Grid4& u, const Grid4& v) {
  require_same_shape(u, v);
  LAM_REQUIRE(u.nx > 4 && u.ny > 4 && u.ns > 4 && u.nt > 4, "grid too small for hessian stencils");

  Polydisk sub = u.dom;
  sub.rz -= 2 * u.h;
  sub.rw -= 2 * u.h;
  Grid4 d = Grid4::shape(sub, u.h, u.label.empty() ? v.label : u.label);
  LAM_REQUIRE(d.nx == u.nx - 4 && d.ns == u.ns - 4, "density sub-grid misaligned");

  const bool self = &u == &v;
  const double scale = 4.0 / (M_PI * M_PI);
  parallel_blocks(static_cast<std::size_t>(d.nx), 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      for (int j = 0; j < d.ny; ++j) {
        for (int k = 0; k < d.ns; ++k) {
          for (int l = 0; l < d.nt; ++l) {
            const ComplexHessian hu =
                complex_hessian(u, static_cast<int>(i) + 2, j + 2, k + 2, l + 2);
            const ComplexHessian hv =
                self ? hu : complex_hessian(v, static_cast<int>(i) + 2, j + 2, k + 2, l + 2);
            const double cross =
                hu.zw.real() * hv.zw.real() + hu.zw.imag() * hv.zw.imag();
            d.v[d.idx(static_cast<int>(i), j, k, l)] =
                scale * (hu.zz * hv.ww + hu.ww * hv.zz - 2.0 * cross);
          }
        }
      }
    }
  });
  return d;
}

double disk_rect_area(cplx center, double R, double x0, double x1, double y0, double y1) {
  // F(x,y) = area of the disk below y and left of x, via the antiderivative of
  // the chord length; the rectangle area follows by inclusion-exclusion.
  const auto I = [R](double a, double b) {
    // integral of sqrt(R^2-u^2) over [a,b], a,b within [-R,R]
    const auto anti = [R](double u) {
      const double c = std::sqrt(std::max(R * R - u * u, 0.0));
      return 0.5 * (u * c + R * R * std::atan2(u, c));
    };
    return anti(b) - anti(a);
  };
  const auto F = [&](double x, double y) {
    x = std::clamp(x, -R, R);
    if (x <= -R) return 0.0;
    if (y <= -R) return 0.0;
    const double ustar = std::sqrt(std::max(R * R - y * y, 0.0));
    if (y >= 0.0) {
      double area = 0.0;
      // |u| >= ustar: full chord; |u| < ustar: y + sqrt
      const double a1 = -R, b1 = std::min(x, -ustar);
      if (b1 > a1) area += 2.0 * I(a1, b1);
      const double a2 = -ustar, b2 = std::min(x, ustar);
      if (b2 > a2) area += y * (b2 - a2) + I(a2, b2);
      const double a3 = ustar, b3 = x;
      if (b3 > a3) area += 2.0 * I(a3, b3);
      return area;
    }
    const double a = std::max(-ustar, -R), b = std::min(x, ustar);
    if (b <= a) return 0.0;
    return y * (b - a) + I(a, b);
  };
  const double cx = center.real(), cy = center.imag();
  return F(x1 - cx, y1 - cy) - F(x0 - cx, y1 - cy) - F(x1 - cx, y0 - cy) + F(x0 - cx, y0 - cy);
}

std::pair<std::vector<double>, std::vector<double>> region_axis_coverage(
    const Grid4& density, const WedgeRegion& region) {
  // Per-factor coverage weights; interior cells get h^2 exactly.
  const double h = density.h;
  std::vector<double> az(static_cast<std::size_t>(density.nx) * density.ny, h * h);
  std::vector<double> aw(static_cast<std::size_t>(density.ns) * density.nt, h * h);
  if (region.kind == WedgeRegion::PolydiskRegion) {
    const Polydisk& pd = region.disk;
    for (int i = 0; i < density.nx; ++i) {
      for (int j = 0; j < density.ny; ++j) {
        const double x = density.x(i), y = density.y(j);
        az[static_cast<std::size_t>(i) * density.ny + j] =
            disk_rect_area(pd.center.z, pd.rz, x - h / 2, x + h / 2, y - h / 2, y + h / 2);
      }
    }
    for (int k = 0; k < density.ns; ++k) {
      for (int l = 0; l < density.nt; ++l) {
        const double s = density.s(k), t = density.t(l);
        aw[static_cast<std::size_t>(k) * density.nt + l] =
            disk_rect_area(pd.center.w, pd.rw, s - h / 2, s + h / 2, t - h / 2, t + h / 2);
      }
    }
  }
  return {std::move(az), std::move(aw)};
}

BinnedMass bin_density(const Grid4& density, const WedgeRegion& region, const CubeGrid& bins) {
  const auto [az, aw] = region_axis_coverage(density, region);
  BinnedMass out;
  for (int i = 0; i < density.nx; ++i) {
    for (int j = 0; j < density.ny; ++j) {
      const double wz = az[static_cast<std::size_t>(i) * density.ny + j];
      if (wz == 0.0) continue;
      for (int k = 0; k < density.ns; ++k) {
        for (int l = 0; l < density.nt; ++l) {
          const double w4 = wz * aw[static_cast<std::size_t>(k) * density.nt + l];
          if (w4 == 0.0) continue;
          const double m = density.v[density.idx(i, j, k, l)] * w4;
          if (auto key = bins.bin_of(density.node(i, j, k, l))) {
            out.bins[*key] += m;
          } else {
            out.overflow += m;
          }
        }
      }
    }
  }
  return out;
}

namespace {

double max_bin_change(const BinnedMass& a, const BinnedMass& b) {
  double m = std::abs(a.overflow - b.overflow);
  auto ia = a.bins.begin();
  auto ib = b.bins.begin();
  while (ia != a.bins.end() || ib != b.bins.end()) {
    if (ib == b.bins.end() || (ia != a.bins.end() && ia->first < ib->first)) {
      m = std::max(m, std::abs(ia->second));
      ++ia;
    } else if (ia == a.bins.end() || ib->first < ia->first) {
      m = std::max(m, std::abs(ib->second));
      ++ib;
    } else {
      m = std::max(m, std::abs(ia->second - ib->second));
      ++ia;
      ++ib;
    }
  }
  return m;
}

}  // namespace

WedgeResult wedge_by_potentials(const Grid4& u, const Grid4& v, const std::vector<double>& sigmas,
                                const CubeGrid& bins, const WedgeRegion& region) {
  LAM_REQUIRE(!sigmas.empty(), "sigma sequence must be nonempty");
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i)
    LAM_REQUIRE(sigmas[i] >= sigmas[i + 1] - 1e-15, "sigma sequence must be decreasing");
  LAM_REQUIRE(sigmas.back() >= u.h - 1e-12, "smallest sigma must be at least the grid spacing");
  require_same_shape(u, v);
  const bool self = &u == &v;

  WedgeResult res;
  BinnedMass prev;
  bool have_prev = false;
  for (double sigma : sigmas) {
    const Grid4 mu = mollify(u, sigma);
    const Grid4 mv = self ? Grid4{} : mollify(v, sigma);
    const Grid4 dens = mixed_ma_density(mu, self ? mu : mv);
    if (region.kind == WedgeRegion::PolydiskRegion) {
      const Polydisk& pd = region.disk;
      LAM_REQUIRE(std::abs(pd.center.z - dens.dom.center.z) + pd.rz <= dens.dom.rz + 1e-9 &&
                      std::abs(pd.center.w - dens.dom.center.w) + pd.rw <= dens.dom.rw + 1e-9,
                  "integration region exceeds the mollified domain; sample with more margin");
    }
    BinnedMass cur = bin_density(dens, region, bins);
    res.sigma_totals.push_back(cur.total());
    if (have_prev) res.cauchy_indicator = max_bin_change(cur, prev);
    prev = std::move(cur);
    have_prev = true;
  }
  res.measure = std::move(prev);
  return res;
}

namespace {

// C-infinity ramp: 0 below 0, 1 above 1.
double ramp01(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double qa = std::exp(-1.0 / s);
  const double qb = std::exp(-1.0 / (1.0 - s));
  return qa / (qa + qb);
}

double edge_profile(double xi, double a) {
  // 1-D plateau factor on [0,1]: rises on [0,a], flat on [a,1-a], falls after
  if (xi <= 0.0 || xi >= 1.0) return 0.0;
  if (xi < a) return ramp01(xi / a);
  if (xi > 1.0 - a) return ramp01((1.0 - xi) / a);
  return 1.0;
}

struct ProfileSups {
  double d1 = 0.0;
  double d2 = 0.0;
};

// Derivative sups of ramp01 over (0,1), measured once at fine resolution.
ProfileSups ramp_sups() {
  static ProfileSups cached = [] {
    ProfileSups s;
    const int n = 20000;
    const double d = 1.0 / n;
    for (int i = 1; i < n; ++i) {
      const double x = i * d;
      const double p1 = (ramp01(x + d) - ramp01(x - d)) / (2 * d);
      const double p2 = (ramp01(x + d) - 2 * ramp01(x) + ramp01(x - d)) / (d * d);
      s.d1 = std::max(s.d1, std::abs(p1));
      s.d2 = std::max(s.d2, std::abs(p2));
    }
    return s;
  }();
  return cached;
}

}  // namespace

double PlateauFunction::operator()(const C2& p) const {
  const auto factor = [&](const AffineSquare& sq, const Projection& pi) {
    const cplx local = sq.iso.invert(pi(p)) - sq.corner;
    return edge_profile(local.real() / sq.r, edge) * edge_profile(local.imag() / sq.r, edge);
  };
  return factor(cube.s1, cube.p1) * factor(cube.s2, cube.p2);
}

PlateauFunction plateau_function(const FourCube& cube, double lambda) {
  LAM_REQUIRE(lambda > 0.0 && lambda < 1.0, "plateau shrink factor must lie in (0,1)");
  PlateauFunction chi{cube};
  chi.lambda = lambda;
  // Flat part strictly contains the lambda-core, so chi = 1 on a neighborhood.
  chi.edge = 0.95 * (1.0 - lambda) / 2.0;

  const ProfileSups ps = ramp_sups();
  const auto proj_scale = [](const Projection& p) {
    return std::sqrt(std::norm(p.a) + std::norm(p.b));
  };
  const double a1 = chi.edge * cube.s1.r, a2 = chi.edge * cube.s2.r;
  const double sc1 = proj_scale(cube.p1), sc2 = proj_scale(cube.p2);
  const double s1d1 = ps.d1 / a1 * sc1;
  const double s2d1 = ps.d1 / a2 * sc2;
  const double s1d2 = ps.d2 / (a1 * a1) * sc1 * sc1;
  const double s2d2 = ps.d2 / (a2 * a2) * sc2 * sc2;
  // zz <= (1/4)(sup A'' + sup B''), cross <= (sqrt2/2) sup_1' sup_2'
  chi.hessian_bound = std::max({0.5 * s1d2, 0.5 * s2d2, M_SQRT1_2 * s1d1 * s2d1});
  return chi;
}

ModulusProfile modulus_profile(const Grid4& u, double r_max) {
  LAM_REQUIRE(r_max >= u.h - 1e-12, "modulus radius must be at least the grid spacing");
  struct Offset {
    int d[4];
    double dist;
  };
  std::vector<Offset> offsets;
  const int kmax_axis = static_cast<int>(std::floor(r_max / u.h + 1e-9));
  for (int axis = 0; axis < 4; ++axis) {
    for (int k = 1; k <= kmax_axis; ++k) {
      Offset o{{0, 0, 0, 0}, k * u.h};
      o.d[axis] = k;
      offsets.push_back(o);
    }
  }
  const int kmax_diag = static_cast<int>(std::floor(r_max / (u.h * M_SQRT2) + 1e-9));
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        for (int k = 1; k <= kmax_diag; ++k) {
          Offset o{{0, 0, 0, 0}, k * u.h * M_SQRT2};
          o.d[a] = k;
          o.d[b] = sgn * k;
          offsets.push_back(o);
        }
      }
    }
  }

  ModulusProfile prof;
  prof.steps.reserve(offsets.size());
  const int n[4] = {u.nx, u.ny, u.ns, u.nt};
  for (const auto& o : offsets) {
    int lo[4], hi[4];
    for (int a = 0; a < 4; ++a) {
      lo[a] = std::max(0, -o.d[a]);
      hi[a] = std::min(n[a], n[a] - o.d[a]);
    }
    if (lo[0] >= hi[0] || lo[1] >= hi[1] || lo[2] >= hi[2] || lo[3] >= hi[3]) continue;
    const long stride = ((static_cast<long>(o.d[0]) * u.ny + o.d[1]) * u.ns + o.d[2]) * u.nt + o.d[3];
    std::vector<double> block_max(static_cast<std::size_t>(hi[0] - lo[0]), 0.0);
    parallel_blocks(static_cast<std::size_t>(hi[0] - lo[0]), 32, [&](std::size_t, std::size_t blo, std::size_t bhi) {
      for (std::size_t ii = blo; ii < bhi; ++ii) {
        const int i = lo[0] + static_cast<int>(ii);
        double m = 0.0;
        for (int j = lo[1]; j < hi[1]; ++j) {
          for (int k = lo[2]; k < hi[2]; ++k) {
            const std::size_t base = u.idx(i, j, k, 0);
            for (int l = lo[3]; l < hi[3]; ++l) {
              const double diff = std::abs(u.v[base + l + stride] - u.v[base + l]);
              if (diff > m) m = diff;
            }
          }
        }
        block_max[ii] = m;
      }
    });
    double m = 0.0;
    for (double b : block_max) m = std::max(m, b);
    prof.steps.emplace_back(o.dist, m);
  }
  std::sort(prof.steps.begin(), prof.steps.end());
  return prof;
}

double modulus_of_continuity(const Grid4& u, double r) {
  return modulus_profile(u, r).omega(r);
}

}  // namespace lam
