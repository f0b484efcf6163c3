#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "laminaire/potential.hpp"

namespace lam {

namespace {

std::mutex g_fftw_mu;  // fftw planning is not thread-safe

int next_smooth(int n) {
  // next size with only factors 2,3,5,7 (keeps the transforms fast)
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5, 7})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

struct PaddedBuf {
  std::vector<double> real;
  std::vector<double> spec_raw;  // interleaved re/im, fftw_complex layout
  int P[4] = {0, 0, 0, 0};
  std::size_t n_real = 0, n_spec = 0;

  fftw_complex* spec() { return reinterpret_cast<fftw_complex*>(spec_raw.data()); }

  void alloc(const int dims[4]) {
    for (int a = 0; a < 4; ++a) P[a] = dims[a];
    n_real = static_cast<std::size_t>(P[0]) * P[1] * P[2] * P[3];
    n_spec = static_cast<std::size_t>(P[0]) * P[1] * P[2] * (P[3] / 2 + 1);
    real.assign(n_real, 0.0);
    spec_raw.assign(2 * n_spec, 0.0);
  }
  void forward() {
    std::unique_lock<std::mutex> lock(g_fftw_mu);
    fftw_plan plan = fftw_plan_dft_r2c(4, P, real.data(), spec(), FFTW_ESTIMATE);
    lock.unlock();
    fftw_execute(plan);
    lock.lock();
    fftw_destroy_plan(plan);
  }
  void backward() {
    std::unique_lock<std::mutex> lock(g_fftw_mu);
    fftw_plan plan = fftw_plan_dft_c2r(4, P, spec(), real.data(), FFTW_ESTIMATE);
    lock.unlock();
    fftw_execute(plan);
    lock.lock();
    fftw_destroy_plan(plan);
  }
};

// Real part of the kernel spectrum, cached for the (shape, sigma) pair so the
// two mollifications of a wedge share one transform. The kernel is even, so
// its spectrum is real up to round-off.
struct KernelCache {
  int P[4] = {-1, -1, -1, -1};
  int m = -1;
  double sigma = -1.0, h = -1.0;
  std::vector<double> spec_re;
};
KernelCache g_kernel;
std::mutex g_kernel_mu;

}  // namespace

namespace {

// 1-D convolution along the middle axis of an [outer][extent][inner] view.
// Border layers (fewer than m valid neighbors) are left zero; the caller
// trims them away.
void axis_pass(const std::vector<double>& in, std::vector<double>& out, std::size_t outer,
               std::size_t extent, std::size_t inner, const std::vector<double>& w, int m) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * extent * inner;
    for (std::size_t e = m; e + m < extent; ++e) {
      double* dst = out.data() + base + e * inner;
      for (int t = -m; t <= m; ++t) {
        const double wt = w[static_cast<std::size_t>(t + m)];
        if (wt == 0.0) continue;
        const double* src = in.data() + base + (e + t) * inner;
        for (std::size_t c = 0; c < inner; ++c) dst[c] += wt * src[c];
      }
    }
  }
}

}  // namespace

Grid4 mollify_separable(Grid4 u, double sigma) {
  LAM_REQUIRE(sigma >= u.h - 1e-12, "mollification scale must be at least the grid spacing");
  const double support = 3.0 * sigma;
  const int m = static_cast<int>(std::ceil(support / u.h - 1e-12));
  const int n[4] = {u.nx, u.ny, u.ns, u.nt};
  for (int a = 0; a < 4; ++a)
    LAM_REQUIRE(n[a] > 2 * m, "domain too small for the mollification support");

  std::vector<double> w(static_cast<std::size_t>(2 * m + 1), 0.0);
  double total = 0.0;
  for (int t = -m; t <= m; ++t) {
    const double rho2 = (t * u.h / support) * (t * u.h / support);
    if (rho2 >= 1.0) continue;
    total += w[static_cast<std::size_t>(t + m)] = (1.0 - rho2) * (1.0 - rho2) * (1.0 - rho2);
  }
  for (double& x : w) x /= total;

  const std::size_t NX = static_cast<std::size_t>(n[0]), NY = static_cast<std::size_t>(n[1]),
                    NS = static_cast<std::size_t>(n[2]), NT = static_cast<std::size_t>(n[3]);
  std::vector<double> buf(u.v.size());
  axis_pass(u.v, buf, 1, NX, NY * NS * NT, w, m);
  axis_pass(buf, u.v, NX, NY, NS * NT, w, m);
  axis_pass(u.v, buf, NX * NY, NS, NT, w, m);
  u.v.clear();
  u.v.shrink_to_fit();

  Polydisk sub = u.dom;
  sub.rz -= m * u.h;
  sub.rw -= m * u.h;
  Grid4 out = Grid4::shape(sub, u.h, u.label);
  LAM_REQUIRE(out.nx == n[0] - 2 * m && out.ns == n[2] - 2 * m, "mollified sub-grid misaligned");
  for (int i = 0; i < out.nx; ++i)
    for (int j = 0; j < out.ny; ++j)
      for (int k = 0; k < out.ns; ++k) {
        double* dst = out.v.data() + out.idx(i, j, k, 0);
        const double* src =
            buf.data() + (((static_cast<std::size_t>(i) + m) * NY + (j + m)) * NS + (k + m)) * NT;
        for (int l = 0; l < out.nt; ++l) {
          double acc = 0.0;
          for (int t = -m; t <= m; ++t)
            acc += w[static_cast<std::size_t>(t + m)] * src[l + m + t];
          dst[l] = acc;
        }
      }
  return out;
}

Grid4 mollify(const Grid4& u, double sigma) {
  LAM_REQUIRE(sigma >= u.h - 1e-12, "mollification scale must be at least the grid spacing");
  const double support = 3.0 * sigma;
  const int m = static_cast<int>(std::ceil(support / u.h - 1e-12));
  const int n[4] = {u.nx, u.ny, u.ns, u.nt};
  for (int a = 0; a < 4; ++a)
    LAM_REQUIRE(n[a] > 2 * m, "domain too small for the mollification support");

  int P[4];
  for (int a = 0; a < 4; ++a) P[a] = next_smooth(n[a] + 2 * m);

  // kernel spectrum
  std::vector<double> kspec;
  {
    std::lock_guard<std::mutex> g(g_kernel_mu);
    if (g_kernel.m == m && g_kernel.sigma == sigma && g_kernel.h == u.h && g_kernel.P[0] == P[0] &&
        g_kernel.P[1] == P[1] && g_kernel.P[2] == P[2] && g_kernel.P[3] == P[3]) {
      kspec = g_kernel.spec_re;
    }
  }
  if (kspec.empty()) {
    PaddedBuf kb;
    kb.alloc(P);
    double total = 0.0;
    const double inv_sup2 = 1.0 / (support * support);
    for (int dx = -m; dx <= m; ++dx)
      for (int dy = -m; dy <= m; ++dy)
        for (int ds = -m; ds <= m; ++ds)
          for (int dt = -m; dt <= m; ++dt) {
            const double rho2 =
                (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy +
                 static_cast<double>(ds) * ds + static_cast<double>(dt) * dt) *
                u.h * u.h * inv_sup2;
            if (rho2 >= 1.0) continue;
            const double w = (1.0 - rho2) * (1.0 - rho2) * (1.0 - rho2);
            const std::size_t ix = static_cast<std::size_t>((dx + P[0]) % P[0]);
            const std::size_t iy = static_cast<std::size_t>((dy + P[1]) % P[1]);
            const std::size_t is = static_cast<std::size_t>((ds + P[2]) % P[2]);
            const std::size_t it = static_cast<std::size_t>((dt + P[3]) % P[3]);
            kb.real[((ix * P[1] + iy) * P[2] + is) * P[3] + it] = w;
            total += w;
          }
    const double inv_total = 1.0 / total;
    for (auto& x : kb.real) x *= inv_total;
    kb.forward();
    kspec.resize(kb.n_spec);
    for (std::size_t i = 0; i < kb.n_spec; ++i) kspec[i] = kb.spec_raw[2 * i];
    std::lock_guard<std::mutex> g(g_kernel_mu);
    g_kernel.m = m;
    g_kernel.sigma = sigma;
    g_kernel.h = u.h;
    for (int a = 0; a < 4; ++a) g_kernel.P[a] = P[a];
    g_kernel.spec_re = kspec;
  }

  PaddedBuf ub;
  ub.alloc(P);
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) {
        const std::size_t src = u.idx(i, j, k, 0);
        const std::size_t dst = ((static_cast<std::size_t>(i) * P[1] + j) * P[2] + k) * P[3];
        for (int l = 0; l < n[3]; ++l) ub.real[dst + l] = u.v[src + l];
      }
  ub.forward();
  const double scale = 1.0 / (static_cast<double>(P[0]) * P[1] * P[2] * P[3]);
  for (std::size_t i = 0; i < ub.n_spec; ++i) {
    ub.spec_raw[2 * i] *= kspec[i] * scale;
    ub.spec_raw[2 * i + 1] *= kspec[i] * scale;
  }
  ub.backward();

  Polydisk sub = u.dom;
  sub.rz -= m * u.h;
  sub.rw -= m * u.h;
  Grid4 out = Grid4::shape(sub, u.h, u.label);
  LAM_REQUIRE(out.nx == n[0] - 2 * m && out.ns == n[2] - 2 * m, "mollified sub-grid misaligned");
  for (int i = 0; i < out.nx; ++i)
    for (int j = 0; j < out.ny; ++j)
      for (int k = 0; k < out.ns; ++k) {
        const std::size_t dst = out.idx(i, j, k, 0);
        const std::size_t src =
            ((static_cast<std::size_t>(i + m) * P[1] + (j + m)) * P[2] + (k + m)) * P[3] + m;
        for (int l = 0; l < out.nt; ++l) out.v[dst + l] = ub.real[src + l];
      }
  return out;
}

}  // namespace lam
