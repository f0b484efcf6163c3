#pragma once

#include <complex>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lam {

using cplx = std::complex<double>;

struct C2 {
  cplx z;
  cplx w;
};

inline double norm2(const C2& p) { return std::norm(p.z) + std::norm(p.w); }

// Linear form a*z + b*w on C^2. Coordinate projections are (1,0) and (0,1);
// sheared charts use (1,lambda).
struct Projection {
  cplx a{1.0, 0.0};
  cplx b{0.0, 0.0};

  cplx operator()(const C2& p) const { return a * p.z + b * p.w; }
};

inline cplx det(const Projection& p, const Projection& q) {
  return p.a * q.b - p.b * q.a;
}

// Coordinate chart (base, trans): base is the graphing direction, trans the
// transverse one. The pair must be independent; embed() inverts the 2x2 system.
struct Chart {
  Projection base;
  Projection trans;

  bool valid() const { return std::abs(det(base, trans)) > 1e-14; }

  C2 embed(cplx base_val, cplx trans_val) const {
    const cplx d = det(base, trans);
    // solve [base.a base.b; trans.a trans.b] (z,w) = (base_val, trans_val)
    return C2{(base_val * trans.b - base.b * trans_val) / d,
              (base.a * trans_val - base_val * trans.a) / d};
  }

  // Scale used for relative tolerances on transverse distances.
  double scale() const {
    return std::sqrt(std::norm(base.a) + std::norm(base.b) + std::norm(trans.a) +
                     std::norm(trans.b));
  }
};

inline bool chart_equal(const Chart& c1, const Chart& c2, double tol = 1e-14) {
  return std::abs(c1.base.a - c2.base.a) <= tol && std::abs(c1.base.b - c2.base.b) <= tol &&
         std::abs(c1.trans.a - c2.trans.a) <= tol && std::abs(c1.trans.b - c2.trans.b) <= tol;
}

inline Chart chart_zw() { return Chart{Projection{1.0, 0.0}, Projection{0.0, 1.0}}; }
inline Chart chart_wz() { return Chart{Projection{0.0, 1.0}, Projection{1.0, 0.0}}; }

// Seeded RNG with an explicit 53-bit uniform so streams do not depend on the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  cplx uniform_disk(cplx center, double radius) {
    for (;;) {
      const double x = uniform(-1.0, 1.0), y = uniform(-1.0, 1.0);
      if (x * x + y * y <= 1.0) return center + radius * cplx{x, y};
    }
  }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

#define LAM_REQUIRE(cond, msg) \
  do {                         \
    if (!(cond)) throw ::lam::error(msg); \
  } while (0)

// Work partitioning for reductions. Block boundaries are fixed (independent of
// the worker count) and block results are merged in index order, so any thread
// count produces identical bytes.
inline int g_thread_cap = 0;  // 0 = hardware default

void parallel_blocks(std::size_t n, std::size_t n_blocks,
                     const std::function<void(std::size_t block, std::size_t lo, std::size_t hi)>& fn);

inline void parallel_nodes(std::size_t n, const std::function<void(std::size_t lo, std::size_t hi)>& fn) {
  parallel_blocks(n, 256, [&](std::size_t, std::size_t lo, std::size_t hi) { fn(lo, hi); });
}

}  // namespace lam
