#include "laminaire/io.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace lam {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_atoms_csv(std::ostream& os, const AtomicMeasure& m) {
  os << "re_z,im_z,re_w,im_w,weight\n";
  for (const auto& a : m.atoms())
    os << format_double(a.p.z.real()) << ',' << format_double(a.p.z.imag()) << ','
       << format_double(a.p.w.real()) << ',' << format_double(a.p.w.imag()) << ','
       << format_double(a.weight) << '\n';
}

AtomicMeasure read_atoms_csv(std::istream& is) {
  std::string line;
  LAM_REQUIRE(std::getline(is, line) && line.rfind("re_z,", 0) == 0,
              "atom csv: missing header");
  AtomicMeasure m;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double f[5];
    LAM_REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &f[0], &f[1], &f[2], &f[3],
                            &f[4]) == 5,
                "atom csv: malformed row");
    m.add(C2{cplx{f[0], f[1]}, cplx{f[2], f[3]}}, f[4]);
  }
  return m;
}

namespace {

void put_le_doubles(std::ostream& os, const double* v, std::size_t n) {
  // Serialized byte order is little-endian regardless of host.
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i], 8);
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xff);
    os.write(b, 8);
  }
}

void get_le_doubles(std::istream& is, double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    LAM_REQUIRE(is.good(), "grid file: truncated value block");
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(&v[i], &u, 8);
  }
}

}  // namespace

void write_grid(std::ostream& os, const Grid4& g) {
  ojson h;
  h["domain"] = {{"center", {g.dom.center.z.real(), g.dom.center.z.imag(),
                             g.dom.center.w.real(), g.dom.center.w.imag()}},
                 {"rz", g.dom.rz},
                 {"rw", g.dom.rw}};
  h["spacing"] = g.h;
  h["extents"] = {g.nx, g.ny, g.ns, g.nt};
  h["label"] = g.label;
  os << h.dump() << '\n';
  put_le_doubles(os, g.v.data(), g.v.size());
}

Grid4 read_grid(std::istream& is) {
  std::string header;
  LAM_REQUIRE(std::getline(is, header), "grid file: missing header line");
  const ojson h = ojson::parse(header);
  Grid4 g;
  const auto& c = h.at("domain").at("center");
  g.dom = Polydisk{C2{cplx{c.at(0), c.at(1)}, cplx{c.at(2), c.at(3)}},
                   h.at("domain").at("rz"), h.at("domain").at("rw")};
  g.h = h.at("spacing");
  g.nx = h.at("extents").at(0);
  g.ny = h.at("extents").at(1);
  g.ns = h.at("extents").at(2);
  g.nt = h.at("extents").at(3);
  g.label = h.at("label");
  g.v.resize(g.size());
  get_le_doubles(is, g.v.data(), g.v.size());
  return g;
}

void write_bins_csv(std::ostream& os, const BinnedMass& b) {
  os << "j1,k1,j2,k2,mass\n";
  for (const auto& [k, v] : b.bins)
    os << k[0] << ',' << k[1] << ',' << k[2] << ',' << k[3] << ',' << format_double(v) << '\n';
  os << ",,,," << format_double(b.overflow) << '\n';
}

namespace {

ojson proj_json(const Projection& p) {
  return {p.a.real(), p.a.imag(), p.b.real(), p.b.imag()};
}
Projection proj_from(const ojson& j) {
  return Projection{cplx{j.at(0), j.at(1)}, cplx{j.at(2), j.at(3)}};
}

ojson mask_json(const BaseMask& m) {
  ojson j;
  switch (m.kind) {
    case BaseMask::None: j["kind"] = "none"; break;
    case BaseMask::OpenDisk:
      j["kind"] = "disk";
      j["center"] = {m.center.real(), m.center.imag()};
      j["r"] = m.r_out;
      break;
    case BaseMask::OpenAnnulus:
      j["kind"] = "annulus";
      j["center"] = {m.center.real(), m.center.imag()};
      j["r_in"] = m.r_in;
      j["r_out"] = m.r_out;
      break;
    case BaseMask::OpenBandRe:
      j["kind"] = "band_re";
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
    case BaseMask::OpenBandIm:
      j["kind"] = "band_im";
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
  }
  return j;
}

BaseMask mask_from(const ojson& j) {
  BaseMask m;
  const std::string kind = j.at("kind");
  if (kind == "none") {
    m.kind = BaseMask::None;
  } else if (kind == "disk") {
    m.kind = BaseMask::OpenDisk;
    m.center = cplx{j.at("center").at(0), j.at("center").at(1)};
    m.r_out = j.at("r");
  } else if (kind == "annulus") {
    m.kind = BaseMask::OpenAnnulus;
    m.center = cplx{j.at("center").at(0), j.at("center").at(1)};
    m.r_in = j.at("r_in");
    m.r_out = j.at("r_out");
  } else if (kind == "band_re" || kind == "band_im") {
    m.kind = kind == "band_re" ? BaseMask::OpenBandRe : BaseMask::OpenBandIm;
    m.lo = j.at("lo");
    m.hi = j.at("hi");
  } else {
    LAM_REQUIRE(false, "disk family: unknown mask kind");
  }
  return m;
}

// Least-squares polynomial fit of an evaluator graph in a centered, scaled
// variable, expanded back to raw-coordinate coefficients. Degree escalates
// until the sampled residual is negligible.
std::pair<std::vector<cplx>, double> fit_poly(const GraphDisk& d) {
  const int ns = 20;
  std::vector<cplx> zs, vs;
  double scale = 0.0;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) {
      const cplx u{(i + 0.5) / ns * d.base.r, (j + 0.5) / ns * d.base.r};
      const cplx zeta = d.base.iso.apply(d.base.corner + u);
      if (!d.mask.contains(zeta)) continue;
      zs.push_back(zeta);
      vs.push_back(d.phi.eval(zeta).first);
      scale = std::max(scale, std::abs(vs.back()));
    }
  LAM_REQUIRE(zs.size() >= 4, "disk family: mask leaves too few fit samples");
  const cplx c0 = d.base.iso.apply(d.base.corner + cplx{d.base.r / 2, d.base.r / 2});
  const double s = d.base.r;
  const double tol = 1e-8 * (1.0 + scale);
  std::vector<cplx> best;
  double best_res = 1e300;
  for (int deg : {1, 2, 4, 8, 12, 16}) {
    if (static_cast<std::size_t>(deg) + 1 > zs.size()) break;
    Eigen::MatrixXcd A(zs.size(), deg + 1);
    Eigen::VectorXcd b(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const cplx u = (zs[i] - c0) / s;
      cplx pw = 1.0;
      for (int k = 0; k <= deg; ++k) {
        A(static_cast<Eigen::Index>(i), k) = pw;
        pw *= u;
      }
      b(static_cast<Eigen::Index>(i)) = vs[i];
    }
    Eigen::VectorXcd a = A.colPivHouseholderQr().solve(b);
    const double res = (A * a - b).cwiseAbs().maxCoeff();
    if (res < best_res) {
      best_res = res;
      best.assign(a.data(), a.data() + a.size());
    }
    if (best_res <= tol) break;
  }
  // Expand sum a_k ((zeta - c0)/s)^k into raw-zeta monomials.
  std::vector<cplx> coeffs(best.size(), cplx{0, 0});
  std::vector<cplx> pow_c{1.0};  // (zeta - c0)^k expanded iteratively
  for (std::size_t k = 0; k < best.size(); ++k) {
    const cplx ak = best[k] / std::pow(s, static_cast<double>(k));
    for (std::size_t m = 0; m < pow_c.size(); ++m) coeffs[m] += ak * pow_c[m];
    // multiply pow_c by (zeta - c0)
    pow_c.push_back(cplx{0, 0});
    for (std::size_t m = pow_c.size() - 1; m > 0; --m)
      pow_c[m] = pow_c[m - 1] - c0 * pow_c[m];
    pow_c[0] = -c0 * pow_c[0];
  }
  while (coeffs.size() > 1 && std::abs(coeffs.back()) == 0.0) coeffs.pop_back();
  return {coeffs, best_res};
}

}  // namespace

void write_disk_family(std::ostream& os, const std::vector<UniformLaminarPiece>& family) {
  ojson out = ojson::array();
  for (std::size_t pi = 0; pi < family.size(); ++pi)
    for (const auto& wd : family[pi].disks) {
      const GraphDisk& d = wd.disk;
      ojson j;
      j["chart"] = {{"base", proj_json(d.chart.base)}, {"trans", proj_json(d.chart.trans)}};
      j["base"] = {{"proj_id", d.base.proj_id},
                   {"corner", {d.base.corner.real(), d.base.corner.imag()}},
                   {"r", d.base.r},
                   {"rot", {d.base.iso.rot.real(), d.base.iso.rot.imag()}},
                   {"shift", {d.base.iso.shift.real(), d.base.iso.shift.imag()}}};
      j["mask"] = mask_json(d.mask);
      std::vector<cplx> coeffs;
      double residual = 0.0;
      if (d.phi.evaluator) {
        std::tie(coeffs, residual) = fit_poly(d);
      } else {
        coeffs = d.phi.poly;
      }
      ojson cj = ojson::array();
      for (const cplx& c : coeffs) cj.push_back({c.real(), c.imag()});
      j["coeffs"] = cj;
      j["fit_residual"] = residual;
      j["weight"] = wd.weight;
      j["piece"] = pi;
      out.push_back(std::move(j));
    }
  os << out.dump(1) << '\n';
}

std::vector<UniformLaminarPiece> read_disk_family(std::istream& is) {
  const ojson in = ojson::parse(is);
  std::map<std::size_t, UniformLaminarPiece> pieces;
  for (const auto& j : in) {
    GraphDisk d;
    d.chart = Chart{proj_from(j.at("chart").at("base")), proj_from(j.at("chart").at("trans"))};
    d.base.proj_id = j.at("base").at("proj_id");
    d.base.corner = cplx{j.at("base").at("corner").at(0), j.at("base").at("corner").at(1)};
    d.base.r = j.at("base").at("r");
    d.base.iso.rot = cplx{j.at("base").at("rot").at(0), j.at("base").at("rot").at(1)};
    d.base.iso.shift = cplx{j.at("base").at("shift").at(0), j.at("base").at("shift").at(1)};
    d.mask = mask_from(j.at("mask"));
    for (const auto& c : j.at("coeffs")) d.phi.poly.push_back(cplx{c.at(0), c.at(1)});
    pieces[j.value("piece", std::size_t{0})].disks.push_back(
        {std::move(d), j.at("weight").get<double>()});
  }
  std::vector<UniformLaminarPiece> out;
  for (auto& [pi, piece] : pieces) out.push_back(std::move(piece));
  return out;
}

void write_components_jsonl(std::ostream& os, const Classification& cls) {
  for (const auto& comp : cls.components) {
    Box bb{1e300, -1e300, 1e300, -1e300};
    for (const Box& b : comp.boxes) {
      bb.x0 = std::min(bb.x0, b.x0);
      bb.x1 = std::max(bb.x1, b.x1);
      bb.y0 = std::min(bb.y0, b.y0);
      bb.y1 = std::max(bb.y1, b.y1);
    }
    ojson j;
    j["square"] = {comp.jz, comp.kz};
    j["kind"] = comp.good ? "good" : "bad";
    j["degree"] = comp.degree;
    j["area_proj"] = comp.area_proj;
    j["area_full"] = comp.area_full;
    j["area_param"] = comp.area_param;
    j["boxes"] = comp.boxes.size();
    j["param_bbox"] = {bb.x0, bb.x1, bb.y0, bb.y1};
    os << j.dump() << '\n';
  }
}

}  // namespace lam
