#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "laminaire/io.hpp"
#include "laminaire/models.hpp"

using namespace lam;

TEST_CASE("format_double round-trips through parsing") {
  for (double v : {0.1, M_PI, 1.0 / 3.0, -2.5e-17, 1e300, 0.0, 11.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("atoms csv round-trips bit for bit") {
  AtomicMeasure m;
  m.add(C2{cplx{1.0 / 3.0, -0.1}, cplx{M_PI, 2e-17}}, 1.0 / 3.0);
  m.add(C2{cplx{0, 0}, cplx{-1e120, 5.5}}, 0.25);
  std::ostringstream os;
  write_atoms_csv(os, m);
  std::istringstream is(os.str());
  const AtomicMeasure back = read_atoms_csv(is);
  REQUIRE(back.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back.atoms()[i].p.z == m.atoms()[i].p.z);
    CHECK(back.atoms()[i].p.w == m.atoms()[i].p.w);
    CHECK(back.atoms()[i].weight == m.atoms()[i].weight);
  }
  // identical serialization again: determinism down to the bytes
  std::ostringstream os2;
  write_atoms_csv(os2, back);
  CHECK(os.str() == os2.str());
}

TEST_CASE("grid binary block round-trips exactly") {
  const Polydisk dom{C2{cplx{0.01, 0}, cplx{0, -0.01}}, 0.6, 0.6};
  const Grid4 g = sample_potential([](const C2& p) { return norm2(p) + 0.125; }, dom, 0.2,
                                   "round_trip");
  std::ostringstream os(std::ios::binary);
  write_grid(os, g);
  std::istringstream is(os.str(), std::ios::binary);
  const Grid4 back = read_grid(is);
  CHECK(back.nx == g.nx);
  CHECK(back.label == g.label);
  CHECK(back.h == g.h);
  REQUIRE(back.v.size() == g.v.size());
  for (std::size_t i = 0; i < g.v.size(); ++i) CHECK(back.v[i] == g.v[i]);
}

TEST_CASE("disk families survive serialization with their wedge intact") {
  const PencilFixture fx = transverse_pencils();
  std::ostringstream os;
  write_disk_family(os, fx.horizontal);
  std::istringstream is(os.str());
  const std::vector<UniformLaminarPiece> back = read_disk_family(is);
  REQUIRE(back.size() == fx.horizontal.size());
  const GeometricWedge w = geometric_wedge(back, fx.vertical);
  REQUIRE(w.certified);
  REQUIRE(w.measure.size() == 9);
  const GeometricWedge w0 = geometric_wedge(fx.horizontal, fx.vertical);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(w.measure.atoms()[i].p.z == w0.measure.atoms()[i].p.z);
    CHECK(w.measure.atoms()[i].p.w == w0.measure.atoms()[i].p.w);
    CHECK(w.measure.atoms()[i].weight == w0.measure.atoms()[i].weight);
  }
}

TEST_CASE("masked families keep their masks through io") {
  const CantorProduct cp = cantor_product_currents();
  std::ostringstream oh, ov;
  write_disk_family(oh, cp.horizontal_alt);
  write_disk_family(ov, cp.vertical_alt);
  std::istringstream ih(oh.str()), iv(ov.str());
  const auto backh = read_disk_family(ih);
  const auto backv = read_disk_family(iv);
  const GeometricWedge alt = geometric_wedge(backh, backv);
  CHECK(alt.certified);
  CHECK(alt.measure.size() == 0);
}

TEST_CASE("bins csv carries the overflow row") {
  BinnedMass b;
  b.bins[{0, 0, 1, -1}] = 0.5;
  b.overflow = 0.125;
  std::ostringstream os;
  write_bins_csv(os, b);
  const std::string text = os.str();
  CHECK(text.find("j1,k1,j2,k2,mass\n") == 0);
  CHECK(text.find("0,0,1,-1,0.5\n") != std::string::npos);
  CHECK(text.find(",,,,0.125\n") != std::string::npos);
}

TEST_CASE("component records emit one json object per line") {
  CurveIterate line;
  line.eval = [](cplx t) {
    return std::pair<C2, C2>{C2{t, cplx{0.25, 0}}, C2{cplx{1, 0}, cplx{0, 0}}};
  };
  line.degree = 1.0;
  line.param_box = Box::square(cplx{0, 0}, 1.4);
  const Subdivision cells = make_subdivision(BaseRegion::disk(cplx{0, 0}, 1.0), 0.5);
  const Classification cls = classify_components(line, chart_zw(), cells);
  std::ostringstream os;
  write_components_jsonl(os, cls);
  std::istringstream is(os.str());
  std::string row;
  std::size_t rows = 0;
  while (std::getline(is, row)) {
    if (row.empty()) continue;
    const auto j = nlohmann::json::parse(row);
    REQUIRE(j.contains("kind"));
    CHECK((j["kind"] == "good" || j["kind"] == "bad"));
    CHECK(j.contains("degree"));
    ++rows;
  }
  CHECK(rows == cls.components.size());
}
