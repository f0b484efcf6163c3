// Acceptance gate: ten binary criteria over the shipped experiments, one
// pass/fail line each. Every tolerance is pinned here, next to its check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "laminaire/experiments.hpp"
#include "laminaire/io.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

int g_failures = 0;

void report(int idx, bool ok, const std::string& what) {
  std::cout << "criterion " << idx << " [" << (ok ? "PASS" : "FAIL") << "] " << what << "\n";
  if (!ok) ++g_failures;
}

lam::ExperimentConfig config(const std::string& experiment,
                             std::vector<std::pair<std::string, std::string>> kv = {},
                             std::uint64_t seed = 1) {
  lam::ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = seed;
  for (auto& [k, v] : kv) cfg.values[k] = v;
  return cfg;
}

const lam::Criterion& get(const lam::ExperimentResult& res, const std::string& name) {
  for (const auto& c : res.criteria)
    if (c.name == name) return c;
  throw lam::error("acceptance: experiment " + res.experiment + " reported no criterion " +
                   name);
}

struct Timed {
  lam::ExperimentResult result;
  double seconds = 0.0;
};

Timed timed_run(const lam::ExperimentConfig& cfg) {
  const auto t0 = clock_type::now();
  Timed out;
  out.result = lam::run_experiment(cfg);
  out.seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void criterion_1() {
  const auto t0 = clock_type::now();
  const lam::ExperimentResult quad =
      lam::run_experiment(config("uniform_wedge", {{"fixture.name", "quadratic"}, {"grid.h", "0.1"}}));
  const lam::ExperimentResult pert =
      lam::run_experiment(config("uniform_wedge", {{"fixture.name", "perturbed"}}));
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();

  const lam::Criterion& rel = get(quad, "mass_rel_error");
  const lam::Criterion& slope = get(pert, "error_slope");
  const bool ok = rel.value <= 0.02 && slope.value >= 1.8 && secs <= 120.0;
  report(1, ok,
         "round wedge mass off by " + fmt(rel.value * 100) + "% (cap 2%), refinement slope " +
             fmt(slope.value) + " >= 1.8, " + fmt(secs) + "s <= 120s");
}

void criterion_2() {
  const auto t0 = clock_type::now();
  std::vector<double> hs = {0.2, 0.1, 0.05};
  std::vector<double> dist;
  bool exact = true;
  for (double h : hs) {
    std::ostringstream hh;
    hh << h;
    const lam::ExperimentResult res = lam::run_experiment(
        config("uniform_wedge", {{"fixture.name", "pencil"}, {"grid.h", hh.str()}}));
    dist.push_back(get(res, "binned_distance").value);
    exact = exact && get(res, "geometric_atoms").value == 9.0 &&
            get(res, "geometric_mass_error").value <= 1e-15 &&
            get(res, "geometric_position_error").value == 0.0 &&
            get(res, "geometric_weight_error").value == 0.0;
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const double slope = std::log(std::max(dist.front(), 1e-300) /
                                std::max(dist.back(), 1e-300)) /
                       std::log(hs.front() / hs.back());
  const bool ok = slope >= 1.0 && exact && secs <= 60.0;
  report(2, ok, "two-route gap shrinks with slope " + fmt(slope) +
                    " >= 1 over h in {0.2,0.1,0.05}, nine unit-mass atoms exact: " +
                    (exact ? "yes" : "no") + ", " + fmt(secs) + "s <= 60s");
}

void criterion_3(const lam::ExperimentResult& demailly) {
  bool all = true;
  std::size_t n = 0;
  for (const auto& c : demailly.criteria)
    if (c.name.rfind("self_mass_", 0) == 0) {
      ++n;
      all = all && c.pass && c.value == 0.0;
    }
  const bool ok = all && n >= 10;
  report(3, ok, "geometric self-wedge identically zero for " + std::to_string(n) +
                    " fixture families: " + (all ? "yes" : "no"));
}

void criterion_4() {
  const Timed t = timed_run(config("cantor_product"));
  const bool exact = get(t.result, "geometric_atoms").value == 64.0 &&
                     get(t.result, "geometric_mass").value == 1.0 &&
                     get(t.result, "geometric_position_error").value == 0.0 &&
                     get(t.result, "geometric_weight_error").value == 0.0 &&
                     get(t.result, "geometric_bin_distance").value == 0.0;
  const lam::Criterion& alt = get(t.result, "alternative_mass");
  const lam::Criterion& pot = get(t.result, "potential_distance");
  const bool ok = exact && alt.pass && alt.value == 0.0 && pot.value <= 0.1;
  report(4, ok, "product measure exact (64 atoms, mass 1), alternative representation wedges to "
                "0, potential route within " +
                    fmt(pot.value) + " <= 0.1");
}

void criterion_5(const lam::ExperimentResult& demailly, double secs) {
  const lam::Criterion& mass = get(demailly, "mass_error");
  const lam::Criterion& torus = get(demailly, "torus_mass_fraction");
  const lam::Criterion& ang = get(demailly, "angular_uniformity");
  const lam::Criterion& self = get(demailly, "self_mass_demailly");
  const bool ok = mass.value <= 0.05 && torus.value >= 0.95 && ang.value <= 0.1 && self.pass &&
                  secs <= 600.0;
  report(5, ok, "max-log wedge mass 1 +- " + fmt(mass.value) + " (cap 0.05), " +
                    fmt(torus.value * 100) + "% of mass within 0.1 of the unit torus (floor "
                    "95%), angular spread " +
                    fmt(ang.value) + " <= 0.1, decomposition self-wedge 0: " +
                    (self.pass ? "yes" : "no") + ", " + fmt(secs) + "s <= 600s");
}

void criterion_6(const lam::ExperimentResult& lemma, double secs) {
  const lam::Criterion& avg = get(lemma, "avg_escape_error");
  const lam::Criterion& mn = get(lemma, "min_escaped");
  const bool ok = avg.pass && mn.pass && secs <= 60.0;
  report(6, ok, "cloud average escape off expectation by " + fmt(avg.value) + " (3-sigma band " +
                    fmt(avg.threshold) + "), best offset escapes " + fmt(mn.value) +
                    " < " + fmt(mn.threshold) + ", " + fmt(secs) + "s <= 60s");
}

void criterion_7() {
  const Timed t = timed_run(config("defect_sweep"));
  const lam::Criterion& slope = get(t.result, "defect_slope");
  const lam::Criterion& dis = get(t.result, "disjoint_violations");
  const lam::Criterion& con = get(t.result, "conservation_worst");
  const lam::Criterion& cert = get(t.result, "classification_certified");
  const bool ok = slope.value >= 1.6 && dis.value == 0.0 && con.value <= 1e-6 && cert.pass &&
                  t.seconds <= 600.0;
  report(7, ok, "defect decays with slope " + fmt(slope.value) + " >= 1.6, " +
                    fmt(dis.value) + " disjointness violations, sheet-area conservation gap " +
                    fmt(con.value) + " <= 1e-6, " + fmt(t.seconds) + "s <= 600s");
}

void criterion_8() {
  const Timed t = timed_run(config("pipeline"));
  const lam::Criterion& dom = get(t.result, "domination_excess");
  const lam::Criterion& mono = get(t.result, "nuQ_monotone");
  const lam::Criterion& ratio = get(t.result, "m_ratio");
  const bool ok = dom.value <= 0.0 && mono.pass && ratio.value <= 0.5 && t.seconds <= 1200.0;
  report(8, ok, "per-bin domination excess " + fmt(dom.value) + " <= 0, captured mass "
                "nondecreasing: " +
                    (mono.pass ? "yes" : "no") + ", mass difference ratio " + fmt(ratio.value) +
                    " <= 0.5, " + fmt(t.seconds) + "s <= 1200s");
}

void criterion_9() {
  const Timed t = timed_run(config("henon_mu"));
  bool exact = true;
  for (int n = 1; n <= 3; ++n) {
    exact = exact && get(t.result, "atoms_n" + std::to_string(n)).pass &&
            get(t.result, "mass_n" + std::to_string(n)).value == 1.0;
  }
  const lam::Criterion& trend = get(t.result, "cauchy_trend");
  const bool ok = exact && trend.value > 0.0 && t.seconds <= 300.0;
  report(9, ok, std::string("certified atom counts 4/16/64 with exact unit mass: ") +
                    (exact ? "yes" : "no") + ", successive-level gap shrinks by " +
                    fmt(trend.value) + " > 0, " + fmt(t.seconds) + "s <= 300s");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct Replay {
  bool identical = false;
  std::size_t files = 0;
  std::size_t bytes = 0;
};

Replay run_lemma_pair() {
  namespace fs = std::filesystem;
  const auto t0 = clock_type::now();
  const lam::ExperimentResult a = lam::run_experiment(config("lemma45", {}, 42));
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const lam::ExperimentResult b = lam::run_experiment(config("lemma45", {}, 42));

  const fs::path root = fs::path("acceptance_tmp");
  fs::remove_all(root);
  lam::emit_report(a, (root / "a").string());
  lam::emit_report(b, (root / "b").string());

  Replay rep;
  rep.files = a.files.size();
  rep.identical = a.files.size() == b.files.size();
  if (rep.identical)
    for (std::size_t i = 0; i < a.files.size(); ++i) {
      const std::string da = slurp(root / "a" / a.files[i].first);
      const std::string db = slurp(root / "b" / b.files[i].first);
      rep.bytes += da.size();
      rep.identical = rep.identical && a.files[i].first == b.files[i].first && !da.empty() &&
                      da == db && da == a.files[i].second;
    }
  criterion_6(a, secs);
  return rep;
}

void criterion_10(const Replay& rep) {
  report(10, rep.identical, "rerun with the same seed reproduced " + std::to_string(rep.files) +
                                " report files (" + std::to_string(rep.bytes) +
                                " bytes) byte for byte: " + (rep.identical ? "yes" : "no"));
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);  // keep lines visible if a later stage throws
  try {
    criterion_1();
    criterion_2();

    const Timed demailly = timed_run(config("demailly_self"));
    criterion_3(demailly.result);
    criterion_4();
    criterion_5(demailly.result, demailly.seconds);
    const Replay rep = run_lemma_pair();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10(rep);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << "\n";
    return 1;
  }
  std::cout << "acceptance: " << (10 - g_failures) << "/10 criteria pass\n";
  return g_failures == 0 ? 0 : 1;
}
