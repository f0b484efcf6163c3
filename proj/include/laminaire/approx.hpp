#pragma once

#include <memory>

#include "laminaire/laminar.hpp"
#include "laminaire/potential.hpp"

namespace lam {

// Parameterized curve of normalized area degree d_n, given by an evaluator
// (point, derivative) holomorphic in t; never expanded into coefficients.
struct CurveIterate {
  std::function<std::pair<C2, C2>(cplx)> eval;
  double degree = 1.0;
  Box param_box{-1.0, 1.0, -1.0, 1.0};
  std::string label;

  double cr_residual(int n = 10) const;
};

struct ClassifyOptions {
  int max_depth = 14;
  double transverse_cap = 50.0;   // cylinder radius: boxes beyond it leave the window
  double graph_area_tol = 5e-3;   // good needs |area_proj - r^2| <= tol * r^2
  int max_seeds = 64;
};

struct ComponentRecord {
  long jz = 0, kz = 0;  // base-square cell
  bool good = false;
  long degree = 0;      // certified covering degree over the square (max probe)
  double area_proj = 0.0;   // int |(pi o gamma)'|^2 over the patch
  double area_full = 0.0;   // int (|z'|^2 + |w'|^2)
  double area_param = 0.0;  // plain parameter area of the patch
  double area_sliver = 0.0;  // depth-capped cell-boundary margin inside area_proj
  bool pure_ambiguous = false;  // no resolved box at all: conservatively bad
  std::vector<Box> boxes;
  std::vector<std::pair<cplx, cplx>> seeds;  // (t, base image)
};

struct Classification {
  Subdivision cells;
  Chart chart;  // base projection classifies; trans carries the graph value
  std::vector<ComponentRecord> components;
  double total_area_proj = 0.0;  // conservation: good + bad = total exactly
  double good_area_proj = 0.0, bad_area_proj = 0.0;
  bool certified = true;
};

// Adaptive parameter-space subdivision: every kept leaf box is assigned to
// exactly one base square, connected boxes merge into components, and each
// component's covering degree is certified by boundary winding integrals
// (summed per box, so shared internal edges cancel in exact integers).
// Boxes still straddling a cell edge at maximum depth attach to the
// component of their center cell and count as sliver margin; the graph-area
// test widens by exactly that margin, so boundary resolution limits never
// flip a sheet's verdict. A component made only of such boxes stays bad.
Classification classify_components(const CurveIterate& c, const Chart& chart,
                                   const Subdivision& cells, const ClassifyOptions& opt = {});

struct DefectReport {
  double r = 0.0;
  double normalized_defect = 0.0;  // (bad area) / d_n
  double constant_estimate = 0.0;  // normalized_defect / r^2
};
DefectReport defect_mass(const Classification& cls, double d_n);

// Newton evaluator graphing a good component over its square; derivative via
// the chain rule. Non-convergence surfaces as NaN (downstream certification
// then fails honestly rather than silently).
GraphMap sheet_graph(const CurveIterate& c, const Chart& chart,
                     std::shared_ptr<const ComponentRecord> comp);

struct SheetFamily {
  std::vector<UniformLaminarPiece> pieces;  // one piece per populated square
  DefectReport defect;                      // combined two-projection defect
  Classification cls1, cls2;
  double removed_overvolume = 0.0;  // good area dropped by the volume cap
  double duplicate_overlap = 0.0;   // chart-2 parameter area already covered
};

// Proposition-style extraction: good sheets under chart1 union good sheets
// under chart2 (second-chart sheets whose parameter patch is mostly covered
// by first-chart sheets are dropped), weight 1/d_n per disk; over-volume
// good components (> 10x median full area) move to the defect.
SheetFamily build_uniform_pieces(const CurveIterate& c, const Chart& chart1, const Chart& chart2,
                                 const Subdivision& s1, const Subdivision& s2,
                                 const ClassifyOptions& opt = {});

struct TranslateReport {
  C2 Z{cplx{0, 0}, cplx{0, 0}};
  double min_escaped = 0.0;
  double avg_escaped = 0.0;
  double expected_escape = 0.0;  // (1 - lambda^4) * mass
  int grid_n = 9;
};

// Deterministic Z-grid search for the subdivision offset minimizing the mass
// escaping the lambda-shrunk cubes. The average over the grid approximates
// (1 - lambda^4) * mass; the minimum must beat twice that.
TranslateReport translate_search(const AtomicMeasure& nu, const CubeGrid& grid, double lambda,
                                 int grid_n = 9);

// Same search driven by a density grid restricted to the region; separable
// per-axis contraction keeps it O(grid_n * nodes).
TranslateReport translate_search_density(const Grid4& density, const WedgeRegion& region,
                                         double r, double lambda, int grid_n = 9);

struct PipelineCurrent {
  bool has_curve = false;
  CurveIterate curve;
  std::vector<UniformLaminarPiece> fixed_family;  // used when !has_curve
  Chart chart1 = chart_zw(), chart2 = chart_wz();
  Grid4 potential;  // continuous-potential sample (pre-mollification)
};

struct PipelineOptions {
  std::vector<double> r_sequence;  // decreasing
  std::vector<double> sigmas;      // decreasing, for the reference wedge
  bool use_remark_rule = true;     // 1 - lambda = (omega1 + omega2)^(1/3)
  double fixed_lambda = 0.9;
  double lambda_floor = 0.25, lambda_cap = 0.95;
  Polydisk window;  // comparison region
  ClassifyOptions classify;
  double domination_tol_factor = 10.0;  // tolerance = factor * h^2 * nu mass
  bool abort_on_domination = true;
};

struct PipelineRow {
  double r = 0, lambda = 0, defect_mass = 0, omega_u1 = 0, omega_u2 = 0;
  double nu_mass = 0, nuQ_mass = 0, rate_ratio = 0;
  double domination_worst = 0;  // max over refinement bins of nuQ - nu
  C2 Z;
};

struct PipelineReport {
  std::vector<PipelineRow> rows;
  bool domination_ok = true;
  bool nuQ_monotone = true;
  bool geometric_verdict = false;
  double cauchy_indicator = 0.0;
};

// End-to-end r-sweep: reference measure from the potentials, translated
// subdivisions from the escape search, extracted sheet families wedged
// geometrically, and the mass difference tracked over the common refinement
// of both cube grids. defect_mass row column = M(nu - nu_Q).
PipelineReport intersection_pipeline(const PipelineCurrent& c1, const PipelineCurrent& c2,
                                     const PipelineOptions& opt);

}  // namespace lam
