#pragma once

#include <iosfwd>
#include <string>

#include "laminaire/approx.hpp"

namespace lam {

// All writers are deterministic: %.17g numerics, stable orderings, no locale.

void write_atoms_csv(std::ostream& os, const AtomicMeasure& m);
AtomicMeasure read_atoms_csv(std::istream& is);

// JSON header line (domain, spacing, label) followed by the raw value block
// as 64-bit little-endian reals in row-major (x, y, s, t) order.
void write_grid(std::ostream& os, const Grid4& g);
Grid4 read_grid(std::istream& is);

void write_bins_csv(std::ostream& os, const BinnedMass& b);

// JSON list of {chart, base square, mask, polynomial coefficients, weight}.
// Evaluator-backed graphs are fitted by least squares before writing; the
// fit residual is recorded per disk and must stay small for round-trips.
void write_disk_family(std::ostream& os, const std::vector<UniformLaminarPiece>& family);
std::vector<UniformLaminarPiece> read_disk_family(std::istream& is);

void write_components_jsonl(std::ostream& os, const Classification& cls);

std::string format_double(double v);

}  // namespace lam
