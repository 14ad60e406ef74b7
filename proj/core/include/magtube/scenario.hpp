// Scenario files: a single key-value tree that names everything a run
// needs — geometry, section, well, field, grids, experiment selection and
// per-experiment parameters. Parsing is strict (unknown or duplicate keys
// are hard errors), defaults are filled in and recorded, and the resolved
// configuration has a canonical text form whose digest identifies the run
// for caching.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "magtube/fields.hpp"
#include "magtube/geometry.hpp"
#include "magtube/grid.hpp"

namespace magtube {

struct SectionConfig {
  std::string shape = "disk";  // disk | square
  double radius = 1.0;         // disk radius
  double half_side = 1.0;      // square half side
  CrossSection build() const;
};

struct PotentialConfig {
  // The well is depth * chi(section): constant inside the cross-section,
  // zero outside. Scenario files give either the depth directly or its
  // reciprocal scale epsilon = 1/depth; the flag records which spelling
  // the file used so the resolved dump round-trips.
  double depth = 10.0;
  bool from_epsilon = false;
  double epsilon() const { return 1.0 / depth; }
};

struct Grid2Config {
  double extent = 6.0;  // box [-extent, extent]^2
  double h = 0.1;       // target spacing; cells = round(2 extent / h)
  Grid2 build() const;
};

struct Grid3Config {
  double extent = 6.0;  // transverse box [-extent, extent]^2
  double height = 6.5;  // axial box [-height, height]
  double h = 0.1;
  Grid3 build() const;
};

struct GaugeExpConfig {
  std::vector<int> sizes = {64, 128};  // cells per axis, coarse to fine
  double extent_factor = 2.5;          // box half width = factor * s0
};

struct LemmaExpConfig {
  std::vector<double> btilde = {10.0, 20.0, 40.0, 80.0, 160.0};
  std::vector<double> radii = {0.8, 1.0, 1.4};
  int nr = 1600;  // radial cells per fiber
};

struct Theorem1ExpConfig {
  std::vector<double> lengths = {20.0, 40.0, 80.0};  // axial box lengths
  std::vector<int> weyl_k = {8, 16, 32, 64};
};

struct BracketingExpConfig {
  double alpha = 1.4;  // half width of the inner all-Neumann square
};

struct SweepExpConfig {
  std::vector<double> b3 = {0.0};  // sampled axial fields, increasing from 0
  std::string mode = "warm";       // warm | cold | both
};

struct Scenario {
  CurveSpec curve;  // curve.s0 mirrors field.s0 (single source in the file)
  SectionConfig section;
  PotentialConfig potential;
  FieldSpec field;  // rho1/rho2 resolved to concrete radii at parse time
  Grid2Config grid2;
  Grid3Config grid3;
  std::vector<std::string> experiments;  // canonical order, no duplicates
  double solver_tol = 1e-8;
  int solver_max_iter = 600;
  GaugeExpConfig gauge;
  LemmaExpConfig lemma;
  Theorem1ExpConfig theorem1;
  BracketingExpConfig bracketing;
  SweepExpConfig sweep;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  // Exact text form of the resolved configuration: every section and key,
  // fixed order, doubles printed with enough digits to round-trip. Parsing
  // the dump reproduces a scenario with the same dump.
  std::string canonical_dump() const;

  // FNV-1a digest of the canonical dump, excluding keys with no numerical
  // effect (output directory, thread count). The seed participates: it
  // changes solver starting vectors, hence bit-level results.
  std::uint64_t hash() const;
  std::string hash_hex() const;  // 16 lowercase hex digits
};

// All experiment names the runner knows, in canonical execution order.
const std::vector<std::string>& known_experiments();

// Parse and fully validate a scenario file. Configuration problems —
// unreadable file, malformed syntax, unknown or duplicate keys, values out
// of range, physically inconsistent selections — throw invalid_argument
// with a message naming every offending key.
Scenario parse_scenario(const std::string& path);

// Same, from an in-memory buffer; origin labels error messages.
Scenario parse_scenario_text(const std::string& text,
                             const std::string& origin = "<memory>");

// Semantic checks beyond single-key ranges: grid/field consistency and the
// geometric gates (tube injectivity; for the absorption experiment, the
// deformed tube must stay inside the ball where the field is uniform).
// parse_scenario runs this; exposed for tests and for programmatically
// built scenarios.
void validate_scenario(const Scenario& sc);

// Per-task solver seed derived from the scenario seed and a task label.
// Every randomized start vector in a run flows through this, so one seed
// in the scenario file pins the whole run bit-for-bit.
std::uint64_t derive_seed(std::uint64_t base, const std::string& label);

}  // namespace magtube
