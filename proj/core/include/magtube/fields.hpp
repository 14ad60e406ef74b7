// Compactly supported magnetic fields and their vector potentials.
//
// The field starts from a constant B0, multiplied into a radial cutoff so
// that B = B0 exactly inside |x| <= rho1 and B = 0 outside |x| >= rho2,
// while staying divergence free: B = rot(chi(|x|) * B0 x x / 2).
//
// Two axial-anchor gauges are provided with A2 = 0: one whose potential
// vanishes identically above the support, one vanishing below. They differ
// by the gradient of a function of x1 alone, which is also exposed so the
// equivalence can be checked exactly.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "magtube/grid.hpp"
#include "magtube/vec3.hpp"

namespace magtube {

// Radial cutoff: 1 on [0, rho1], 0 on [rho2, inf), 9th-order smoothstep
// blend in between (C^4 join). Four continuous derivatives keep the field
// three times differentiable, so centered-difference checks of its
// derivatives converge at a uniform second order.
struct CutoffProfile {
  double rho1 = 1.05;
  double rho2 = 1.95;

  double chi(double rho) const;
  double dchi(double rho) const;
  double d2chi(double rho) const;
};

struct FieldSpec {
  Vec3 B0{0.0, 0.0, 1.0};
  double s0 = 1.0;
  // Cutoff radii, required to satisfy s0 < rho1 < rho2 < 2*s0 strictly;
  // nonpositive values select the defaults 1.05*s0 and 1.95*s0. The wide
  // blend keeps the cutoff's derivative peaks, and with them the constants
  // in finite-difference consistency checks, as small as the support
  // constraint allows.
  double rho1 = 0.0;
  double rho2 = 0.0;
};

class MagneticField {
 public:
  explicit MagneticField(const FieldSpec& spec);

  const FieldSpec& spec() const { return spec_; }
  const CutoffProfile& cutoff() const { return cut_; }
  double support_radius() const { return cut_.rho2; }

  // B(x) = chi B0 + (chi'/(2 rho)) (rho^2 B0 - <B0,x> x); exactly B0 inside
  // rho1, exactly zero outside rho2, divergence free in between.
  Vec3 B(const Vec3& x) const;

  // Closed-form dB1/dx1, the integrand of the potential's double integral.
  double dB1_dx1(const Vec3& x) const;

 private:
  FieldSpec spec_;
  CutoffProfile cut_;
};

MagneticField make_field(const FieldSpec& spec);

// Side of the axis on which the potential vanishes identically.
enum class GaugeAnchor { Upper, Lower };

// Integration intervals are pre-split at the cutoff-shell crossings, so the
// pieces are smooth and a shallow refinement depth suffices; a deep budget
// would only be burned on pieces whose value is negligible, where a relative
// tolerance can never be met.
struct QuadratureBudget {
  double rel_tol = 1e-10;        // outermost level
  double inner_rel_tol = 1e-11;  // innermost level
  int max_depth = 4;
  // Accumulated error estimates above error_ceiling * (1 + |B0| s0^2)
  // raise an error carrying the attained estimate.
  double error_ceiling = 1e-6;
};

// Vector potential (A1, 0, A3) with rot A = B:
//   A3(x)    = int_0^{x2} B1(x1, t2, x3) dt2
//   A1(x)    = -int_{x3}^{anchor} [ B2(x1, x2, t3)
//                + int_0^{x2} dB1/dx1(x1, t2, t3) dt2 ] dt3
// with the anchor above (Upper) or below (Lower) the support, where the
// potential then vanishes identically.
class GaugeField {
 public:
  GaugeField(const MagneticField& field, GaugeAnchor anchor,
             QuadratureBudget budget = {});

  const MagneticField& field() const { return field_; }
  GaugeAnchor anchor() const { return anchor_; }

  double A1(const Vec3& x) const;
  double A3(const Vec3& x) const;
  Vec3 A(const Vec3& x) const { return {A1(x), 0.0, A3(x)}; }

  // Straight-segment line integral int_a^b A . dl.
  double line_integral(const Vec3& a, const Vec3& b) const;

  // Integrand of the axial integral defining A1; exposed for the lattice
  // sweeps, which advance A1 between axial nodes by integrating it.
  double column_G(double x1, double x2, double t3) const;

 private:
  MagneticField field_;
  GaugeAnchor anchor_;
  QuadratureBudget budget_;
};

GaugeField landau_gauge(const MagneticField& field);
GaugeField mirror_gauge(const MagneticField& field);

// Upper- and lower-anchored potentials differ by grad phi with phi a
// function of x1 alone; phi(x1) with phi normalized so phi -> 0 for
// x1 <= -rho2. A_upper = A_lower + grad phi.
double gauge_transfer_phase(const MagneticField& field, double x1,
                            QuadratureBudget budget = {});

// Node values of A1 / A3 over a grid, filled by incremental column sweeps
// so the cost is one quadrature per node instead of one per (node, anchor
// distance). Arrays are indexed by Grid3::index.
std::vector<double> a1_lattice(const GaugeField& gauge, const Grid3& g);
std::vector<double> a3_lattice(const GaugeField& gauge, const Grid3& g);

// Link integrals theta[a][link] = int A . dl along the grid link from node
// (i,j,k) to its +e_a neighbor; link (i,j,k) for axis a is stored at
// Grid3::index-style position with extent n[a]-1 along a. theta[1] is
// identically zero for these gauges and kept for uniform indexing.
struct LinkPhases {
  Grid3 grid;
  std::array<std::vector<double>, 3> theta;

  std::int64_t link_index(int axis, int i, int j, int k) const;
};

LinkPhases compute_link_phases(const GaugeField& gauge, const Grid3& g);

// Link phases are linear in B0; combine per-unit-direction tables into the
// table for an arbitrary B0 without new quadrature.
LinkPhases combine_phases(const std::array<const LinkPhases*, 3>& unit,
                          const Vec3& B0);

// Residuals of the curl system and the divergence of the closed-form field,
// measured by central differences of the potential lattices over the
// interior nodes of g:
//   eq 0:  d2 A3 - d3 A2 - B1
//   eq 1:  d3 A1 - d1 A3 - B2
//   eq 2:  d1 A2 - d2 A1 - B3
struct CurlReport {
  std::array<double, 3> max_abs{};  // per equation, absolute
  std::array<double, 3> rms{};
  double max_div_b = 0.0;  // centered divergence of the closed-form field
  double b0_norm = 0.0;
  double h = 0.0;
  std::int64_t interior_nodes = 0;

  double worst_abs() const;
  double worst_rel() const;  // worst_abs / b0_norm
};

CurlReport check_curl_system(const GaugeField& gauge, const Grid3& g);

}  // namespace magtube
