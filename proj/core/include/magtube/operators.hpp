// Discrete Hermitian operators: the planar auxiliary operator -Lap - V,
// the magnetic Neumann Laplacian on disks (radial fibers plus a Cartesian
// cross-check), the full three-dimensional tube Hamiltonian, and its
// Neumann bracketing pieces.
//
// All stencils live on cell-centered grids. A Dirichlet wall adds 1/h^2 to
// the diagonal of the adjacent cell (ghost reflection); a Neumann wall
// simply drops the wall link (ghost copy). Magnetic couplings are Peierls
// phases: the hop along a link carries exp(-i int A . dl), which keeps
// every assembled matrix Hermitian by construction and makes discrete
// gauge changes exact diagonal unitaries.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "magtube/fields.hpp"
#include "magtube/geometry.hpp"
#include "magtube/grid.hpp"
#include "magtube/hermitian.hpp"

namespace magtube {

// ============================================================
// Stencil storage
// ============================================================

// Second-order stencil on a 2D grid, optionally restricted to an active
// cell subset (inactive cells carry no unknowns; links touching them are
// absent). diag is indexed by dof, hop[axis] by full-grid link.
class StencilOp2 final : public HermitianOperator {
 public:
  explicit StencilOp2(const Grid2& g);
  StencilOp2(const Grid2& g, const std::vector<std::uint8_t>& active);

  Grid2 grid;
  std::vector<double> diag;
  std::array<std::vector<std::complex<double>>, 2> hop;
  std::vector<std::int64_t> cells;   // dof -> cell id (empty: identity)
  std::vector<std::int64_t> dof_of;  // cell id -> dof or -1 (empty: identity)

  std::int64_t link_index(int axis, int i, int j) const {
    std::int64_t cols = grid.n[1] - (axis == 1 ? 1 : 0);
    return std::int64_t(i) * cols + j;
  }
  std::int64_t cell_of(std::int64_t dof) const {
    return cells.empty() ? dof : cells[dof];
  }
  std::int64_t dof_at(std::int64_t cell) const {
    return dof_of.empty() ? cell : dof_of[cell];
  }

  std::int64_t dim() const override;
  void apply(const std::complex<double>* x,
             std::complex<double>* y) const override;
  const std::vector<double>* diagonal() const override { return &diag; }
  std::optional<double> spectral_lower_bound() const override;
  std::optional<Csr> to_csr() const override;
  std::string describe() const override;
  void set_threads(int t) { threads_ = t; }

 private:
  int threads_ = 1;
};

// The 3D counterpart.
class StencilOp3 final : public HermitianOperator {
 public:
  explicit StencilOp3(const Grid3& g);
  StencilOp3(const Grid3& g, const std::vector<std::uint8_t>& active);

  Grid3 grid;
  std::vector<double> diag;
  std::array<std::vector<std::complex<double>>, 3> hop;
  std::vector<std::int64_t> cells;
  std::vector<std::int64_t> dof_of;

  std::int64_t link_index(int axis, int i, int j, int k) const {
    std::array<std::int64_t, 3> m{grid.n[0], grid.n[1], grid.n[2]};
    m[axis] -= 1;
    return (std::int64_t(i) * m[1] + j) * m[2] + k;
  }
  std::int64_t cell_of(std::int64_t dof) const {
    return cells.empty() ? dof : cells[dof];
  }
  std::int64_t dof_at(std::int64_t cell) const {
    return dof_of.empty() ? cell : dof_of[cell];
  }

  std::int64_t dim() const override;
  void apply(const std::complex<double>* x,
             std::complex<double>* y) const override;
  const std::vector<double>* diagonal() const override { return &diag; }
  std::optional<double> spectral_lower_bound() const override;
  std::optional<Csr> to_csr() const override;
  std::string describe() const override;
  void set_threads(int t) { threads_ = t; }

 private:
  int threads_ = 1;
};

// Max over random vector pairs of |<x, Op y> - conj(<y, Op x>)| relative to
// the form magnitudes; a bookkeeping self-check.
double hermiticity_defect(const HermitianOperator& op, int pairs,
                          std::uint64_t seed);

// Rayleigh quotient <psi, Op psi> / <psi, psi>; the discrete form value.
// Throws on psi = 0; the imaginary part (a Hermiticity defect) must be
// negligible and is folded away.
double quadratic_form(const HermitianOperator& op,
                      const std::vector<std::complex<double>>& psi);

// Sparse triplet text export: header "n nnz", then one "row col re im"
// line per stored entry. Requires explicit rows (to_csr).
void write_triplets(const HermitianOperator& op, std::ostream& out);

// Dirichlet truncation margin (in lengths) suggested for eigenfunctions a
// spectral distance e_gap below the essential edge: 4 / sqrt(e_gap).
double suggest_margin(double e_gap);

// ============================================================
// Planar auxiliary operator h_V = -Lap - V
// ============================================================

struct Hv2D {
  StencilOp2 op;
  double v_inf = 0.0;          // max nodal |V|
  double support_margin = 0.0; // wall clearance of the sampled support
  std::vector<std::string> warnings;
};

// 5-point Laplacian minus the cell-averaged potential, Dirichlet faces.
// V is sampled by tensor Gauss quadrature per cell (quad_pts per axis).
// A support clearance below 5 / sqrt(|V|_inf) decay lengths records a
// warning instead of failing.
Hv2D assemble_hv(const std::function<double(double, double)>& V,
                 const Grid2& grid, int quad_pts = 4);

struct GroundState2D {
  double e = 0.0;              // lowest eigenvalue, negative
  std::vector<double> f;       // nodal values, positive, L2-normalized
  double beta_f = 0.0;         // min of f^2 over the disk r <= s0
  double f_inf = 0.0;          // max nodal value
  Grid2 grid;
  double residual = 0.0;
  std::uint64_t seed = 0;
};

struct GroundOpts {
  double tol = 1e-10;
  int max_iter = 500;
  std::uint64_t seed = 0x6d61677475623032ull;
  int threads = 1;
};

// Lowest eigenpair of h_V with the sign fixed positive. Errors when the
// computed ground energy is not negative ("no bound state at this
// discretization"), when any interior nodal value fails to be positive
// after sign fixing, or when the lowest eigenvalue is not simple.
GroundState2D ground_state_2d(const Hv2D& hv, double s0,
                              const GroundOpts& opts = {});

// ============================================================
// Magnetic Neumann Laplacian on a disk
// ============================================================

// Radial fiber at angular momentum m, in the symmetric gauge:
//   -(1/r)(r u')' + (Btilde r / 2 - m / r)^2 u  on (0, R),
// natural condition at the origin, Neumann at r = R, measure r dr. Stored
// as the symmetric tridiagonal obtained from the finite-volume form after
// symmetrizing by the square root of the radial mass.
struct DiskFiber {
  int m = 0;
  std::vector<double> diag;
  std::vector<double> off;
};

class DiskFamily {
 public:
  DiskFamily(double Btilde, double R, int nr, int M);

  double Btilde, R;
  int nr, M;

  DiskFiber fiber(int m) const;
  double fiber_lambda1(int m) const;

 private:
  double hr_;
};

// pre: R > 0, Btilde >= 0, nr >= 16, M >= 1.
DiskFamily assemble_disk_neumann(double Btilde, double R, int nr, int M);

struct Lambda1 {
  double value = 0.0;
  int m = 0;  // minimizing angular momentum
};

// Ground eigenvalue over all fibers. M < 0 selects an automatic cutoff
// (above Btilde R^2 / 2 with margin); a minimizer at the boundary of the
// searched range raises an error demanding a larger M.
Lambda1 lambda1_disk(double Btilde, double R, int nr = 1600, int M = -1);

// Cross-validation route: finite-volume Neumann discretization of the same
// operator on the Cartesian lattice, exact face apertures and cell areas
// against the disk boundary, Peierls phases of the symmetric gauge
// (exact, the gauge is linear). n cells per axis across the diameter.
double disk_lambda1_cartesian(double Btilde, double R, int n,
                              double tol = 1e-8);

// ============================================================
// Tube Hamiltonian (i grad + A)^2 - V~ and bracketing
// ============================================================

struct H3dOpts {
  int threads = 1;
  // Reuse precomputed link phases (e.g. combined unit-direction sets when
  // sweeping field strengths); must match the grid.
  const LinkPhases* phases = nullptr;
  // Tensor Gauss points per axis for the cell average of the lifted
  // potential; the default mirrors assemble_hv, so straight-tail slices of
  // the tube operator reproduce the planar stencil exactly and the
  // discretization bias cancels from edge comparisons.
  int quad_pts = 4;
};

// Gauge-covariant discretization on the given grid: Peierls hops from the
// link phases of the chosen gauge anchor, diagonal carrying the potential
// lifted from tube-frame coordinates (V may be empty for a free tube).
// pre: validate_tube(frame, section).ok(); the grid box contains the
// closed field support ball.
StencilOp3 assemble_h3d(const FrameField& frame, const CrossSection& section,
                        const std::function<double(double, double)>& V,
                        const MagneticField& field, GaugeAnchor anchor,
                        const Grid3& grid, const H3dOpts& opts = {});

// Neumann decomposition of the tube Hamiltonian. h1 and h2 are the pieces
// beyond the axial cuts at +-2 s0 (h1 assembled in the upper-anchored
// gauge, h2 in the lower-anchored one, where their potentials vanish);
// h31 is the all-Neumann inner box (-alpha, alpha)^2 x (-2 s0, 2 s0) with
// the true potential, h32 the slab outside that box, where the potential
// must vanish identically. Cut planes must lie on cell faces, so that the
// four pieces' quadratic forms sum to the full form minus the nonnegative
// cut-link terms: min spec(H) >= min over pieces holds at the matrix
// level, not merely up to discretization.
struct BracketingPieces {
  StencilOp3 h1, h2, h31, h32;
  double alpha = 0.0;           // half width of the inner square
  double required_alpha = 0.0;  // measured minimum admissible half width
};

BracketingPieces bracketing_pieces(
    const FrameField& frame, const CrossSection& section,
    const std::function<double(double, double)>& V,
    const MagneticField& field, const Grid3& grid, double boxHalfWidth,
    const H3dOpts& opts = {});

}  // namespace magtube
