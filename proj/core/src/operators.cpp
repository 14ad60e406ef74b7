#include "magtube/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "magtube/eigsolve.hpp"
#include "magtube/parallel.hpp"
#include "magtube/rng.hpp"

namespace magtube {

namespace {

using cd = std::complex<double>;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_rule(int q, std::vector<double>& x, std::vector<double>& w) {
  switch (q) {
    case 1:
      x = {0.0};
      w = {2.0};
      return;
    case 2:
      x = {-0.5773502691896257, 0.5773502691896257};
      w = {1.0, 1.0};
      return;
    case 3:
      x = {-0.7745966692414834, 0.0, 0.7745966692414834};
      w = {0.5555555555555556, 0.8888888888888888, 0.5555555555555556};
      return;
    case 4:
      x = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
           0.8611363115940526};
      w = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
           0.3478548451374538};
      return;
    case 5:
      x = {-0.9061798459386640, -0.5384693101056831, 0.0,
           0.5384693101056831, 0.9061798459386640};
      w = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
           0.4786286704993665, 0.2369268850561891};
      return;
    case 6:
      x = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
           0.2386191860831969, 0.6612093864662645, 0.9324695142031521};
      w = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
           0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
      return;
    default:
      throw std::invalid_argument(
          "cell quadrature order must be between 1 and 6");
  }
}

}  // namespace

// ============================================================
// Stencil storage
// ============================================================

StencilOp2::StencilOp2(const Grid2& g) : grid(g) {
  grid.validate();
  diag.assign(grid.size(), 0.0);
  hop[0].assign(std::int64_t(grid.n[0] - 1) * grid.n[1], cd(0.0));
  hop[1].assign(std::int64_t(grid.n[0]) * (grid.n[1] - 1), cd(0.0));
}

StencilOp2::StencilOp2(const Grid2& g, const std::vector<std::uint8_t>& active)
    : StencilOp2(g) {
  if (std::int64_t(active.size()) != grid.size())
    throw std::invalid_argument("StencilOp2: active mask size mismatch");
  dof_of.assign(grid.size(), -1);
  for (std::int64_t c = 0; c < grid.size(); ++c)
    if (active[c]) {
      dof_of[c] = std::int64_t(cells.size());
      cells.push_back(c);
    }
  if (cells.empty())
    throw std::invalid_argument("StencilOp2: active set is empty");
  diag.assign(cells.size(), 0.0);
}

std::int64_t StencilOp2::dim() const {
  return cells.empty() ? grid.size() : std::int64_t(cells.size());
}

void StencilOp2::apply(const cd* x, cd* y) const {
  const int n0 = grid.n[0], n1 = grid.n[1];
  const cd* h0 = hop[0].data();
  const cd* h1 = hop[1].data();
  if (cells.empty()) {
    parallel_for(n0, threads_, [&](std::int64_t ilo, std::int64_t ihi) {
      for (std::int64_t i = ilo; i < ihi; ++i) {
        for (int j = 0; j < n1; ++j) {
          const std::int64_t c = i * n1 + j;
          cd acc = diag[c] * x[c];
          if (i > 0) acc += std::conj(h0[c - n1]) * x[c - n1];
          if (i < n0 - 1) acc += h0[c] * x[c + n1];
          const std::int64_t l1 = i * (n1 - 1) + j;
          if (j > 0) acc += std::conj(h1[l1 - 1]) * x[c - 1];
          if (j < n1 - 1) acc += h1[l1] * x[c + 1];
          y[c] = acc;
        }
      }
    });
    return;
  }
  const std::int64_t nd = std::int64_t(cells.size());
  parallel_for(nd, threads_, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t d = lo; d < hi; ++d) {
      int i, j;
      grid.unindex(cells[d], i, j);
      cd acc = diag[d] * x[d];
      if (i > 0) {
        std::int64_t nb = dof_of[cells[d] - n1];
        if (nb >= 0) acc += std::conj(h0[link_index(0, i - 1, j)]) * x[nb];
      }
      if (i < n0 - 1) {
        std::int64_t nb = dof_of[cells[d] + n1];
        if (nb >= 0) acc += h0[link_index(0, i, j)] * x[nb];
      }
      if (j > 0) {
        std::int64_t nb = dof_of[cells[d] - 1];
        if (nb >= 0) acc += std::conj(h1[link_index(1, i, j - 1)]) * x[nb];
      }
      if (j < n1 - 1) {
        std::int64_t nb = dof_of[cells[d] + 1];
        if (nb >= 0) acc += h1[link_index(1, i, j)] * x[nb];
      }
      y[d] = acc;
    }
  });
}

std::optional<double> StencilOp2::spectral_lower_bound() const {
  const int n0 = grid.n[0], n1 = grid.n[1];
  double worst = std::numeric_limits<double>::infinity();
  for (std::int64_t d = 0; d < dim(); ++d) {
    int i, j;
    grid.unindex(cell_of(d), i, j);
    double row = 0.0;
    if (i > 0) row += std::abs(hop[0][link_index(0, i - 1, j)]);
    if (i < n0 - 1) row += std::abs(hop[0][link_index(0, i, j)]);
    if (j > 0) row += std::abs(hop[1][link_index(1, i, j - 1)]);
    if (j < n1 - 1) row += std::abs(hop[1][link_index(1, i, j)]);
    worst = std::min(worst, diag[d] - row);
  }
  return worst;
}

std::optional<Csr> StencilOp2::to_csr() const {
  const int n0 = grid.n[0], n1 = grid.n[1];
  Csr m;
  m.n = dim();
  m.row_ptr.assign(m.n + 1, 0);
  m.col.reserve(5 * m.n);
  m.val.reserve(5 * m.n);
  auto push = [&](std::int64_t cell, cd v) {
    std::int64_t nd = dof_at(cell);
    if (nd >= 0 && v != cd(0.0)) {
      m.col.push_back(nd);
      m.val.push_back(v);
    }
  };
  for (std::int64_t d = 0; d < m.n; ++d) {
    int i, j;
    const std::int64_t c = cell_of(d);
    grid.unindex(c, i, j);
    if (i > 0) push(c - n1, std::conj(hop[0][link_index(0, i - 1, j)]));
    if (j > 0) push(c - 1, std::conj(hop[1][link_index(1, i, j - 1)]));
    m.col.push_back(d);
    m.val.push_back(cd(diag[d]));
    if (j < n1 - 1) push(c + 1, hop[1][link_index(1, i, j)]);
    if (i < n0 - 1) push(c + n1, hop[0][link_index(0, i, j)]);
    m.row_ptr[d + 1] = std::int64_t(m.col.size());
  }
  return m;
}

std::string StencilOp2::describe() const {
  std::ostringstream os;
  os << "stencil2 " << grid.n[0] << "x" << grid.n[1] << " h=(" << grid.h(0)
     << "," << grid.h(1) << ")";
  if (!cells.empty()) os << " restricted";
  os << " dofs=" << dim();
  return os.str();
}

StencilOp3::StencilOp3(const Grid3& g) : grid(g) {
  grid.validate();
  diag.assign(grid.size(), 0.0);
  hop[0].assign(std::int64_t(grid.n[0] - 1) * grid.n[1] * grid.n[2], cd(0.0));
  hop[1].assign(std::int64_t(grid.n[0]) * (grid.n[1] - 1) * grid.n[2], cd(0.0));
  hop[2].assign(std::int64_t(grid.n[0]) * grid.n[1] * (grid.n[2] - 1), cd(0.0));
}

StencilOp3::StencilOp3(const Grid3& g, const std::vector<std::uint8_t>& active)
    : StencilOp3(g) {
  if (std::int64_t(active.size()) != grid.size())
    throw std::invalid_argument("StencilOp3: active mask size mismatch");
  dof_of.assign(grid.size(), -1);
  for (std::int64_t c = 0; c < grid.size(); ++c)
    if (active[c]) {
      dof_of[c] = std::int64_t(cells.size());
      cells.push_back(c);
    }
  if (cells.empty())
    throw std::invalid_argument("StencilOp3: active set is empty");
  diag.assign(cells.size(), 0.0);
}

std::int64_t StencilOp3::dim() const {
  return cells.empty() ? grid.size() : std::int64_t(cells.size());
}

void StencilOp3::apply(const cd* x, cd* y) const {
  const int n0 = grid.n[0], n1 = grid.n[1], n2 = grid.n[2];
  const std::int64_t s0 = std::int64_t(n1) * n2;
  const cd* h0 = hop[0].data();
  const cd* h1 = hop[1].data();
  const cd* h2 = hop[2].data();
  if (cells.empty()) {
    // Rows are split by leading index; axis-0 links share the cell layout.
    parallel_for(std::int64_t(n0) * n1, threads_,
                 [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t ij = lo; ij < hi; ++ij) {
        const int i = int(ij / n1), j = int(ij % n1);
        const std::int64_t c0 = ij * n2;
        const std::int64_t l1 = (std::int64_t(i) * (n1 - 1) + j) * n2;
        const std::int64_t l2 = ij * (n2 - 1);
        for (int k = 0; k < n2; ++k) {
          const std::int64_t c = c0 + k;
          cd acc = diag[c] * x[c];
          if (i > 0) acc += std::conj(h0[c - s0]) * x[c - s0];
          if (i < n0 - 1) acc += h0[c] * x[c + s0];
          if (j > 0) acc += std::conj(h1[l1 - std::int64_t(n2) + k]) * x[c - n2];
          if (j < n1 - 1) acc += h1[l1 + k] * x[c + n2];
          if (k > 0) acc += std::conj(h2[l2 + k - 1]) * x[c - 1];
          if (k < n2 - 1) acc += h2[l2 + k] * x[c + 1];
          y[c] = acc;
        }
      }
    });
    return;
  }
  const std::int64_t nd = std::int64_t(cells.size());
  parallel_for(nd, threads_, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t d = lo; d < hi; ++d) {
      int i, j, k;
      const std::int64_t c = cells[d];
      grid.unindex(c, i, j, k);
      cd acc = diag[d] * x[d];
      if (i > 0) {
        std::int64_t nb = dof_of[c - s0];
        if (nb >= 0) acc += std::conj(h0[link_index(0, i - 1, j, k)]) * x[nb];
      }
      if (i < n0 - 1) {
        std::int64_t nb = dof_of[c + s0];
        if (nb >= 0) acc += h0[link_index(0, i, j, k)] * x[nb];
      }
      if (j > 0) {
        std::int64_t nb = dof_of[c - n2];
        if (nb >= 0) acc += std::conj(h1[link_index(1, i, j - 1, k)]) * x[nb];
      }
      if (j < n1 - 1) {
        std::int64_t nb = dof_of[c + n2];
        if (nb >= 0) acc += h1[link_index(1, i, j, k)] * x[nb];
      }
      if (k > 0) {
        std::int64_t nb = dof_of[c - 1];
        if (nb >= 0) acc += std::conj(h2[link_index(2, i, j, k - 1)]) * x[nb];
      }
      if (k < n2 - 1) {
        std::int64_t nb = dof_of[c + 1];
        if (nb >= 0) acc += h2[link_index(2, i, j, k)] * x[nb];
      }
      y[d] = acc;
    }
  });
}

std::optional<double> StencilOp3::spectral_lower_bound() const {
  const int n0 = grid.n[0], n1 = grid.n[1], n2 = grid.n[2];
  double worst = std::numeric_limits<double>::infinity();
  for (std::int64_t d = 0; d < dim(); ++d) {
    int i, j, k;
    grid.unindex(cell_of(d), i, j, k);
    double row = 0.0;
    if (i > 0) row += std::abs(hop[0][link_index(0, i - 1, j, k)]);
    if (i < n0 - 1) row += std::abs(hop[0][link_index(0, i, j, k)]);
    if (j > 0) row += std::abs(hop[1][link_index(1, i, j - 1, k)]);
    if (j < n1 - 1) row += std::abs(hop[1][link_index(1, i, j, k)]);
    if (k > 0) row += std::abs(hop[2][link_index(2, i, j, k - 1)]);
    if (k < n2 - 1) row += std::abs(hop[2][link_index(2, i, j, k)]);
    worst = std::min(worst, diag[d] - row);
  }
  return worst;
}

std::optional<Csr> StencilOp3::to_csr() const {
  const int n0 = grid.n[0], n1 = grid.n[1], n2 = grid.n[2];
  const std::int64_t s0 = std::int64_t(n1) * n2;
  Csr m;
  m.n = dim();
  m.row_ptr.assign(m.n + 1, 0);
  m.col.reserve(7 * m.n);
  m.val.reserve(7 * m.n);
  auto push = [&](std::int64_t cell, cd v) {
    std::int64_t nd = dof_at(cell);
    if (nd >= 0 && v != cd(0.0)) {
      m.col.push_back(nd);
      m.val.push_back(v);
    }
  };
  for (std::int64_t d = 0; d < m.n; ++d) {
    int i, j, k;
    const std::int64_t c = cell_of(d);
    grid.unindex(c, i, j, k);
    if (i > 0) push(c - s0, std::conj(hop[0][link_index(0, i - 1, j, k)]));
    if (j > 0) push(c - n2, std::conj(hop[1][link_index(1, i, j - 1, k)]));
    if (k > 0) push(c - 1, std::conj(hop[2][link_index(2, i, j, k - 1)]));
    m.col.push_back(d);
    m.val.push_back(cd(diag[d]));
    if (k < n2 - 1) push(c + 1, hop[2][link_index(2, i, j, k)]);
    if (j < n1 - 1) push(c + n2, hop[1][link_index(1, i, j, k)]);
    if (i < n0 - 1) push(c + s0, hop[0][link_index(0, i, j, k)]);
    m.row_ptr[d + 1] = std::int64_t(m.col.size());
  }
  return m;
}

std::string StencilOp3::describe() const {
  std::ostringstream os;
  os << "stencil3 " << grid.n[0] << "x" << grid.n[1] << "x" << grid.n[2]
     << " h=(" << grid.h(0) << "," << grid.h(1) << "," << grid.h(2) << ")";
  if (!cells.empty()) os << " restricted";
  os << " dofs=" << dim();
  return os.str();
}

// ============================================================
// Operator-level checks and export
// ============================================================

double hermiticity_defect(const HermitianOperator& op, int pairs,
                          std::uint64_t seed) {
  if (pairs < 1) throw std::invalid_argument("hermiticity_defect: pairs >= 1");
  const std::int64_t n = op.dim();
  SplitMix64 g(seed);
  std::vector<cd> x(n), y(n), ax(n), ay(n);
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    for (std::int64_t i = 0; i < n; ++i) {
      x[i] = cd(g.uniform() - 0.5, g.uniform() - 0.5);
      y[i] = cd(g.uniform() - 0.5, g.uniform() - 0.5);
    }
    op.apply(x.data(), ax.data());
    op.apply(y.data(), ay.data());
    cd s1(0.0), s2(0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      s1 += std::conj(x[i]) * ay[i];
      s2 += std::conj(y[i]) * ax[i];
    }
    double scale = std::max({std::abs(s1), std::abs(s2), 1e-300});
    worst = std::max(worst, std::abs(s1 - std::conj(s2)) / scale);
  }
  return worst;
}

double quadratic_form(const HermitianOperator& op,
                      const std::vector<cd>& psi) {
  if (std::int64_t(psi.size()) != op.dim())
    throw std::invalid_argument("quadratic_form: state dimension mismatch");
  double nn = 0.0;
  for (const cd& z : psi) nn += std::norm(z);
  if (!(nn > 0.0))
    throw std::invalid_argument("quadratic_form: state must be nonzero");
  std::vector<cd> ap(psi.size());
  op.apply(psi.data(), ap.data());
  cd q(0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) q += std::conj(psi[i]) * ap[i];
  cd val = q / nn;
  if (!(std::abs(val.imag()) <= 1e-8 * (1.0 + std::abs(val.real()))))
    throw std::runtime_error(
        "quadratic_form: non-negligible imaginary part " + fmt(val.imag()));
  return val.real();
}

void write_triplets(const HermitianOperator& op, std::ostream& out) {
  auto csr = op.to_csr();
  if (!csr)
    throw std::runtime_error(
        "write_triplets: operator does not materialize explicit rows");
  out << csr->n << ' ' << csr->col.size() << '\n';
  out << std::setprecision(17);
  for (std::int64_t i = 0; i < csr->n; ++i)
    for (std::int64_t p = csr->row_ptr[i]; p < csr->row_ptr[i + 1]; ++p)
      out << i << ' ' << csr->col[p] << ' ' << csr->val[p].real() << ' '
          << csr->val[p].imag() << '\n';
}

double suggest_margin(double e_gap) {
  if (!(e_gap > 0.0))
    throw std::invalid_argument("suggest_margin: spectral gap must be positive");
  return 4.0 / std::sqrt(e_gap);
}

// ============================================================
// Planar auxiliary operator
// ============================================================

Hv2D assemble_hv(const std::function<double(double, double)>& V,
                 const Grid2& grid, int quad_pts) {
  grid.validate();
  if (!V) throw std::invalid_argument("assemble_hv: potential callable is empty");
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s)
      if (grid.bc[a][s] != Bc::Dirichlet)
        throw std::invalid_argument(
            "assemble_hv: the planar operator uses Dirichlet walls on all "
            "four sides");
  std::vector<double> qx, qw;
  gauss_rule(quad_pts, qx, qw);

  Hv2D out{StencilOp2(grid), 0.0, 0.0, {}};
  const int n0 = grid.n[0], n1 = grid.n[1];
  const double h0 = grid.h(0), h1 = grid.h(1);
  const double i0 = 1.0 / (h0 * h0), i1 = 1.0 / (h1 * h1);
  std::fill(out.op.hop[0].begin(), out.op.hop[0].end(), cd(-i0));
  std::fill(out.op.hop[1].begin(), out.op.hop[1].end(), cd(-i1));

  std::vector<double> vbar(grid.size());
  for (int i = 0; i < n0; ++i) {
    const double xc = grid.coord(0, i);
    for (int j = 0; j < n1; ++j) {
      const double yc = grid.coord(1, j);
      double acc = 0.0;
      for (std::size_t a = 0; a < qx.size(); ++a)
        for (std::size_t b = 0; b < qx.size(); ++b)
          acc += qw[a] * qw[b] *
                 V(xc + 0.5 * h0 * qx[a], yc + 0.5 * h1 * qx[b]);
      vbar[grid.index(i, j)] = 0.25 * acc;
    }
  }

  double lo0 = std::numeric_limits<double>::infinity(), hi0 = -lo0;
  double lo1 = lo0, hi1 = -lo0;
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) {
      const std::int64_t c = grid.index(i, j);
      double dg = 2.0 * i0 + 2.0 * i1;
      if (i == 0) dg += i0;
      if (i == n0 - 1) dg += i0;
      if (j == 0) dg += i1;
      if (j == n1 - 1) dg += i1;
      out.op.diag[c] = dg - vbar[c];
      out.v_inf = std::max(out.v_inf, std::abs(vbar[c]));
      if (vbar[c] != 0.0) {
        lo0 = std::min(lo0, grid.coord(0, i));
        hi0 = std::max(hi0, grid.coord(0, i));
        lo1 = std::min(lo1, grid.coord(1, j));
        hi1 = std::max(hi1, grid.coord(1, j));
      }
    }

  if (hi0 < lo0) {
    out.support_margin = std::numeric_limits<double>::infinity();
  } else {
    out.support_margin = std::min(
        std::min(lo0 - grid.lo[0], grid.hi[0] - hi0),
        std::min(lo1 - grid.lo[1], grid.hi[1] - hi1));
    if (out.v_inf > 0.0) {
      const double decay = 1.0 / std::sqrt(out.v_inf);
      if (out.support_margin < 5.0 * decay) {
        std::ostringstream os;
        os << "potential support clears the Dirichlet walls by "
           << out.support_margin / decay
           << " decay lengths (< 5); truncation may bias bound states";
        out.warnings.push_back(os.str());
      }
    }
  }
  return out;
}

GroundState2D ground_state_2d(const Hv2D& hv, double s0,
                              const GroundOpts& opts) {
  if (!(s0 > 0.0))
    throw std::invalid_argument("ground_state_2d: s0 must be positive");
  StencilOp2 op = hv.op;
  op.set_threads(opts.threads);

  SolveRequest rq;
  rq.op = &op;
  rq.k = 2;
  rq.tol = opts.tol;
  rq.max_iter = opts.max_iter;
  rq.seed = opts.seed;
  rq.mode = SolveMode::ShiftInvert;
  SpectrumReport rep = lowest_eigs(rq);

  const double e = rep.eigenvalues[0];
  if (!(e < 0.0))
    throw std::runtime_error(
        "ground_state_2d: no bound state at this discretization (lowest "
        "level " + fmt(e) + ")");
  const double gap = rep.eigenvalues[1] - e;
  if (!(gap > std::max(1e3 * opts.tol * (1.0 + std::abs(e)), 1e-10)))
    throw std::runtime_error(
        "ground_state_2d: lowest level is not simple at this discretization "
        "(gap " + fmt(gap) + ")");

  std::vector<cd>& x = rep.vectors[0];
  std::size_t imax = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i]) > std::abs(x[imax])) imax = i;
  const cd ph = std::conj(x[imax]) / std::abs(x[imax]);

  GroundState2D gs;
  gs.grid = hv.op.grid;
  gs.f.resize(x.size());
  double max_im = 0.0, max_re = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const cd z = ph * x[i];
    gs.f[i] = z.real();
    max_im = std::max(max_im, std::abs(z.imag()));
    max_re = std::max(max_re, std::abs(z.real()));
  }
  if (max_im > 1e-6 * max_re)
    throw std::runtime_error(
        "ground_state_2d: state has a nontrivial imaginary part after phase "
        "alignment (" + fmt(max_im / max_re) + " relative)");

  // Sign structure: the lowest state of this stencil is positive; reject
  // negative values that exceed the solver's pointwise noise floor.
  const double floor_rel =
      std::max(1e-11, 1e3 * rep.residuals[0]) * max_re;
  for (double v : gs.f)
    if (v <= 0.0 && std::abs(v) > floor_rel)
      throw std::runtime_error(
          "ground_state_2d: state is not positive after sign fixing "
          "(value " + fmt(v) + ")");

  const double cellw = gs.grid.h(0) * gs.grid.h(1);
  double nn = 0.0;
  for (double v : gs.f) nn += v * v;
  nn = std::sqrt(nn * cellw);
  for (double& v : gs.f) v /= nn;

  gs.e = e;
  gs.residual = rep.residuals[0];
  gs.seed = rep.seed;
  double beta = std::numeric_limits<double>::infinity();
  double finf = 0.0;
  for (int i = 0; i < gs.grid.n[0]; ++i)
    for (int j = 0; j < gs.grid.n[1]; ++j) {
      const double px = gs.grid.coord(0, i), py = gs.grid.coord(1, j);
      const double v = gs.f[gs.grid.index(i, j)];
      finf = std::max(finf, v);
      if (px * px + py * py <= s0 * s0) beta = std::min(beta, v * v);
    }
  if (!std::isfinite(beta))
    throw std::invalid_argument(
        "ground_state_2d: no grid node inside the disk of radius s0");
  gs.beta_f = beta;
  gs.f_inf = finf;
  return gs;
}

// ============================================================
// Magnetic Neumann Laplacian on a disk
// ============================================================

DiskFamily::DiskFamily(double Btilde_, double R_, int nr_, int M_)
    : Btilde(Btilde_), R(R_), nr(nr_), M(M_) {
  if (!(R > 0.0))
    throw std::invalid_argument("assemble_disk_neumann: radius must be positive");
  if (!(Btilde >= 0.0))
    throw std::invalid_argument(
        "assemble_disk_neumann: field strength must be nonnegative");
  if (nr < 16)
    throw std::invalid_argument(
        "assemble_disk_neumann: need at least 16 radial cells");
  if (M < 1)
    throw std::invalid_argument(
        "assemble_disk_neumann: angular cutoff must be at least 1");
  hr_ = R / nr;
}

DiskFiber DiskFamily::fiber(int m) const {
  DiskFiber fb;
  fb.m = m;
  fb.diag.resize(nr);
  fb.off.resize(nr - 1);
  const double h = hr_;
  for (int j = 0; j < nr; ++j) {
    const double r = (j + 0.5) * h;
    const double wpot = Btilde * r / 2.0 - m / r;
    // Face radii over h: r_{j-1/2}/h = j, r_{j+1/2}/h = j+1; the outermost
    // face is the Neumann wall and carries no flux.
    double a = (j > 0 ? j : 0) + (j < nr - 1 ? j + 1 : 0);
    a += wpot * wpot * r * h;
    fb.diag[j] = a / (r * h);
    if (j < nr - 1)
      fb.off[j] = -double(j + 1) / (h * std::sqrt(r * (r + h)));
  }
  return fb;
}

double DiskFamily::fiber_lambda1(int m) const {
  DiskFiber fb = fiber(m);
  return tridiag_lowest(fb.diag, fb.off, 1)[0];
}

DiskFamily assemble_disk_neumann(double Btilde, double R, int nr, int M) {
  return DiskFamily(Btilde, R, nr, M);
}

Lambda1 lambda1_disk(double Btilde, double R, int nr, int M) {
  if (M < 0)
    M = std::max(12, int(std::ceil(Btilde * R * R / 2.0)) + 8);
  DiskFamily fam = assemble_disk_neumann(Btilde, R, nr, M);
  Lambda1 best;
  best.value = std::numeric_limits<double>::infinity();
  for (int m = -M; m <= M; ++m) {
    const double v = fam.fiber_lambda1(m);
    if (v < best.value) {
      best.value = v;
      best.m = m;
    }
  }
  if (std::abs(best.m) == M)
    throw std::runtime_error(
        "lambda1_disk: minimizing angular momentum sits at the search "
        "boundary (|m| = " + std::to_string(M) +
        "); rerun with a larger cutoff");
  return best;
}

namespace {

// Length of { y in [y0, y1] : xf^2 + y^2 <= R^2 }.
double chord_clip(double xf, double y0, double y1, double R) {
  const double d = R * R - xf * xf;
  if (d <= 0.0) return 0.0;
  const double s = std::sqrt(d);
  return std::max(0.0, std::min(y1, s) - std::max(y0, -s));
}

// Exact area of [x0,x1] x [y0,y1] intersected with the disk of radius R
// centered at the origin: the clipped chord length is integrated piecewise
// between the abscissas where the clipping branch changes.
double disk_area_in_box(double x0, double x1, double y0, double y1, double R) {
  const double a = std::max(x0, -R), b = std::min(x1, R);
  if (a >= b) return 0.0;
  auto F = [R](double x) {
    const double t = std::clamp(x / R, -1.0, 1.0);
    return 0.5 * (x * std::sqrt(std::max(0.0, R * R - x * x)) +
                  R * R * std::asin(t));
  };
  std::vector<double> cuts{a, b};
  for (double c : {y1, -y0}) {
    if (c >= 0.0 && c < R) {
      const double t = std::sqrt(R * R - c * c);
      if (t > a && t < b) cuts.push_back(t);
      if (-t > a && -t < b) cuts.push_back(-t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double area = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double lo = cuts[p], hi = cuts[p + 1];
    if (!(hi > lo)) continue;
    const double xm = 0.5 * (lo + hi);
    const double sm = std::sqrt(std::max(0.0, R * R - xm * xm));
    const double U = std::min(y1, sm), L = std::max(y0, -sm);
    if (!(U > L)) continue;
    const double iu =
        (y1 <= sm) ? y1 * (hi - lo) : (F(hi) - F(lo));
    const double il =
        (y0 >= -sm) ? y0 * (hi - lo) : -(F(hi) - F(lo));
    area += iu - il;
  }
  return area;
}

}  // namespace

double disk_lambda1_cartesian(double Btilde, double R, int n, double tol) {
  if (!(R > 0.0))
    throw std::invalid_argument("disk_lambda1_cartesian: radius must be positive");
  if (!(Btilde >= 0.0))
    throw std::invalid_argument(
        "disk_lambda1_cartesian: field strength must be nonnegative");
  if (n < 16)
    throw std::invalid_argument(
        "disk_lambda1_cartesian: need at least 16 cells per axis");
  if (!(tol > 0.0))
    throw std::invalid_argument("disk_lambda1_cartesian: tol must be positive");

  Grid2 g;
  g.lo = {-R, -R};
  g.hi = {R, R};
  g.n = {n, n};
  g.bc = {{{Bc::Neumann, Bc::Neumann}, {Bc::Neumann, Bc::Neumann}}};
  const double h = g.h(0);
  const double area_floor = 1e-6 * h * h;
  const double ap_floor = 1e-12 * h;

  std::vector<double> area(g.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      area[g.index(i, j)] =
          disk_area_in_box(g.lo[0] + i * h, g.lo[0] + (i + 1) * h,
                           g.lo[1] + j * h, g.lo[1] + (j + 1) * h, R);

  std::vector<std::uint8_t> active(g.size(), 0);
  for (std::int64_t c = 0; c < g.size(); ++c)
    active[c] = area[c] >= area_floor ? 1 : 0;

  // Cells whose every aperture is negligible would yield zero rows; fold
  // them into the inactive set (they carry negligible mass).
  std::vector<int> degree(g.size(), 0);
  auto face_x = [&](int i, int j) {  // face between (i-1,j) and (i,j)
    return chord_clip(g.lo[0] + i * h, g.lo[1] + j * h, g.lo[1] + (j + 1) * h,
                      R);
  };
  auto face_y = [&](int i, int j) {  // face between (i,j-1) and (i,j)
    return chord_clip(g.lo[1] + j * h, g.lo[0] + i * h, g.lo[0] + (i + 1) * h,
                      R);
  };
  for (int pass = 0; pass < 2; ++pass) {
    std::fill(degree.begin(), degree.end(), 0);
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (active[g.index(i - 1, j)] && active[g.index(i, j)] &&
            face_x(i, j) > ap_floor) {
          ++degree[g.index(i - 1, j)];
          ++degree[g.index(i, j)];
        }
    for (int i = 0; i < n; ++i)
      for (int j = 1; j < n; ++j)
        if (active[g.index(i, j - 1)] && active[g.index(i, j)] &&
            face_y(i, j) > ap_floor) {
          ++degree[g.index(i, j - 1)];
          ++degree[g.index(i, j)];
        }
    bool dropped = false;
    for (std::int64_t c = 0; c < g.size(); ++c)
      if (active[c] && degree[c] == 0) {
        active[c] = 0;
        dropped = true;
      }
    if (!dropped) break;
  }

  StencilOp2 op(g, active);
  std::vector<double> wsum(g.size(), 0.0);
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::int64_t cl = g.index(i - 1, j), cr = g.index(i, j);
      if (!active[cl] || !active[cr]) continue;
      const double ap = face_x(i, j);
      if (ap <= ap_floor) continue;
      const double yc = g.coord(1, j);
      const double theta = -Btilde * yc * h / 2.0;
      op.hop[0][op.link_index(0, i - 1, j)] =
          -(ap / h) * std::polar(1.0, -theta) / std::sqrt(area[cl] * area[cr]);
      wsum[cl] += ap / h;
      wsum[cr] += ap / h;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < n; ++j) {
      const std::int64_t cd_ = g.index(i, j - 1), cu = g.index(i, j);
      if (!active[cd_] || !active[cu]) continue;
      const double ap = face_y(i, j);
      if (ap <= ap_floor) continue;
      const double xc = g.coord(0, i);
      const double theta = Btilde * xc * h / 2.0;
      op.hop[1][op.link_index(1, i, j - 1)] =
          -(ap / h) * std::polar(1.0, -theta) / std::sqrt(area[cd_] * area[cu]);
      wsum[cd_] += ap / h;
      wsum[cu] += ap / h;
    }
  for (std::int64_t d = 0; d < op.dim(); ++d) {
    const std::int64_t c = op.cell_of(d);
    op.diag[d] = wsum[c] / area[c];
  }

  SolveRequest rq;
  rq.op = &op;
  rq.k = 1;
  rq.tol = tol;
  rq.mode = SolveMode::ShiftInvert;
  rq.sigma = -0.5;
  rq.max_iter = 600;
  return lowest_eigs(rq).eigenvalues[0];
}

// ============================================================
// Tube Hamiltonian and bracketing
// ============================================================

namespace {

struct PhaseTable {
  const LinkPhases* t = nullptr;       // null: zero phases
  std::array<int, 3> off{0, 0, 0};     // subgrid offset into the table grid
};

StencilOp3 build_tube_stencil(const Grid3& g,
                              const std::vector<std::uint8_t>& active,
                              const PhaseTable& ph,
                              const std::function<double(const Vec3&)>& lift,
                              bool forbid_potential, int threads, int quad_pts,
                              const char* who) {
  StencilOp3 op = active.empty() ? StencilOp3(g) : StencilOp3(g, active);
  const int n0 = g.n[0], n1 = g.n[1], n2 = g.n[2];
  auto is_active = [&](int i, int j, int k) {
    return active.empty() || active[g.index(i, j, k)] != 0;
  };

  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / (g.h(a) * g.h(a));
    const int e0 = a == 0, e1 = a == 1, e2 = a == 2;
    for (int i = 0; i < n0 - e0; ++i)
      for (int j = 0; j < n1 - e1; ++j)
        for (int k = 0; k < n2 - e2; ++k) {
          if (!is_active(i, j, k) || !is_active(i + e0, j + e1, k + e2))
            continue;
          double theta = 0.0;
          if (ph.t)
            theta = ph.t->theta[a][ph.t->link_index(
                a, i + ph.off[0], j + ph.off[1], k + ph.off[2])];
          op.hop[a][op.link_index(a, i, j, k)] =
              -std::polar(1.0, -theta) * inv;
        }
  }

  const std::int64_t nd = op.dim();
  parallel_for(nd, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t d = lo; d < hi; ++d) {
      int idx[3];
      g.unindex(op.cell_of(d), idx[0], idx[1], idx[2]);
      double dg = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double inv = 1.0 / (g.h(a) * g.h(a));
        const int e0 = a == 0, e1 = a == 1, e2 = a == 2;
        if (idx[a] > 0) {
          if (is_active(idx[0] - e0, idx[1] - e1, idx[2] - e2)) dg += inv;
        } else if (g.bc[a][0] == Bc::Dirichlet) {
          dg += 2.0 * inv;
        }
        if (idx[a] < g.n[a] - 1) {
          if (is_active(idx[0] + e0, idx[1] + e1, idx[2] + e2)) dg += inv;
        } else if (g.bc[a][1] == Bc::Dirichlet) {
          dg += 2.0 * inv;
        }
      }
      op.diag[d] = dg;
    }
  });

  if (lift) {
    std::vector<double> qx, qw;
    gauss_rule(quad_pts, qx, qw);
    const int q = quad_pts;
    std::vector<double> vals(nd);
    parallel_for(nd, threads, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t d = lo; d < hi; ++d) {
        int i, j, k;
        g.unindex(op.cell_of(d), i, j, k);
        const double cx = g.coord(0, i), cy = g.coord(1, j), cz = g.coord(2, k);
        double acc = 0.0;
        for (int a = 0; a < q; ++a)
          for (int b = 0; b < q; ++b)
            for (int c = 0; c < q; ++c)
              acc += qw[a] * qw[b] * qw[c] *
                     lift({cx + 0.5 * g.h(0) * qx[a], cy + 0.5 * g.h(1) * qx[b],
                           cz + 0.5 * g.h(2) * qx[c]});
        vals[d] = 0.125 * acc;
      }
    });
    if (forbid_potential) {
      double leak = 0.0;
      for (double v : vals) leak = std::max(leak, std::abs(v));
      if (leak > 0.0)
        throw std::runtime_error(
            std::string(who) +
            ": the potential must vanish identically on this piece (found " +
            fmt(leak) + ")");
    } else {
      for (std::int64_t d = 0; d < nd; ++d) op.diag[d] -= vals[d];
    }
  }

  op.set_threads(threads);
  return op;
}

void require_support_coverage(const Grid3& g, const MagneticField& field,
                              const char* who) {
  const double rho2 = field.support_radius();
  for (int a = 0; a < 3; ++a)
    if (g.lo[a] > -rho2 || g.hi[a] < rho2)
      throw std::invalid_argument(
          std::string(who) +
          ": grid box must contain the field support ball of radius " +
          fmt(rho2));
}

const LinkPhases* resolve_phases(const H3dOpts& opts, const Grid3& g,
                                 const MagneticField& field,
                                 GaugeAnchor anchor, LinkPhases& storage,
                                 const char* who) {
  if (opts.phases) {
    const Grid3& pg = opts.phases->grid;
    bool same = pg.n == g.n;
    for (int a = 0; a < 3 && same; ++a)
      same = std::abs(pg.lo[a] - g.lo[a]) <= 1e-9 * g.h(a) &&
             std::abs(pg.hi[a] - g.hi[a]) <= 1e-9 * g.h(a);
    if (!same)
      throw std::invalid_argument(
          std::string(who) + ": supplied phase table grid does not match");
    return opts.phases;
  }
  if (norm(field.spec().B0) == 0.0) return nullptr;
  GaugeField gauge(field, anchor);
  storage = compute_link_phases(gauge, g);
  return &storage;
}

int face_index(const Grid3& g, int axis, double c, const char* what) {
  const double t = (c - g.lo[axis]) / g.h(axis);
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::invalid_argument(
        std::string("bracketing_pieces: ") + what +
        " must lie on a cell face; nearest face offset is " + fmt(t - r) +
        " cells");
  const int k = int(r);
  if (k <= 0 || k >= g.n[axis])
    throw std::invalid_argument(std::string("bracketing_pieces: ") + what +
                                " must lie strictly inside the grid box");
  return k;
}

Grid3 subgrid(const Grid3& g, std::array<int, 2> I, std::array<int, 2> J,
              std::array<int, 2> K) {
  Grid3 s = g;
  const std::array<std::array<int, 2>, 3> r{I, J, K};
  for (int a = 0; a < 3; ++a) {
    s.lo[a] = g.lo[a] + r[a][0] * g.h(a);
    s.hi[a] = g.lo[a] + r[a][1] * g.h(a);
    s.n[a] = r[a][1] - r[a][0];
  }
  return s;
}

// Transverse extent of the tube across the axial window |x3| <= zcut,
// measured over the frame samples and the bounding circle of the section.
double required_half_width(const FrameField& f, const CrossSection& cs,
                           double zcut) {
  double req = cs.r_max;  // straight tails centered on the axis
  const int nth = 256;
  for (int i = 0; i < f.count(); ++i) {
    const Vec3& p = f.pos[i];
    if (std::abs(p.z()) <= zcut)
      req = std::max({req, std::abs(p.x()), std::abs(p.y())});
    if (std::abs(p.z()) > zcut + cs.r_max) continue;
    for (int t = 0; t < nth; ++t) {
      const double th = 2.0 * M_PI * t / nth;
      const Vec3 q = p - cs.r_max * (std::cos(th) * f.n[i] +
                                     std::sin(th) * f.b[i]);
      if (std::abs(q.z()) <= zcut)
        req = std::max({req, std::abs(q.x()), std::abs(q.y())});
    }
  }
  return req;
}

}  // namespace

StencilOp3 assemble_h3d(const FrameField& frame, const CrossSection& section,
                        const std::function<double(double, double)>& V,
                        const MagneticField& field, GaugeAnchor anchor,
                        const Grid3& grid, const H3dOpts& opts) {
  grid.validate();
  TubeReport tr = validate_tube(frame, section);
  if (!tr.ok())
    throw std::invalid_argument(
        "assemble_h3d: tube geometry failed validation: " + tr.summary());
  require_support_coverage(grid, field, "assemble_h3d");

  LinkPhases storage;
  const LinkPhases* table =
      resolve_phases(opts, grid, field, anchor, storage, "assemble_h3d");

  std::function<double(const Vec3&)> lift;
  if (V)
    lift = [&](const Vec3& x) { return lift_potential(frame, section, V, x); };

  StencilOp3 op = build_tube_stencil(grid, {}, {table, {0, 0, 0}}, lift,
                                     false, opts.threads, opts.quad_pts,
                                     "assemble_h3d");
  const double defect = hermiticity_defect(op, 2, 0x6d61677475623033ull);
  if (!(defect <= 1e-10))
    throw std::runtime_error(
        "assemble_h3d: Hermiticity self-check failed (defect " + fmt(defect) +
        ")");
  return op;
}

BracketingPieces bracketing_pieces(
    const FrameField& frame, const CrossSection& section,
    const std::function<double(double, double)>& V,
    const MagneticField& field, const Grid3& grid, double boxHalfWidth,
    const H3dOpts& opts) {
  grid.validate();
  TubeReport tr = validate_tube(frame, section);
  if (!tr.ok())
    throw std::invalid_argument(
        "bracketing_pieces: tube geometry failed validation: " + tr.summary());
  require_support_coverage(grid, field, "bracketing_pieces");
  const double s0 = field.spec().s0;
  if (std::abs(frame.s0 - s0) > 1e-12)
    throw std::invalid_argument(
        "bracketing_pieces: frame and field disagree on the geometric scale");
  const double zcut = 2.0 * s0;
  const double alpha = boxHalfWidth;
  if (!(alpha > 0.0))
    throw std::invalid_argument(
        "bracketing_pieces: inner square half width must be positive");

  const int k_lo = face_index(grid, 2, -zcut, "the axial cut at -2 s0");
  const int k_hi = face_index(grid, 2, zcut, "the axial cut at +2 s0");
  const int i_lo = face_index(grid, 0, -alpha, "the inner-square face at -alpha");
  const int i_hi = face_index(grid, 0, alpha, "the inner-square face at +alpha");
  const int j_lo = face_index(grid, 1, -alpha, "the inner-square face at -alpha");
  const int j_hi = face_index(grid, 1, alpha, "the inner-square face at +alpha");

  const double req = required_half_width(frame, section, zcut);
  if (alpha < req - 1e-12)
    throw std::invalid_argument(
        "bracketing_pieces: inner square half width " + fmt(alpha) +
        " is below the measured tube extent " + fmt(req) +
        " across the axial window");

  std::function<double(const Vec3&)> lift;
  if (V)
    lift = [&](const Vec3& x) { return lift_potential(frame, section, V, x); };

  LinkPhases storage;
  const LinkPhases* table = resolve_phases(opts, grid, field,
                                           GaugeAnchor::Upper, storage,
                                           "bracketing_pieces");

  // Upper piece: beyond +2 s0 the upper-anchored potential vanishes
  // identically, so its hops are real.
  Grid3 g1 = subgrid(grid, {0, grid.n[0]}, {0, grid.n[1]}, {k_hi, grid.n[2]});
  g1.bc[2][0] = Bc::Neumann;
  StencilOp3 h1 = build_tube_stencil(g1, {}, {}, lift, false, opts.threads,
                                     opts.quad_pts, "bracketing_pieces(h1)");

  // Lower piece, in the lower-anchored gauge.
  Grid3 g2 = subgrid(grid, {0, grid.n[0]}, {0, grid.n[1]}, {0, k_lo});
  g2.bc[2][1] = Bc::Neumann;
  StencilOp3 h2 = build_tube_stencil(g2, {}, {}, lift, false, opts.threads,
                                     opts.quad_pts, "bracketing_pieces(h2)");

  // Inner box: all-Neumann walls, true potential and true phases.
  Grid3 g31 = subgrid(grid, {i_lo, i_hi}, {j_lo, j_hi}, {k_lo, k_hi});
  g31.bc = {{{Bc::Neumann, Bc::Neumann},
             {Bc::Neumann, Bc::Neumann},
             {Bc::Neumann, Bc::Neumann}}};
  StencilOp3 h31 = build_tube_stencil(
      g31, {}, {table, {i_lo, j_lo, k_lo}}, lift, false, opts.threads,
      opts.quad_pts, "bracketing_pieces(h31)");

  // Slab outside the box: the potential must vanish there, which is checked
  // node by node while assembling.
  Grid3 g32 = subgrid(grid, {0, grid.n[0]}, {0, grid.n[1]}, {k_lo, k_hi});
  g32.bc[2][0] = Bc::Neumann;
  g32.bc[2][1] = Bc::Neumann;
  std::vector<std::uint8_t> mask(g32.size(), 1);
  for (int i = i_lo; i < i_hi; ++i)
    for (int j = j_lo; j < j_hi; ++j)
      for (int k = 0; k < g32.n[2]; ++k) mask[g32.index(i, j, k)] = 0;
  StencilOp3 h32 = build_tube_stencil(
      g32, mask, {table, {0, 0, k_lo}}, lift, true, opts.threads,
      opts.quad_pts, "bracketing_pieces(h32)");

  BracketingPieces out{std::move(h1), std::move(h2), std::move(h31),
                       std::move(h32), alpha, req};
  return out;
}

}  // namespace magtube
