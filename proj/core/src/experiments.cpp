#include "magtube/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

#include "magtube/eigsolve.hpp"

namespace magtube {

namespace {

using cd = std::complex<double>;

void require_transverse_match(const GroundState2D& gs, const Grid3& g3,
                              const char* who) {
  const Grid2& g2 = gs.grid;
  auto near = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a) + std::abs(b));
  };
  if (gs.f.size() != static_cast<std::size_t>(g2.size()))
    throw std::invalid_argument(std::string(who) +
                                ": ground state nodal array does not match its grid");
  if (g3.n[0] != g2.n[0] || g3.n[1] != g2.n[1] || !near(g3.lo[0], g2.lo[0]) ||
      !near(g3.hi[0], g2.hi[0]) || !near(g3.lo[1], g2.lo[1]) ||
      !near(g3.hi[1], g2.hi[1]))
    throw std::invalid_argument(
        std::string(who) +
        ": transverse grid does not match the planar ground state's");
}

// Least squares y = a x + b over the index range [lo, hi).
struct Line {
  double a = 0.0, b = 0.0;
};

Line ls_line(const std::vector<double>& x, const std::vector<double>& y,
             std::size_t lo, std::size_t hi) {
  const double n = double(hi - lo);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = lo; i < hi; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 0))
    throw std::invalid_argument("ls_line: degenerate abscissae");
  Line l;
  l.a = (n * sxy - sx * sy) / det;
  l.b = (sxx * sy - sx * sxy) / det;
  return l;
}

}  // namespace

// ============================================================
// Traveling quasi-modes along the straight tail
// ============================================================

double weyl_bump(double t) {
  if (t <= 1.0 || t >= 2.0) return 0.0;
  // peak value exp(-4) at t = 3/2 before scaling
  return std::exp(4.0 - 1.0 / (t - 1.0) - 1.0 / (2.0 - t));
}

WeylProbe weyl_probe(const GroundState2D& gs, double p, int k,
                     const Grid3& grid3) {
  grid3.validate();
  if (k < 1) throw std::invalid_argument("weyl_probe: k must be positive");
  require_transverse_match(gs, grid3, "weyl_probe");
  if (grid3.lo[2] > double(k) + 1e-12 || grid3.hi[2] < 2.0 * k - 1e-12) {
    std::ostringstream os;
    os << "weyl_probe: box too short, the axial extent [" << grid3.lo[2]
       << ", " << grid3.hi[2] << "] must contain the cutoff support (" << k
       << ", " << 2 * k << ")";
    throw std::invalid_argument(os.str());
  }

  // Axial factor g(z) = chi(z/k) e^{i p z} / sqrt(k); the probe is f x g.
  const int nz = grid3.n[2];
  const double h = grid3.h(2);
  const double scale = 1.0 / std::sqrt(double(k));
  std::vector<cd> g(nz);
  for (int j = 0; j < nz; ++j) {
    const double z = grid3.coord(2, j);
    g[j] = weyl_bump(z / k) * scale * std::polar(1.0, p * z);
  }

  // The planar factor is an eigenvector of its operator to solver precision,
  // so the planar part of the application reduces to multiplication by e and
  // the defect of H psi - (e + p^2) psi is carried by the axial factor alone:
  // (-D2 - p^2) g, with D2 the axial second difference and wall closures
  // taken from the grid (the cutoff vanishes identically near the walls).
  const double ih2 = 1.0 / (h * h);
  std::vector<cd> r(nz);
  for (int j = 0; j < nz; ++j) {
    cd acc = -p * p * g[j];
    if (j > 0)
      acc += (g[j] - g[j - 1]) * ih2;
    else if (grid3.bc[2][0] == Bc::Dirichlet)
      acc += 2.0 * g[j] * ih2;
    if (j + 1 < nz)
      acc += (g[j] - g[j + 1]) * ih2;
    else if (grid3.bc[2][1] == Bc::Dirichlet)
      acc += 2.0 * g[j] * ih2;
    r[j] = acc;
  }

  double g2 = 0.0, r2 = 0.0;
  for (int j = 0; j < nz; ++j) {
    g2 += std::norm(g[j]);
    r2 += std::norm(r[j]);
  }
  if (!(g2 > 0.0))
    throw std::invalid_argument(
        "weyl_probe: the cutoff support contains no grid nodes");

  double f2 = 0.0;
  for (double v : gs.f) f2 += v * v;
  f2 *= gs.grid.h(0) * gs.grid.h(1);

  WeylProbe probe;
  probe.p = p;
  probe.k = k;
  probe.grid = grid3;
  probe.norm = std::sqrt(f2 * g2 * h);
  probe.residual = std::sqrt(r2 / g2);
  return probe;
}

double weyl_residual(const GroundState2D& gs, double p, int k,
                     const Grid3& grid3) {
  return weyl_probe(gs, p, k, grid3).residual;
}

// ============================================================
// Planar edge calibration
// ============================================================

EdgeEstimate estimate_edge_error(const std::function<double(double, double)>& V,
                                 const Grid2& grid, const GroundOpts& opts) {
  auto lowest = [&](const Grid2& g) {
    Hv2D hv = assemble_hv(V, g);
    hv.op.set_threads(opts.threads);
    SolveRequest rq;
    rq.op = &hv.op;
    rq.k = 1;
    rq.tol = opts.tol;
    rq.max_iter = opts.max_iter;
    rq.mode = SolveMode::ShiftInvert;
    rq.seed = opts.seed;
    rq.keep_vectors = false;
    return lowest_eigs(rq).eigenvalues[0];
  };
  Grid2 fine = grid;
  fine.n[0] *= 2;
  fine.n[1] *= 2;
  EdgeEstimate est;
  est.e_h = lowest(grid);
  est.e_h2 = lowest(fine);
  est.error = (4.0 / 3.0) * std::abs(est.e_h - est.e_h2);
  return est;
}

// ============================================================
// Axial-field sweep
// ============================================================

SweepResult field_sweep(const FrameField& frame, const CrossSection& section,
                        const std::function<double(double, double)>& V,
                        const FieldSpec& fieldTemplate, const Grid3& grid,
                        const SweepConfig& cfg) {
  grid.validate();
  if (!V) throw std::invalid_argument("field_sweep: missing potential");
  if (cfg.b3.empty())
    throw std::invalid_argument("field_sweep: the field grid is empty");
  if (cfg.b3.front() != 0.0)
    throw std::invalid_argument("field_sweep: the field grid must start at 0");
  for (std::size_t i = 1; i < cfg.b3.size(); ++i)
    if (!(cfg.b3[i] > cfg.b3[i - 1]))
      throw std::invalid_argument(
          "field_sweep: the field grid must be strictly increasing");
  if (!(cfg.tol_gap > 0.0))
    throw std::invalid_argument("field_sweep: tol_gap must be positive");
  if (!std::isfinite(cfg.e))
    throw std::invalid_argument("field_sweep: the spectral edge is not finite");

  TubeReport tube = validate_tube(frame, section);
  if (!tube.ok())
    throw std::invalid_argument("field_sweep: tube geometry rejected: " +
                                tube.summary());
  if (!tube.confined) {
    std::ostringstream os;
    os << "field_sweep: the deformed core leaves the constant-field ball "
          "(confinement radius "
       << tube.confinement_radius << " exceeds s0 = " << frame.s0 << ")";
    throw std::invalid_argument(os.str());
  }

  // One zero-field assembly fixes the diagonal, the active set and the hop
  // topology; link phases are linear in the field, so a single unit-field
  // table turns each sample into a phase refresh instead of new quadrature.
  FieldSpec zero = fieldTemplate;
  zero.B0 = Vec3{0.0, 0.0, 0.0};
  H3dOpts ho;
  ho.threads = cfg.threads;
  StencilOp3 op = assemble_h3d(frame, section, V, make_field(zero),
                               GaugeAnchor::Upper, grid, ho);

  FieldSpec unit_spec = fieldTemplate;
  unit_spec.B0 = Vec3{0.0, 0.0, 1.0};
  GaugeField unit_gauge(make_field(unit_spec), GaugeAnchor::Upper);
  LinkPhases unit = compute_link_phases(unit_gauge, grid);
  for (int a = 0; a < 3; ++a)
    if (unit.theta[a].size() != op.hop[a].size())
      throw std::runtime_error("field_sweep: link table layout mismatch");

  const double sigma = op.spectral_lower_bound().value_or(0.0) - 1.0;
  const double edge = cfg.e - cfg.tol_gap;

  SweepResult out;
  out.b3 = cfg.b3;
  out.e = cfg.e;
  out.tol_gap = cfg.tol_gap;
  out.lambda_min.resize(cfg.b3.size(), 0.0);
  if (cfg.C > 0.0 && cfg.eps > 0.0) out.predicted_bound = 2.0 / (cfg.C * cfg.eps);
  if (cfg.planar)
    out.mismatch_integral = deformation_mismatch(frame, section, V,
                                                 *cfg.planar, grid);

  std::vector<cd> prev;
  for (std::size_t s = 0; s < cfg.b3.size(); ++s) {
    const double B = cfg.b3[s];
    for (int a = 0; a < 3; ++a) {
      const double ih2 = 1.0 / (grid.h(a) * grid.h(a));
      auto& hop = op.hop[a];
      const auto& theta = unit.theta[a];
      for (std::size_t l = 0; l < hop.size(); ++l)
        if (hop[l] != 0.0) hop[l] = -std::polar(ih2, -B * theta[l]);
    }

    SolveRequest rq;
    rq.op = &op;
    rq.k = 1;
    rq.tol = cfg.tol;
    rq.sigma = sigma;
    rq.max_iter = cfg.max_iter;
    rq.mode = SolveMode::ShiftInvert;
    if (cfg.warm_start && !prev.empty()) rq.warm_start = &prev;
    SpectrumReport rep = lowest_eigs(rq);
    out.lambda_min[s] = rep.eigenvalues[0];
    out.matvecs += rep.matvecs;
    if (cfg.warm_start && !rep.vectors.empty())
      prev = std::move(rep.vectors[0]);

    if (s == 0 && !(out.lambda_min[0] < edge)) {
      std::ostringstream os;
      os << "field_sweep: no initial bound state at this discretization "
            "(lambda_min(0) = "
         << out.lambda_min[0] << " is not below e - tol_gap = " << edge << ")";
      throw std::runtime_error(os.str());
    }
    if (!out.reached && out.lambda_min[s] >= edge) {
      out.reached = true;
      out.b_star = B;
    }
  }

  for (std::size_t s = 1; s < out.lambda_min.size(); ++s)
    if (out.lambda_min[s] <
        out.lambda_min[s - 1] - 10.0 * cfg.tol * (1.0 + std::abs(out.lambda_min[s - 1])))
      out.monotone = false;
  out.last_gap = edge - out.lambda_min.back();
  return out;
}

double deformation_mismatch(const FrameField& frame,
                            const CrossSection& section,
                            const std::function<double(double, double)>& V,
                            const GroundState2D& gs, const Grid3& grid) {
  grid.validate();
  if (!V) throw std::invalid_argument("deformation_mismatch: missing potential");
  require_transverse_match(gs, grid, "deformation_mismatch");
  // Integrate (lifted - straight-section) potential against f^2 over the
  // slab |x3| <= 2 s0; outside it the two coincide by construction.
  const double zcut = 2.0 * frame.s0;
  double acc = 0.0;
  for (int kk = 0; kk < grid.n[2]; ++kk) {
    const double z = grid.coord(2, kk);
    if (std::abs(z) > zcut) continue;
    for (int i = 0; i < grid.n[0]; ++i) {
      const double x = grid.coord(0, i);
      for (int j = 0; j < grid.n[1]; ++j) {
        const double y = grid.coord(1, j);
        const double lifted = lift_potential(frame, section, V, Vec3{x, y, z});
        const double straight = V(x, y);
        const double f = gs.f[gs.grid.index(i, j)];
        acc += (lifted - straight) * f * f;
      }
    }
  }
  return acc * grid.h(0) * grid.h(1) * grid.h(2);
}

// ============================================================
// Slope of the disk ground level and derived constants
// ============================================================

AlphaFit fit_alpha(const std::vector<double>& btilde,
                   const std::vector<std::vector<double>>& lambda1,
                   const std::vector<double>& r_values) {
  if (r_values.empty() || lambda1.size() != r_values.size())
    throw std::invalid_argument(
        "fit_alpha: one eigenvalue series per radius is required");
  if (btilde.size() < 2)
    throw std::invalid_argument("fit_alpha: need at least two field samples");
  for (std::size_t i = 0; i < btilde.size(); ++i)
    if (!(btilde[i] > 0.0) || (i > 0 && !(btilde[i] > btilde[i - 1])))
      throw std::invalid_argument(
          "fit_alpha: field samples must be positive and strictly increasing");
  for (const auto& lam : lambda1)
    if (lam.size() != btilde.size())
      throw std::invalid_argument(
          "fit_alpha: eigenvalue series length does not match the field grid");

  // Fitting window: the largest sampled decade.
  const double cut = btilde.back() / 10.0;
  std::size_t w0 = 0;
  while (w0 < btilde.size() && btilde[w0] < cut * (1.0 - 1e-12)) ++w0;
  const std::size_t nwin = btilde.size() - w0;
  if (nwin < 5) {
    std::ostringstream os;
    os << "fit_alpha: need at least five samples in the top decade, have "
       << nwin;
    throw std::invalid_argument(os.str());
  }
  const std::size_t mid = w0 + nwin / 2;

  AlphaFit fit;
  fit.r_values = r_values;
  fit.window_lo = btilde[w0];
  double drift = 0.0;
  for (const auto& lam : lambda1) {
    const Line full = ls_line(btilde, lam, w0, btilde.size());
    const Line lo = ls_line(btilde, lam, w0, mid);
    const Line hi = ls_line(btilde, lam, mid, btilde.size());
    fit.slopes.push_back(full.a);
    drift = std::max(drift, std::abs(hi.a - lo.a) /
                                std::max(std::abs(full.a), 1e-300));
    double wmin = lam[w0];
    for (std::size_t i = w0; i < lam.size(); ++i) wmin = std::min(wmin, lam[i]);
    fit.intercept_ratio =
        std::max(fit.intercept_ratio,
                 std::abs(full.b) / std::max(std::abs(wmin), 1e-300));
  }
  fit.drift = drift;
  if (drift > 0.10) {
    std::ostringstream os;
    os << "fit_alpha: asymptotic regime not reached (slope drift "
       << 100.0 * drift << "% between window halves)";
    throw std::runtime_error(os.str());
  }

  double sum = 0.0;
  for (double a : fit.slopes) sum += a;
  fit.slope = sum / double(fit.slopes.size());
  if (!(fit.slope > 0.0))
    throw std::runtime_error("fit_alpha: fitted slope is not positive");
  const auto [amin, amax] =
      std::minmax_element(fit.slopes.begin(), fit.slopes.end());
  fit.spread = (*amax - *amin) / fit.slope;

  for (std::size_t r = 0; r < lambda1.size(); ++r)
    for (std::size_t i = w0; i < btilde.size(); ++i)
      if (lambda1[r][i] < 0.5 * fit.slope * btilde[i]) fit.half_slope_ok = false;
  return fit;
}

Theorem2Constants theorem2_constants(const GroundState2D& gs,
                                     double alphaSlope) {
  if (!(gs.beta_f > 0.0))
    throw std::invalid_argument(
        "theorem2_constants: beta_f must be positive (a nonpositive value "
        "signals a discretization artifact)");
  if (!(gs.f_inf > 0.0))
    throw std::invalid_argument(
        "theorem2_constants: the ground-state maximum must be positive");
  if (!(alphaSlope > 0.0))
    throw std::invalid_argument("theorem2_constants: the slope must be positive");
  Theorem2Constants c;
  c.beta_f = gs.beta_f;
  c.f_inf = gs.f_inf;
  c.alpha_slope = alphaSlope;
  c.C = alphaSlope * gs.beta_f / (2.0 * gs.f_inf * gs.f_inf);
  return c;
}

double sufficient_field(const Theorem2Constants& c, double eps) {
  if (!(c.C > 0.0))
    throw std::invalid_argument("sufficient_field: constants are not initialized");
  if (!(eps > 0.0))
    throw std::invalid_argument("sufficient_field: eps must be positive");
  return 2.0 / (c.C * eps);
}

bool check_assumption2(const std::function<double(double, double)>& V,
                       const Grid2& sample_grid, double C, double b30,
                       double* oscillation) {
  if (!V) throw std::invalid_argument("check_assumption2: missing potential");
  sample_grid.validate();
  if (!(C >= 0.0) || !(b30 >= 0.0))
    throw std::invalid_argument(
        "check_assumption2: C and the axial field must be nonnegative");
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (int i = 0; i < sample_grid.n[0]; ++i)
    for (int j = 0; j < sample_grid.n[1]; ++j) {
      const double v = V(sample_grid.coord(0, i), sample_grid.coord(1, j));
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  const double osc = vmax - vmin;
  if (oscillation) *oscillation = osc;
  return osc <= C * b30;
}

}  // namespace magtube
