#include "magtube/eigsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "magtube/rng.hpp"

namespace magtube {

namespace {

using cd = std::complex<double>;
using vec = std::vector<cd>;

cd dot(const vec& a, const vec& b) {
  cd s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::conj(a[i]) * b[i];
  return s;
}

double re_dot(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::real(std::conj(a[i]) * b[i]);
  return s;
}

double nrm2(const vec& a) {
  double s = 0.0;
  for (const cd& v : a) s += std::norm(v);
  return std::sqrt(s);
}

void axpy(cd alpha, const vec& x, vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

vec start_vector(std::int64_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  vec v(n);
  for (auto& z : v)
    z = cd(rng.uniform() - 0.5, rng.uniform() - 0.5);
  double nn = nrm2(v);
  for (auto& z : v) z /= nn;
  return v;
}

// ------------------------------------------------------------
// Inner solver: preconditioned conjugate gradients on (Op - sigma),
// Jacobi-preconditioned by the shifted diagonal. Sets `indefinite` when a
// curvature <p, (Op-sigma) p> <= 0 shows the shift is not below the
// spectrum.
// ------------------------------------------------------------
struct ShiftedSolver {
  const HermitianOperator* op = nullptr;
  double sigma = 0.0;
  double rel_tol = 1e-10;
  int max_it = 4000;
  std::vector<double> inv_prec;  // 1 / (diag - sigma), empty for identity
  std::int64_t matvecs = 0;
  bool indefinite = false;

  void setup() {
    inv_prec.clear();
    if (const std::vector<double>* d = op->diagonal()) {
      inv_prec.resize(d->size());
      for (std::size_t i = 0; i < d->size(); ++i) {
        double m = (*d)[i] - sigma;
        // A Hermitian diagonal dominates the lowest eigenvalue, so m > 0
        // whenever sigma is admissible; clip defensively all the same.
        inv_prec[i] = 1.0 / std::max(m, 1e-30);
      }
    }
  }

  // y = (Op - sigma)^{-1} b, y overwritten. Returns false on breakdown.
  bool solve(const vec& b, vec& y, vec& r, vec& z, vec& p, vec& ap) {
    std::int64_t n = op->dim();
    y.assign(n, 0.0);
    r = b;
    z.resize(n);
    precondition(r, z);
    p = z;
    double rz = re_dot(r, z);
    double bn = nrm2(b);
    if (bn == 0.0) return true;
    for (int it = 0; it < max_it; ++it) {
      op->apply(p.data(), ap.data());
      ++matvecs;
      for (std::int64_t i = 0; i < n; ++i) ap[i] -= sigma * p[i];
      double pap = re_dot(p, ap);
      if (!(pap > 0.0)) {
        indefinite = true;
        return false;
      }
      double alpha = rz / pap;
      for (std::int64_t i = 0; i < n; ++i) {
        y[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      if (nrm2(r) <= rel_tol * bn) return true;
      precondition(r, z);
      double rz_new = re_dot(r, z);
      double beta = rz_new / rz;
      rz = rz_new;
      for (std::int64_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    // Out of budget without indefiniteness: accept the attained iterate.
    // The outer loop judges convergence by explicitly recomputed residuals
    // of the original operator, so an inexact inner solve only slows it.
    return true;
  }

  void precondition(const vec& r, vec& z) {
    if (inv_prec.empty()) {
      z = r;
    } else {
      for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] * inv_prec[i];
    }
  }
};

struct RitzPair {
  double theta = 0.0;   // eigenvalue of the projected operator
  double lambda = 0.0;  // mapped eigenvalue of the original operator
  double est = 0.0;     // residual estimate in the projected problem
  Eigen::VectorXcd coeff;
};

std::string ritz_summary(const std::vector<RitzPair>& pairs) {
  std::ostringstream os;
  os.precision(12);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) os << ", ";
    os << pairs[i].lambda << " (est " << pairs[i].est << ")";
  }
  return os.str();
}

}  // namespace

SpectrumReport lowest_eigs(const SolveRequest& req) {
  if (!req.op) throw std::invalid_argument("lowest_eigs: null operator");
  if (req.k < 1) throw std::invalid_argument("lowest_eigs: k must be >= 1");
  if (!(req.tol > 0.0))
    throw std::invalid_argument("lowest_eigs: tol must be positive");
  const HermitianOperator& op = *req.op;
  std::int64_t n = op.dim();
  if (req.k > n)
    throw std::invalid_argument("lowest_eigs: k exceeds the dimension");

  const bool shift_invert = req.mode == SolveMode::ShiftInvert;
  double sigma = 0.0;
  if (shift_invert) {
    if (req.sigma) {
      sigma = *req.sigma;
    } else if (std::optional<double> lb = op.spectral_lower_bound()) {
      sigma = *lb - 1.0;
    } else {
      throw std::invalid_argument(
          "lowest_eigs: shift-invert needs sigma or an operator lower bound");
    }
  }

  int max_basis = req.max_basis > 0 ? req.max_basis
                                    : std::max(2 * req.k + 16, 36);
  max_basis = static_cast<int>(std::min<std::int64_t>(max_basis, n));
  if (max_basis < req.k + 2)
    max_basis = static_cast<int>(std::min<std::int64_t>(req.k + 2, n));

  SpectrumReport rep;
  rep.seed = req.seed;
  rep.op_info = op.describe();

  ShiftedSolver inner;
  inner.op = &op;
  inner.rel_tol = std::max(0.01 * req.tol, 1e-14);

  vec scratch_r, scratch_z, scratch_p, scratch_ap(n);

  for (int attempt = 0;; ++attempt) {
    if (shift_invert) {
      inner.sigma = sigma;
      inner.indefinite = false;
      inner.setup();
    }
    rep.sigma_used = shift_invert
                         ? sigma
                         : std::numeric_limits<double>::quiet_NaN();

    // y = A x with A the iterated operator (Op itself or its shifted
    // inverse); false return means the shift must be nudged.
    auto iterate = [&](const vec& x, vec& y) -> bool {
      if (shift_invert)
        return inner.solve(x, y, scratch_r, scratch_z, scratch_p, scratch_ap);
      y.resize(n);
      op.apply(x.data(), y.data());
      ++rep.matvecs;
      return true;
    };

    std::vector<vec> basis;
    basis.reserve(max_basis + 1);
    if (req.warm_start && !req.warm_start->empty()) {
      if (std::int64_t(req.warm_start->size()) != n)
        throw std::invalid_argument("lowest_eigs: warm start size mismatch");
      vec v = *req.warm_start;
      double nn = nrm2(v);
      if (!(nn > 0.0))
        throw std::invalid_argument("lowest_eigs: warm start is zero");
      for (auto& z : v) z /= nn;
      basis.push_back(std::move(v));
    } else {
      basis.push_back(start_vector(n, req.seed));
    }

    // Projection matrix T = Q^H A Q, kept dense and Hermitian; columns are
    // filled as basis vectors are processed, restarts reset it to the
    // diagonal of locked Ritz values.
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(max_basis + 1, max_basis + 1);
    bool nudge = false;
    std::vector<RitzPair> pairs;

    vec w;
    int col = 0;  // next column of T to fill = index of vector to process
    for (int step = 0; step < req.max_iter && !nudge; ++step) {
      rep.iterations = step + 1;
      if (!iterate(basis[col], w)) {
        nudge = true;
        break;
      }
      // Full (two-pass) orthogonalization against the whole basis.
      int m = static_cast<int>(basis.size());
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < m; ++i) {
          cd h = dot(basis[i], w);
          axpy(-h, basis[i], w);
          if (pass == 0) T(i, col) = h;
        }
      }
      for (int i = 0; i < m; ++i) T(col, i) = std::conj(T(i, col));
      double beta = nrm2(w);

      // Rayleigh-Ritz on the filled block.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          T.topLeftCorner(m, m));
      pairs.clear();
      for (int j = 0; j < m; ++j) {
        // Ascending by theta; shift-invert wants the largest thetas.
        int idx = shift_invert ? m - 1 - j : j;
        RitzPair p;
        p.theta = es.eigenvalues()(idx);
        p.coeff = es.eigenvectors().col(idx);
        p.lambda = shift_invert ? sigma + 1.0 / p.theta : p.theta;
        p.est = beta * std::abs(p.coeff(m - 1));
        pairs.push_back(std::move(p));
        if (int(pairs.size()) == req.k) break;
      }
      std::sort(pairs.begin(), pairs.end(),
                [](const RitzPair& a, const RitzPair& b) {
                  return a.lambda < b.lambda;
                });

      bool est_ok = int(pairs.size()) == req.k && m >= req.k;
      for (const RitzPair& p : pairs) {
        double scale = shift_invert ? std::abs(p.theta) : 1.0 + std::abs(p.lambda);
        if (!(p.est <= req.tol * scale)) est_ok = false;
      }

      if (est_ok) {
        // Candidate vectors; accept on explicitly recomputed residuals.
        std::vector<vec> xs(pairs.size());
        std::vector<double> res(pairs.size());
        bool all_ok = true;
        for (std::size_t j = 0; j < pairs.size(); ++j) {
          vec x(n, 0.0);
          for (int i = 0; i < m; ++i) axpy(pairs[j].coeff(i), basis[i], x);
          double nn = nrm2(x);
          for (auto& z : x) z /= nn;
          vec ox(n);
          op.apply(x.data(), ox.data());
          ++rep.matvecs;
          double lam = re_dot(x, ox);
          double rr = 0.0;
          for (std::int64_t i = 0; i < n; ++i)
            rr += std::norm(ox[i] - lam * x[i]);
          rr = std::sqrt(rr) / (1.0 + std::abs(lam));
          pairs[j].lambda = lam;
          res[j] = rr;
          xs[j] = std::move(x);
          if (!(rr <= req.tol)) all_ok = false;
        }
        if (all_ok) {
          rep.matvecs += inner.matvecs;
          inner.matvecs = 0;
          std::vector<std::size_t> order(pairs.size());
          for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
          std::sort(order.begin(), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return pairs[a].lambda < pairs[b].lambda;
                    });
          for (std::size_t j : order) {
            rep.eigenvalues.push_back(pairs[j].lambda);
            rep.residuals.push_back(res[j]);
            if (req.keep_vectors) rep.vectors.push_back(std::move(xs[j]));
          }
          rep.shift_retries = attempt;
          return rep;
        }
      }

      if (!(beta > 0.0)) {
        // Invariant subspace found; deflate by a fresh deterministic
        // direction orthogonal to the basis.
        w = start_vector(n, req.seed + 0x9e3779b97f4a7c15ull * (step + 1));
        for (int pass = 0; pass < 2; ++pass)
          for (auto& q : basis) axpy(-dot(q, w), q, w);
        beta = nrm2(w);
        if (!(beta > 0.0)) break;  // space exhausted; handled below
      }
      for (auto& z : w) z /= beta;
      basis.push_back(std::move(w));
      w = vec();
      col = m;

      // Thick restart: compress to the best Ritz vectors plus the fresh
      // direction, reset T to the locked diagonal.
      if (int(basis.size()) > max_basis) {
        int keep = std::min(req.k + 8, max_basis - 4);
        keep = std::max(keep, req.k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> esr(
            T.topLeftCorner(col, col));
        std::vector<vec> nb;
        nb.reserve(keep + 1);
        for (int j = 0; j < keep; ++j) {
          int idx = shift_invert ? col - 1 - j : j;
          vec y(n, 0.0);
          for (int i = 0; i < col; ++i)
            axpy(esr.eigenvectors()(i, idx), basis[i], y);
          nb.push_back(std::move(y));
        }
        T.setZero();
        for (int j = 0; j < keep; ++j) {
          int idx = shift_invert ? col - 1 - j : j;
          T(j, j) = esr.eigenvalues()(idx);
        }
        nb.push_back(std::move(basis.back()));  // the fresh direction
        basis = std::move(nb);
        col = keep;
      }
    }

    rep.matvecs += inner.matvecs;
    inner.matvecs = 0;

    if (nudge) {
      if (attempt >= 3)
        throw std::runtime_error(
            "lowest_eigs: shift still inside the spectrum after 3 nudges "
            "(last sigma " +
            std::to_string(sigma) + ")");
      // Step down geometrically so a few retries clear a badly placed
      // initial shift.
      sigma -= std::max(1.0, 0.05 * std::abs(sigma)) *
               std::pow(2.0, attempt);
      continue;
    }

    throw std::runtime_error(
        "lowest_eigs: iteration budget exhausted; best Ritz values: " +
        ritz_summary(pairs));
  }
}

SpectrumReport dense_fallback(const HermitianOperator& op, int keep_vectors) {
  std::int64_t n = op.dim();
  if (n > 3000)
    throw std::runtime_error(
        "dense_fallback: refusing dimension " + std::to_string(n) +
        " > 3000");
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  SpectrumReport rep;
  rep.op_info = op.describe();
  if (std::optional<Csr> csr = op.to_csr()) {
    for (std::int64_t i = 0; i < csr->n; ++i)
      for (std::int64_t p = csr->row_ptr[i]; p < csr->row_ptr[i + 1]; ++p)
        A(i, csr->col[p]) = csr->val[p];
  } else {
    vec e(n, 0.0), col(n);
    for (std::int64_t j = 0; j < n; ++j) {
      e[j] = 1.0;
      op.apply(e.data(), col.data());
      ++rep.matvecs;
      for (std::int64_t i = 0; i < n; ++i) A(i, j) = col[i];
      e[j] = 0.0;
    }
  }
  // Symmetrize rounding noise so the decomposition sees an exactly
  // Hermitian matrix.
  A = 0.5 * (A + A.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
  rep.eigenvalues.assign(es.eigenvalues().data(),
                         es.eigenvalues().data() + n);
  int keep = std::min<std::int64_t>(std::max(keep_vectors, 0), n);
  vec x(n), ox(n);
  for (int j = 0; j < keep; ++j) {
    for (std::int64_t i = 0; i < n; ++i) x[i] = es.eigenvectors()(i, j);
    op.apply(x.data(), ox.data());
    ++rep.matvecs;
    double lam = rep.eigenvalues[j];
    double rr = 0.0;
    for (std::int64_t i = 0; i < n; ++i) rr += std::norm(ox[i] - lam * x[i]);
    rep.residuals.push_back(std::sqrt(rr) / (1.0 + std::abs(lam)));
    rep.vectors.push_back(x);
  }
  return rep;
}

// ============================================================
// Symmetric tridiagonal, Sturm bisection
// ============================================================

int tridiag_count_below(const std::vector<double>& diag,
                        const std::vector<double>& off, double x) {
  if (off.size() + 1 != diag.size() && !(diag.size() == 1 && off.empty()))
    throw std::invalid_argument("tridiag: off must have n-1 entries");
  int count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    double num = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    d = diag[i] - x - num / d;
    if (d == 0.0) d = 1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

std::vector<double> tridiag_lowest(const std::vector<double>& diag,
                                   const std::vector<double>& off, int k) {
  int n = static_cast<int>(diag.size());
  if (k < 1 || k > n) throw std::invalid_argument("tridiag_lowest: bad k");
  double lo = diag[0], hi = diag[0];
  for (int i = 0; i < n; ++i) {
    double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) +
               (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  std::vector<double> out(k);
  for (int j = 1; j <= k; ++j) {
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-15 * (std::abs(a) + std::abs(b) +
                                                  1e-30);
         ++it) {
      double mid = 0.5 * (a + b);
      if (tridiag_count_below(diag, off, mid) >= j)
        b = mid;
      else
        a = mid;
    }
    out[j - 1] = 0.5 * (a + b);
  }
  return out;
}

}  // namespace magtube
