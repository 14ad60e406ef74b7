// Independent reference values used by the tests. Everything here is
// computed from closed forms or from one-dimensional reductions solved by
// elementary means, deliberately sharing no code with the library under
// test.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

// ------------------------------------------------------------
// Closed-form eigenvalues of the 1D second-difference operator on a
// cell-centered grid of n cells over an interval of length L, h = L/n.
//
// Dirichlet walls (ghost reflection psi_{-1} = -psi_0):
//   lambda_k = (4/h^2) sin^2(k pi h / (2L)),  k = 1..n,
// with eigenvector sin(k pi x_i / L) at x_i = (i + 1/2) h.
// Neumann walls (ghost copy psi_{-1} = psi_0): same formula, k = 0..n-1,
// eigenvector cos(k pi x_i / L).
// ------------------------------------------------------------
inline double laplace1d_dirichlet(double L, int n, int k) {
  if (k < 1 || k > n) throw std::invalid_argument("k out of range");
  double h = L / n;
  double s = std::sin(k * M_PI * h / (2.0 * L));
  return 4.0 / (h * h) * s * s;
}

inline double laplace1d_neumann(double L, int n, int k) {
  if (k < 0 || k > n - 1) throw std::invalid_argument("k out of range");
  double h = L / n;
  double s = std::sin(k * M_PI * h / (2.0 * L));
  return 4.0 / (h * h) * s * s;
}

// Lowest eigenvalue of the 2D/3D discrete Dirichlet Laplacian on a box is
// the sum of the per-axis k=1 values.
inline double laplace_box_lowest(const std::vector<double>& L,
                                 const std::vector<int>& n) {
  double s = 0.0;
  for (std::size_t a = 0; a < L.size(); ++a)
    s += laplace1d_dirichlet(L[a], n[a], 1);
  return s;
}

// ------------------------------------------------------------
// Ground energy of -Laplace - V0*1{r<a} in the plane, by radial matching.
//
// The ground state is radial: f = J0(k r) inside (k^2 = V0 + E) and
// f = c K0(kappa r) outside (kappa^2 = -E); continuity of f'/f at r = a
// gives
//   k J1(k a) / J0(k a) = kappa K1(kappa a) / K0(kappa a),
// solved by bisection in E on (-V0, 0). The left side blows up at the
// first zero of J0, so the ground-state branch is k a < j_{0,1}; the
// matching function is increasing in E on that branch.
// ------------------------------------------------------------
inline double circular_well_ground(double V0, double a, double tol = 1e-12) {
  auto match = [&](double E) {
    double k = std::sqrt(V0 + E);
    double kap = std::sqrt(-E);
    double lhs = k * std::cyl_bessel_j(1, k * a) / std::cyl_bessel_j(0, k * a);
    double rhs =
        kap * std::cyl_bessel_k(1, kap * a) / std::cyl_bessel_k(0, kap * a);
    return lhs - rhs;
  };
  // Bracket inside the nodeless branch: k a < j_{0,1} ~= 2.404826. Near
  // E -> -V0 the left side -> 0 and the right side is positive, so the
  // matching function starts negative and crosses zero once.
  double j01 = 2.404825557695773;
  double eps = 1e-9 * V0;
  double elo = -V0 + eps;
  double ehi = -eps;
  double kcap = j01 / a;
  if (V0 > kcap * kcap) ehi = std::min(ehi, kcap * kcap - V0 - eps);
  if (!(match(elo) < 0.0))
    throw std::runtime_error("well matching: no sign change (well too weak?)");
  if (!(match(ehi) > 0.0))
    throw std::runtime_error("well matching: bracket end not positive");
  for (int it = 0; it < 200 && ehi - elo > tol; ++it) {
    double mid = 0.5 * (elo + ehi);
    (match(mid) < 0.0 ? elo : ehi) = mid;
  }
  return 0.5 * (elo + ehi);
}

// Radial ground-state profile of the same problem, for pointwise checks.
inline double circular_well_profile(double V0, double a, double E, double r) {
  double k = std::sqrt(V0 + E);
  double kap = std::sqrt(-E);
  if (r < a) return std::cyl_bessel_j(0, k * r);
  double c = std::cyl_bessel_j(0, k * a) / std::cyl_bessel_k(0, kap * a);
  return c * std::cyl_bessel_k(0, kap * r);
}

// ------------------------------------------------------------
// Weak-field expansion of the lowest Neumann eigenvalue of the magnetic
// Laplacian on a disk of radius R (symmetric gauge, m = 0 fiber):
//   lambda_1(Btilde, R) = Btilde^2 R^2 / 8 + O(Btilde^4),
// from first-order perturbation of the constant ground state by the
// potential (Btilde r / 2)^2 with the radial measure r dr:
//   <(Btilde r/2)^2> = (2/R^2) int_0^R (Btilde^2 r^2/4) r dr = Btilde^2 R^2/8.
// ------------------------------------------------------------
inline double disk_weak_field(double Btilde, double R) {
  return Btilde * Btilde * R * R / 8.0;
}

// ------------------------------------------------------------
// Constant curvature gamma and torsion tau integrate to a circular helix.
// With arclength s from 0, initial point p0, tangent t0, normal n0:
//   omega = sqrt(gamma^2 + tau^2),
//   t(s) = (tau^2 + gamma^2 cos(omega s)) / omega^2 * t0
//        + (gamma sin(omega s)) / omega * n0
//        + (gamma tau (1 - cos(omega s))) / omega^2 * b0,
// and the position is the s-integral of t. Returned as the coefficients
// of (t0, n0, b0) so the caller can form vectors in any frame.
// ------------------------------------------------------------
struct HelixCoeffs {
  double ct, cn, cb;  // tangent components
  double pt, pn, pb;  // position components (integral of the tangent)
};

inline HelixCoeffs helix_closed_form(double gamma, double tau, double s) {
  double w2 = gamma * gamma + tau * tau;
  double w = std::sqrt(w2);
  double c = std::cos(w * s), sn = std::sin(w * s);
  HelixCoeffs out;
  out.ct = (tau * tau + gamma * gamma * c) / w2;
  out.cn = gamma * sn / w;
  out.cb = gamma * tau * (1.0 - c) / w2;
  out.pt = (tau * tau * s + gamma * gamma * sn / w) / w2;
  out.pn = gamma * (1.0 - c) / w2;
  out.pb = gamma * tau * (s - sn / w) / w2;
  return out;
}

}  // namespace oracle
