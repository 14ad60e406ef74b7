#include "magtube/fields.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace magtube {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

// The integrands below are smooth except on the cutoff shells rho = rho1 and
// rho = rho2, where the blend polynomial joins the constant pieces with only
// two continuous derivatives. Splitting the integration interval at the
// shell crossings keeps the adaptive rule on smooth pieces, where it
// converges in one or two levels instead of bisecting toward the kink.
struct Kinks {
  std::array<double, 26> p{};
  int n = 0;

  void add(double v) {
    if (n < int(p.size())) p[n++] = v;
  }
  // Both crossings +-sqrt(c2) of a shell along a symmetric coordinate.
  void add_shell(double c2) {
    if (c2 > 0.0) {
      double q = std::sqrt(c2);
      add(-q);
      add(q);
    }
  }
};

template <typename F>
double split_quad(const F& f, double a, double b, const Kinks& k, int depth,
                  double tol, double* err = nullptr) {
  if (!(b > a)) return 0.0;
  std::array<double, 28> cut;
  int m = 0;
  cut[m++] = a;
  std::array<double, 26> in;
  int ni = 0;
  for (int i = 0; i < k.n; ++i)
    if (k.p[i] > a + 1e-14 && k.p[i] < b - 1e-14) in[ni++] = k.p[i];
  std::sort(in.begin(), in.begin() + ni);
  for (int i = 0; i < ni; ++i)
    if (in[i] > cut[m - 1] + 1e-13) cut[m++] = in[i];
  cut[m++] = b;
  double total = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    double e = 0.0;
    total += GK::integrate(f, cut[i], cut[i + 1], depth, tol, &e);
    if (err) *err += e;
  }
  return total;
}

// Signed integral over [0, x2] clipped to |t2| <= c.
template <typename F>
double signed_chord_integral(const F& f, double x2, double c, const Kinks& k,
                             int depth, double tol, double* err = nullptr) {
  if (c <= 0.0) return 0.0;
  if (x2 >= 0.0)
    return split_quad(f, 0.0, std::min(x2, c), k, depth, tol, err);
  return -split_quad(f, std::max(x2, -c), 0.0, k, depth, tol, err);
}

// Error-estimate budget: estimates are accumulated per evaluation (or per
// lattice sweep) and compared against a ceiling scaled to the natural size
// of the integrals, |B0| s0^2.
double quad_error_scale(const MagneticField& f) {
  return 1.0 + norm(f.spec().B0) * f.spec().s0 * f.spec().s0;
}

void check_quad(double attained, const QuadratureBudget& b,
                const MagneticField& f, const char* what) {
  if (attained > b.error_ceiling * quad_error_scale(f)) {
    std::ostringstream os;
    os << what << ": quadrature failed to converge; attained error estimate "
       << std::scientific << std::setprecision(3) << attained;
    throw std::runtime_error(os.str());
  }
}

}  // namespace

// ============================================================
// Cutoff
// ============================================================

double CutoffProfile::chi(double rho) const {
  if (rho <= rho1) return 1.0;
  if (rho >= rho2) return 0.0;
  double t = (rho - rho1) / (rho2 - rho1);
  double t5 = t * t * t * t * t;
  return 1.0 -
         t5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))));
}

double CutoffProfile::dchi(double rho) const {
  if (rho <= rho1 || rho >= rho2) return 0.0;
  double w = rho2 - rho1;
  double t = (rho - rho1) / w;
  double a = t * (1.0 - t);
  return -630.0 * a * a * a * a / w;
}

double CutoffProfile::d2chi(double rho) const {
  if (rho <= rho1 || rho >= rho2) return 0.0;
  double w = rho2 - rho1;
  double t = (rho - rho1) / w;
  double a = t * (1.0 - t);
  return -2520.0 * a * a * a * (1.0 - 2.0 * t) / (w * w);
}

// ============================================================
// Field
// ============================================================

MagneticField::MagneticField(const FieldSpec& spec) : spec_(spec) {
  if (!(spec_.s0 > 0.0)) throw std::invalid_argument("s0 must be positive");
  cut_.rho1 = (spec_.rho1 > 0.0) ? spec_.rho1 : 1.05 * spec_.s0;
  cut_.rho2 = (spec_.rho2 > 0.0) ? spec_.rho2 : 1.95 * spec_.s0;
  if (!(cut_.rho2 > cut_.rho1))
    throw std::invalid_argument("cutoff needs rho2 > rho1");
  if (!(cut_.rho1 > spec_.s0))
    throw std::invalid_argument(
        "cutoff must keep the field constant strictly beyond radius s0");
  if (!(cut_.rho2 < 2.0 * spec_.s0))
    throw std::invalid_argument(
        "cutoff must vanish strictly inside radius 2*s0");
}

MagneticField make_field(const FieldSpec& spec) { return MagneticField(spec); }

Vec3 MagneticField::B(const Vec3& x) const {
  double rho = norm(x);
  const Vec3& b0 = spec_.B0;
  if (rho <= cut_.rho1) return b0;
  if (rho >= cut_.rho2) return {0.0, 0.0, 0.0};
  double c = cut_.chi(rho);
  double dc = cut_.dchi(rho);
  double p = dot(b0, x);
  // rot(chi * B0 x x / 2) = chi B0 + (chi'/(2 rho)) (rho^2 B0 - <B0,x> x)
  return c * b0 + (dc / (2.0 * rho)) * (rho * rho * b0 - p * x);
}

double MagneticField::dB1_dx1(const Vec3& x) const {
  double rho = norm(x);
  if (rho <= cut_.rho1 || rho >= cut_.rho2) return 0.0;
  double dc = cut_.dchi(rho);
  double d2c = cut_.d2chi(rho);
  double b1 = spec_.B0.x();
  double p = dot(spec_.B0, x);
  double x1 = x.x();
  return (dc / rho) * x1 * b1 + 0.5 * d2c * x1 * b1 -
         (d2c * rho - dc) * x1 * x1 * p / (2.0 * rho * rho * rho) -
         (dc / (2.0 * rho)) * p;
}

// ============================================================
// Gauge
// ============================================================

GaugeField::GaugeField(const MagneticField& field, GaugeAnchor anchor,
                       QuadratureBudget budget)
    : field_(field), anchor_(anchor), budget_(budget) {}

GaugeField landau_gauge(const MagneticField& field) {
  return GaugeField(field, GaugeAnchor::Upper);
}

GaugeField mirror_gauge(const MagneticField& field) {
  return GaugeField(field, GaugeAnchor::Lower);
}

// Integrand of the axial integral defining A1:
//   G(x1, x2, t3) = B2(x1, x2, t3) + int_0^{x2} dB1/dx1(x1, t2, t3) dt2.
double GaugeField::column_G(double x1, double x2, double t3) const {
  double b2 = field_.B({x1, x2, t3}).y();
  double r1 = field_.cutoff().rho1, r2 = field_.cutoff().rho2;
  double c2 = r2 * r2 - x1 * x1 - t3 * t3;
  double inner = 0.0;
  if (c2 > 0.0) {
    Kinks k;
    k.add_shell(r1 * r1 - x1 * x1 - t3 * t3);
    double c = std::sqrt(c2);
    inner = signed_chord_integral(
        [&](double t2) { return field_.dB1_dx1({x1, t2, t3}); }, x2, c, k,
        budget_.max_depth, budget_.inner_rel_tol);
  }
  return b2 + inner;
}

// Kinks of t3 -> G(x1, x2, t3): shell crossings of the chord endpoints
// t2 = 0 and t2 = x2.
static Kinks column_kinks(double r1, double r2, double x1, double x2) {
  Kinks k;
  for (double r : {r1, r2}) {
    k.add_shell(r * r - x1 * x1);
    k.add_shell(r * r - x1 * x1 - x2 * x2);
  }
  return k;
}

double GaugeField::A1(const Vec3& x) const {
  double r1 = field_.cutoff().rho1, r2 = field_.cutoff().rho2;
  double q2 = r2 * r2 - x.x() * x.x();
  if (q2 <= 0.0) return 0.0;
  double q = std::sqrt(q2);
  Kinks k = column_kinks(r1, r2, x.x(), x.y());
  auto G = [&](double t3) { return column_G(x.x(), x.y(), t3); };
  double err = 0.0, val = 0.0;
  if (anchor_ == GaugeAnchor::Upper) {
    if (x.z() >= q) return 0.0;
    val = -split_quad(G, std::max(x.z(), -q), q, k, budget_.max_depth,
                      budget_.rel_tol, &err);
  } else {
    if (x.z() <= -q) return 0.0;
    val = split_quad(G, -q, std::min(x.z(), q), k, budget_.max_depth,
                     budget_.rel_tol, &err);
  }
  check_quad(err, budget_, field_, "A1");
  return val;
}

double GaugeField::A3(const Vec3& x) const {
  double r1 = field_.cutoff().rho1, r2 = field_.cutoff().rho2;
  double c2 = r2 * r2 - x.x() * x.x() - x.z() * x.z();
  if (c2 <= 0.0) return 0.0;
  Kinks k;
  k.add_shell(r1 * r1 - x.x() * x.x() - x.z() * x.z());
  double c = std::sqrt(c2);
  double err = 0.0;
  double val = signed_chord_integral(
      [&](double t2) { return field_.B({x.x(), t2, x.z()}).x(); }, x.y(), c, k,
      budget_.max_depth, budget_.inner_rel_tol, &err);
  check_quad(err, budget_, field_, "A3");
  return val;
}

double GaugeField::line_integral(const Vec3& a, const Vec3& b) const {
  Vec3 d = b - a;
  double total = 0.0, err = 0.0, e = 0.0;
  // Segment geometry is arbitrary here, so no kink prediction; this entry
  // is meant for spot checks, not lattice assembly.
  if (d.x() != 0.0) {
    total += GK::integrate([&](double t) { return A1(a + t * d) * d.x(); },
                           0.0, 1.0, budget_.max_depth + 4, budget_.rel_tol,
                           &e);
    err += e;
  }
  if (d.z() != 0.0) {
    total += GK::integrate([&](double t) { return A3(a + t * d) * d.z(); },
                           0.0, 1.0, budget_.max_depth + 4, budget_.rel_tol,
                           &e);
    err += e;
  }
  check_quad(err, budget_, field_, "line_integral");
  return total;
}

double gauge_transfer_phase(const MagneticField& field, double x1,
                            QuadratureBudget budget) {
  double r1 = field.cutoff().rho1, r2 = field.cutoff().rho2;
  if (x1 <= -r2) return 0.0;
  // (A_upper - A_lower)(x) = (Delta(x1), 0, 0) with
  // Delta(x1) = -int B2(x1, 0, t3) dt3; independent of x2 and x3 because
  // the field is divergence free.
  double err = 0.0;
  auto delta = [&](double t1) {
    double q2 = r2 * r2 - t1 * t1;
    if (q2 <= 0.0) return 0.0;
    double q = std::sqrt(q2);
    Kinks k;
    k.add_shell(r1 * r1 - t1 * t1);
    return -split_quad([&](double t3) { return field.B({t1, 0.0, t3}).y(); },
                       -q, q, k, budget.max_depth, budget.inner_rel_tol,
                       &err);
  };
  Kinks k;
  k.add(-r1);
  k.add(r1);
  double val = split_quad(delta, -r2, std::min(x1, r2), k, budget.max_depth,
                          budget.rel_tol, &err);
  check_quad(err, budget, field, "gauge_transfer_phase");
  return val;
}

// ============================================================
// Lattice evaluation
// ============================================================

std::vector<double> a1_lattice(const GaugeField& gauge, const Grid3& g) {
  g.validate();
  std::vector<double> out(g.size(), 0.0);
  const MagneticField& field = gauge.field();
  double r1 = field.cutoff().rho1, r2 = field.cutoff().rho2;
  QuadratureBudget budget{};
  double err = 0.0;
  int n3 = g.n[2];
  for (int i = 0; i < g.n[0]; ++i) {
    double x1 = g.coord(0, i);
    double q2 = r2 * r2 - x1 * x1;
    if (q2 <= 0.0) continue;
    double q = std::sqrt(q2);
    for (int j = 0; j < g.n[1]; ++j) {
      double x2 = g.coord(1, j);
      Kinks k = column_kinks(r1, r2, x1, x2);
      auto G = [&](double t3) { return gauge.column_G(x1, x2, t3); };
      auto seg = [&](double a, double b) {
        double lo = std::max(a, -q), hi = std::min(b, q);
        if (hi <= lo) return 0.0;
        return split_quad(G, lo, hi, k, budget.max_depth, budget.rel_tol,
                          &err);
      };
      if (gauge.anchor() == GaugeAnchor::Upper) {
        double ztop = g.coord(2, n3 - 1);
        double acc = (ztop >= q) ? 0.0 : -seg(ztop, q);
        out[g.index(i, j, n3 - 1)] = acc;
        for (int kk = n3 - 2; kk >= 0; --kk) {
          acc -= seg(g.coord(2, kk), g.coord(2, kk + 1));
          out[g.index(i, j, kk)] = acc;
        }
      } else {
        double zbot = g.coord(2, 0);
        double acc = (zbot <= -q) ? 0.0 : seg(-q, zbot);
        out[g.index(i, j, 0)] = acc;
        for (int kk = 1; kk < n3; ++kk) {
          acc += seg(g.coord(2, kk - 1), g.coord(2, kk));
          out[g.index(i, j, kk)] = acc;
        }
      }
    }
  }
  check_quad(err, budget, field, "a1_lattice");
  return out;
}

std::vector<double> a3_lattice(const GaugeField& gauge, const Grid3& g) {
  g.validate();
  std::vector<double> out(g.size(), 0.0);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k)
        out[g.index(i, j, k)] =
            gauge.A3({g.coord(0, i), g.coord(1, j), g.coord(2, k)});
  return out;
}

// ============================================================
// Link phases
// ============================================================

std::int64_t LinkPhases::link_index(int axis, int i, int j, int k) const {
  std::array<int, 3> m{grid.n[0], grid.n[1], grid.n[2]};
  m[axis] -= 1;
  return (std::int64_t(i) * m[1] + j) * m[2] + k;
}

LinkPhases compute_link_phases(const GaugeField& gauge, const Grid3& g) {
  g.validate();
  LinkPhases ph;
  ph.grid = g;
  for (int a = 0; a < 3; ++a) {
    std::array<std::int64_t, 3> m{g.n[0], g.n[1], g.n[2]};
    m[a] -= 1;
    ph.theta[a].assign(m[0] * m[1] * m[2], 0.0);
  }

  const MagneticField& field = gauge.field();
  double r1 = field.cutoff().rho1, r2 = field.cutoff().rho2;
  QuadratureBudget budget{};
  double err = 0.0;

  // Axis 1 links: A2 = 0, nothing to do.

  // Axis 2 links: direct line integrals of A3, skipped where it vanishes.
  for (int i = 0; i < g.n[0]; ++i) {
    double x1 = g.coord(0, i);
    double q2 = r2 * r2 - x1 * x1;
    if (q2 <= 0.0) continue;
    double q = std::sqrt(q2);
    for (int j = 0; j < g.n[1]; ++j) {
      double x2 = g.coord(1, j);
      Kinks k = column_kinks(r1, r2, x1, x2);
      for (int kk = 0; kk + 1 < g.n[2]; ++kk) {
        double za = g.coord(2, kk), zb = g.coord(2, kk + 1);
        if (za >= q || zb <= -q) continue;
        double val =
            split_quad([&](double t3) { return gauge.A3({x1, x2, t3}); },
                       std::max(za, -q), std::min(zb, q), k, budget.max_depth,
                       budget.rel_tol, &err);
        ph.theta[2][ph.link_index(2, i, j, kk)] = val;
      }
    }
  }

  // Axis 0 links: incremental axial sweeps of the x1-segment integral
  //   I(z) = int_{x1 link} A1(t1, x2, z) dt1,
  // advanced between consecutive axial nodes by the two-dimensional patch
  // integral of the column integrand G.
  for (int i = 0; i + 1 < g.n[0]; ++i) {
    double xa = g.coord(0, i), xb = g.coord(0, i + 1);
    double min_abs_x1 = (xa <= 0.0 && xb >= 0.0)
                            ? 0.0
                            : std::min(std::abs(xa), std::abs(xb));
    double q2 = r2 * r2 - min_abs_x1 * min_abs_x1;
    if (q2 <= 0.0) continue;  // the whole link column is outside the support
    double q = std::sqrt(q2);
    int n3 = g.n[2];
    for (int j = 0; j < g.n[1]; ++j) {
      double x2 = g.coord(1, j);
      // Kinks of the t3 integrand: shell crossings at the t1 endpoints and
      // at an interior t1 = 0, each with chord endpoints 0 and x2.
      Kinks k3;
      for (double r : {r1, r2})
        for (double c2 : {xa * xa, xb * xb, min_abs_x1 * min_abs_x1})
          for (double d2 : {0.0, x2 * x2}) k3.add_shell(r * r - c2 - d2);
      // Patch integral of G over [xa, xb] x [za, zb], clipped axially.
      auto patch = [&](double za, double zb) {
        double lo = std::max(za, -q), hi = std::min(zb, q);
        if (hi <= lo) return 0.0;
        return split_quad(
            [&](double t3) {
              Kinks k1;
              for (double r : {r1, r2}) {
                k1.add_shell(r * r - t3 * t3);
                k1.add_shell(r * r - t3 * t3 - x2 * x2);
              }
              return split_quad(
                  [&](double t1) { return gauge.column_G(t1, x2, t3); }, xa,
                  xb, k1, budget.max_depth, budget.rel_tol);
            },
            lo, hi, k3, budget.max_depth, budget.rel_tol, &err);
      };
      if (gauge.anchor() == GaugeAnchor::Upper) {
        double ztop = g.coord(2, n3 - 1);
        double acc = (ztop >= q) ? 0.0 : -patch(ztop, q);
        ph.theta[0][ph.link_index(0, i, j, n3 - 1)] = acc;
        for (int kk = n3 - 2; kk >= 0; --kk) {
          acc -= patch(g.coord(2, kk), g.coord(2, kk + 1));
          ph.theta[0][ph.link_index(0, i, j, kk)] = acc;
        }
      } else {
        double zbot = g.coord(2, 0);
        double acc = (zbot <= -q) ? 0.0 : patch(-q, zbot);
        ph.theta[0][ph.link_index(0, i, j, 0)] = acc;
        for (int kk = 1; kk < n3; ++kk) {
          acc += patch(g.coord(2, kk - 1), g.coord(2, kk));
          ph.theta[0][ph.link_index(0, i, j, kk)] = acc;
        }
      }
    }
  }

  check_quad(err, budget, field, "link phases");
  return ph;
}

LinkPhases combine_phases(const std::array<const LinkPhases*, 3>& unit,
                          const Vec3& B0) {
  for (const LinkPhases* p : unit)
    if (!p) throw std::invalid_argument("combine_phases: missing unit table");
  LinkPhases out;
  out.grid = unit[0]->grid;
  for (int a = 0; a < 3; ++a) {
    std::size_t sz = unit[0]->theta[a].size();
    if (unit[1]->theta[a].size() != sz || unit[2]->theta[a].size() != sz)
      throw std::invalid_argument("combine_phases: mismatched tables");
    out.theta[a].assign(sz, 0.0);
    for (std::size_t idx = 0; idx < sz; ++idx)
      out.theta[a][idx] = B0.x() * unit[0]->theta[a][idx] +
                          B0.y() * unit[1]->theta[a][idx] +
                          B0.z() * unit[2]->theta[a][idx];
  }
  return out;
}

// ============================================================
// Curl residuals
// ============================================================

double CurlReport::worst_abs() const {
  return std::max({max_abs[0], max_abs[1], max_abs[2]});
}

double CurlReport::worst_rel() const {
  return (b0_norm > 0.0) ? worst_abs() / b0_norm : worst_abs();
}

CurlReport check_curl_system(const GaugeField& gauge, const Grid3& g) {
  g.validate();
  const MagneticField& field = gauge.field();

  std::vector<double> a1 = a1_lattice(gauge, g);
  std::vector<double> a3 = a3_lattice(gauge, g);

  std::vector<double> b1(g.size()), b2(g.size()), b3(g.size());
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        Vec3 b = field.B({g.coord(0, i), g.coord(1, j), g.coord(2, k)});
        std::int64_t id = g.index(i, j, k);
        b1[id] = b.x();
        b2[id] = b.y();
        b3[id] = b.z();
      }

  CurlReport rep;
  rep.b0_norm = norm(field.spec().B0);
  rep.h = std::max({g.h(0), g.h(1), g.h(2)});

  std::array<double, 3> sq{0.0, 0.0, 0.0};
  double inv2h1 = 0.5 / g.h(0), inv2h2 = 0.5 / g.h(1), inv2h3 = 0.5 / g.h(2);
  std::int64_t count = 0;
  for (int i = 1; i + 1 < g.n[0]; ++i)
    for (int j = 1; j + 1 < g.n[1]; ++j)
      for (int k = 1; k + 1 < g.n[2]; ++k) {
        std::int64_t id = g.index(i, j, k);
        double d2a3 = (a3[g.index(i, j + 1, k)] - a3[g.index(i, j - 1, k)]) * inv2h2;
        double d3a1 = (a1[g.index(i, j, k + 1)] - a1[g.index(i, j, k - 1)]) * inv2h3;
        double d1a3 = (a3[g.index(i + 1, j, k)] - a3[g.index(i - 1, j, k)]) * inv2h1;
        double d2a1 = (a1[g.index(i, j + 1, k)] - a1[g.index(i, j - 1, k)]) * inv2h2;

        std::array<double, 3> res{d2a3 - b1[id], d3a1 - d1a3 - b2[id],
                                  -d2a1 - b3[id]};
        for (int e = 0; e < 3; ++e) {
          rep.max_abs[e] = std::max(rep.max_abs[e], std::abs(res[e]));
          sq[e] += res[e] * res[e];
        }

        double div = (b1[g.index(i + 1, j, k)] - b1[g.index(i - 1, j, k)]) * inv2h1 +
                     (b2[g.index(i, j + 1, k)] - b2[g.index(i, j - 1, k)]) * inv2h2 +
                     (b3[g.index(i, j, k + 1)] - b3[g.index(i, j, k - 1)]) * inv2h3;
        rep.max_div_b = std::max(rep.max_div_b, std::abs(div));
        ++count;
      }

  rep.interior_nodes = count;
  for (int e = 0; e < 3; ++e)
    rep.rms[e] = (count > 0) ? std::sqrt(sq[e] / count) : 0.0;
  return rep;
}

}  // namespace magtube
