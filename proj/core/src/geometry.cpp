#include "magtube/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace magtube {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ============================================================
// Axis displacement profiles
// ============================================================

// C^2 bump on [-1,1]: (1-t^2)^3, zero with two vanishing derivatives at the
// endpoints so curvature is continuous across the support boundary.
struct BumpShape {
  double amplitude;
  double half_width;

  double value(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t;
    return amplitude * w * w * w;
  }
  double d1(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t;
    return amplitude * (-6.0 * t * w * w) / half_width;
  }
  double d2(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t;
    return amplitude * (w * (30.0 * t * t - 6.0)) / (half_width * half_width);
  }
};

// Oscillatory C^2 displacement on [-1,1]:
//   (1-t^4)^3 [cos(M pi t) + q cos(3 M pi t)].
// The flat quartic envelope keeps the oscillation near full swing across
// most of the support while the cosine packs M curvature arches into it;
// envelope value, slope, and second derivative all vanish at the endpoints.
// The optional third harmonic flattens the curvature waveform: q = -1/27
// turns the arch profile cos into cos - cos(3.)/3, raising the mean-square
// curvature available under a fixed curvature ceiling.
struct WiggleShape {
  double amplitude;
  double half_width;
  int arches;
  double q3;

  double osc(double t, int deriv) const {
    double m = arches * kPi;
    switch (deriv) {
      case 0: return std::cos(m * t) + q3 * std::cos(3.0 * m * t);
      case 1:
        return -m * std::sin(m * t) - 3.0 * m * q3 * std::sin(3.0 * m * t);
      default:
        return -m * m * std::cos(m * t) -
               9.0 * m * m * q3 * std::cos(3.0 * m * t);
    }
  }
  double value(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t * t * t;
    return amplitude * w * w * w * osc(t, 0);
  }
  double d1(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t * t * t;
    double e = w * w * w;
    double e1 = -12.0 * t * t * t * w * w;
    return amplitude * (e1 * osc(t, 0) + e * osc(t, 1)) / half_width;
  }
  double d2(double u) const {
    double t = u / half_width;
    if (std::abs(t) >= 1.0) return 0.0;
    double w = 1.0 - t * t * t * t;
    double e = w * w * w;
    double e1 = -12.0 * t * t * t * w * w;
    double e2 = -36.0 * t * t * w * w + 96.0 * t * t * t * t * t * t * w;
    return amplitude * (e2 * osc(t, 0) + 2.0 * e1 * osc(t, 1) + e * osc(t, 2)) /
           (half_width * half_width);
  }
};

// Wraps a user-supplied displacement profile; derivatives by central
// differences, accurate enough for curvature at the tolerances we track.
struct CustomShape {
  std::function<double(double)> fn;
  double half_width;
  double step;

  double value(double u) const {
    return (std::abs(u) >= half_width) ? 0.0 : fn(u);
  }
  double d1(double u) const {
    if (std::abs(u) >= half_width) return 0.0;
    return (value(u + step) - value(u - step)) / (2.0 * step);
  }
  double d2(double u) const {
    if (std::abs(u) >= half_width) return 0.0;
    return (value(u + step) - 2.0 * value(u) + value(u - step)) / (step * step);
  }
};

// Rejects displacement profiles whose second derivative blows up under grid
// refinement (kinks in the profile or its slope).  A twice differentiable
// profile has bounded second difference quotients; a corner makes them grow
// like 1/h.
void require_c2_profile(const std::function<double(double)>& fn, double d) {
  std::array<double, 3> steps = {1e-3 * d, 5e-4 * d, 2.5e-4 * d};
  std::array<double, 3> quot{};
  const double span = d + 0.05 * d;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    double h = steps[k];
    double worst = 0.0;
    auto eval = [&](double u) { return (std::abs(u) >= d) ? 0.0 : fn(u); };
    for (double u = -span; u <= span; u += h) {
      double q = std::abs(eval(u + h) - 2.0 * eval(u) + eval(u - h)) / (h * h);
      worst = std::max(worst, q);
    }
    quot[k] = worst;
  }
  if (quot[1] > 1.7 * quot[0] + 1e-9 && quot[2] > 1.7 * quot[1] + 1e-9) {
    std::ostringstream msg;
    msg << "displacement profile is not twice continuously differentiable: "
        << "second difference quotients grow under refinement ("
        << quot[0] << " -> " << quot[1] << " -> " << quot[2] << ")";
    throw std::invalid_argument(msg.str());
  }
}

void orthonormalize(Vec3& t, Vec3& n, Vec3& b) {
  t = normalized(t);
  n = n - dot(n, t) * t;
  n = normalized(n);
  b = cross(t, n);
}

// Composite Simpson on [a,b].
template <typename F>
double simpson(const F& f, double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// State for frame transport: axis parameter u, position, and frame vectors.
struct TransportState {
  double u;
  Vec3 pos, t, n, b;
};

TransportState axpy(const TransportState& y, double c, const TransportState& k) {
  return {y.u + c * k.u, y.pos + c * k.pos, y.t + c * k.t, y.n + c * k.n,
          y.b + c * k.b};
}

template <typename Rhs>
TransportState rk4_step(const TransportState& y, double s, double h,
                        const Rhs& rhs) {
  TransportState k1 = rhs(s, y);
  TransportState k2 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k1));
  TransportState k3 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k2));
  TransportState k4 = rhs(s + h, axpy(y, h, k3));
  TransportState out = y;
  out.u += (h / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
  out.pos = out.pos + (h / 6.0) * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
  out.t = out.t + (h / 6.0) * (k1.t + 2.0 * k2.t + 2.0 * k3.t + k4.t);
  out.n = out.n + (h / 6.0) * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n);
  out.b = out.b + (h / 6.0) * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
  return out;
}

void finalize_scan_fields(FrameField& f) {
  f.max_offset = 0.0;
  f.z_monotone = true;
  for (std::size_t i = 0; i < f.pos.size(); ++i) {
    f.max_offset = std::max(f.max_offset, std::hypot(f.pos[i].x(), f.pos[i].y()));
    if (i + 1 < f.pos.size() && f.pos[i + 1].z() <= f.pos[i].z())
      f.z_monotone = false;
  }
}

}  // namespace

// ============================================================
// CrossSection factories
// ============================================================

CrossSection CrossSection::disk(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
  CrossSection cs;
  cs.r_max = radius;
  double r2 = radius * radius;
  cs.member = [r2](double p1, double p2) { return p1 * p1 + p2 * p2 <= r2; };
  return cs;
}

CrossSection CrossSection::square(double half_side) {
  if (!(half_side > 0.0))
    throw std::invalid_argument("square half side must be positive");
  CrossSection cs;
  cs.r_max = half_side * std::sqrt(2.0);
  cs.member = [half_side](double p1, double p2) {
    return std::abs(p1) <= half_side && std::abs(p2) <= half_side;
  };
  return cs;
}

// ============================================================
// build_curve
// ============================================================

FrameField build_curve(const CurveSpec& spec) {
  if (!(spec.s0 > 0.0)) throw std::invalid_argument("s0 must be positive");
  if (!(spec.half_width > 0.0))
    throw std::invalid_argument("deformation half width must be positive");
  if (spec.half_width > spec.s0 / std::sqrt(2.0) + 1e-12)
    throw std::invalid_argument(
        "deformation half width exceeds s0/sqrt(2); the bend would leave the "
        "region where the tube is allowed to deviate from a straight cylinder");
  if (spec.samples_per_unit < 10)
    throw std::invalid_argument("samples_per_unit must be at least 10");
  if (!(spec.tail_margin > 0.0))
    throw std::invalid_argument("tail_margin must be positive");
  if (spec.half_length < spec.half_width + spec.tail_margin)
    throw std::invalid_argument("half_length too small to contain the bend");
  if (spec.amplitude < 0.0)
    throw std::invalid_argument("amplitude must be nonnegative");

  const double d = spec.half_width;

  std::function<double(double)> D, D1, D2;
  if (spec.profile) {
    require_c2_profile(spec.profile, d);
    auto shape = std::make_shared<CustomShape>(
        CustomShape{spec.profile, d, std::min(1e-4, 1e-4 * d)});
    D = [shape](double u) { return shape->value(u); };
    D1 = [shape](double u) { return shape->d1(u); };
    D2 = [shape](double u) { return shape->d2(u); };
  } else if (spec.kind == DeformationKind::Wiggle) {
    if (spec.arches < 1)
      throw std::invalid_argument("wiggle arch count must be at least 1");
    auto shape = std::make_shared<WiggleShape>(
        WiggleShape{spec.amplitude, d, spec.arches, spec.harmonic3});
    D = [shape](double u) { return shape->value(u); };
    D1 = [shape](double u) { return shape->d1(u); };
    D2 = [shape](double u) { return shape->d2(u); };
  } else {
    double amp = (spec.kind == DeformationKind::None) ? 0.0 : spec.amplitude;
    auto shape = std::make_shared<BumpShape>(BumpShape{amp, d});
    D = [shape](double u) { return shape->value(u); };
    D1 = [shape](double u) { return shape->d1(u); };
    D2 = [shape](double u) { return shape->d2(u); };
  }

  // Displacement direction in the cross-sectional plane.
  const Vec3 e3{0.0, 0.0, 1.0};
  const Vec3 w{std::cos(spec.direction), std::sin(spec.direction), 0.0};

  auto speed = [&](double u) {
    double g = D1(u);
    return std::sqrt(1.0 + g * g);
  };
  auto curvature = [&](double u) {
    double g = D1(u);
    double m2 = 1.0 + g * g;
    return D2(u) / (m2 * std::sqrt(m2));
  };

  // Arclength accumulated over each half of the bend, measured from u = 0.
  int panels = std::max(2000, int(40 * spec.samples_per_unit * d));
  double L_left = simpson(speed, -d, 0.0, panels);
  double L_right = simpson(speed, 0.0, d, panels);

  FrameField f;
  f.s0 = spec.s0;
  f.straight_tails = true;
  f.half_length = spec.half_length;
  f.deform_support = d;
  f.twist = spec.twist;

  // Align sample nodes with the support edges: the curvature has a
  // derivative jump there, and steps that straddle it would degrade the
  // integrator from 4th order to roughly 2nd.
  double L_core = L_left + L_right;
  int n_core = std::max(8, int(std::ceil(L_core * spec.samples_per_unit)));
  f.ds = L_core / n_core;
  int n_tail = std::max(1, int(std::ceil(spec.tail_margin / f.ds)));
  f.s_lo = -L_left - n_tail * f.ds;
  f.s_hi = L_right + n_tail * f.ds;
  f.z_lo = -d - n_tail * f.ds;
  f.z_hi = d + n_tail * f.ds;
  int count = n_core + 2 * n_tail + 1;

  f.pos.resize(count);
  f.t.resize(count);
  f.n.resize(count);
  f.b.resize(count);
  f.gamma.assign(count, 0.0);
  f.tau.assign(count, 0.0);

  // The axis is Gamma(u) = u e3 + D(u) w.  Transporting the frame in
  // arclength keeps |Gamma'| = 1 exactly in the continuum; du/ds = 1/speed.
  auto rhs = [&](double, const TransportState& y) {
    double g = curvature(y.u);
    TransportState k;
    k.u = 1.0 / speed(y.u);
    k.pos = y.t;
    k.t = g * y.n;
    k.n = (-g) * y.t;
    k.b = Vec3{0.0, 0.0, 0.0};
    return k;
  };

  // Start on the left tail where everything is exact.
  TransportState y;
  y.u = f.z_lo;
  y.pos = Vec3{D(y.u) * w.x(), D(y.u) * w.y(), y.u};
  y.t = e3;
  // Initial normal: the displacement direction, so that positive curvature
  // bends the axis toward +w.
  y.n = w;
  y.b = cross(y.t, y.n);

  double max_speed_defect = 0.0;
  Vec3 prev_pos = y.pos;
  for (int i = 0; i < count; ++i) {
    double s = f.s_lo + i * f.ds;
    if (i > 0) {
      // Substep for accuracy independent of the storage density.
      int sub = 2;
      double hh = f.ds / sub;
      for (int k = 0; k < sub; ++k)
        y = rk4_step(y, s - f.ds + k * hh, hh, rhs);
      double chord = norm(y.pos - prev_pos);
      max_speed_defect = std::max(max_speed_defect, std::abs(chord / f.ds - 1.0));
      prev_pos = y.pos;
    }
    f.pos[i] = y.pos;
    f.t[i] = y.t;
    f.n[i] = y.n;
    f.b[i] = y.b;
    f.gamma[i] = curvature(y.u);
    f.tau[i] = 0.0;
  }
  f.max_speed_defect = max_speed_defect;

  // Outside the bend the axis is an exact straight line; snap samples there
  // to the closed form and record how far the integrator had drifted.
  double tail_defect = 0.0;
  for (int i = 0; i < count; ++i) {
    double s = f.s_lo + i * f.ds;
    bool left = s <= -L_left + 1e-13;
    bool right = s >= L_right - 1e-13;
    if (!left && !right) continue;
    double z = left ? (s + L_left - d) : (s - L_right + d);
    Vec3 pos_exact{0.0, 0.0, z};
    double defect = norm(f.pos[i] - pos_exact);
    defect = std::max(defect, norm(f.t[i] - e3));
    defect = std::max(defect, norm(f.n[i] - w));
    defect = std::max(defect, norm(f.b[i] - cross(e3, w)));
    tail_defect = std::max(tail_defect, defect);
    f.pos[i] = pos_exact;
    f.t[i] = e3;
    f.n[i] = w;
    f.b[i] = cross(e3, w);
    f.gamma[i] = 0.0;
  }
  f.tail_defect = tail_defect;

  // Reference transverse frame for the straight tails.
  f.n0 = w;
  f.b0 = cross(e3, w);

  finalize_scan_fields(f);
  return f;
}

FrameField integrate_frame(const std::function<double(double)>& gamma_fn,
                           const std::function<double(double)>& tau_fn,
                           double s_lo, double s_hi, int samples_per_unit,
                           const Vec3& pos0, const Vec3& t0, const Vec3& n0,
                           const Vec3& b0) {
  if (!(s_hi > s_lo)) throw std::invalid_argument("need s_hi > s_lo");
  if (samples_per_unit < 10)
    throw std::invalid_argument("samples_per_unit must be at least 10");

  FrameField f;
  f.straight_tails = false;
  f.s_lo = s_lo;
  f.s_hi = s_hi;
  f.half_length = std::max(std::abs(s_lo), std::abs(s_hi));
  f.z_lo = pos0.z();
  f.z_hi = pos0.z();

  int count = int(std::ceil((s_hi - s_lo) * samples_per_unit)) + 1;
  count = std::max(count, 8);
  f.ds = (s_hi - s_lo) / (count - 1);

  f.pos.resize(count);
  f.t.resize(count);
  f.n.resize(count);
  f.b.resize(count);
  f.gamma.assign(count, 0.0);
  f.tau.assign(count, 0.0);

  auto rhs = [&](double s, const TransportState& y) {
    double g = gamma_fn(s);
    double tau = tau_fn ? tau_fn(s) : 0.0;
    TransportState k;
    k.u = 0.0;
    k.pos = y.t;
    k.t = g * y.n;
    k.n = (-g) * y.t + tau * y.b;
    k.b = (-tau) * y.n;
    return k;
  };

  TransportState y{0.0, pos0, t0, n0, b0};
  orthonormalize(y.t, y.n, y.b);

  Vec3 prev_pos = y.pos;
  double max_speed_defect = 0.0;
  for (int i = 0; i < count; ++i) {
    double s = s_lo + i * f.ds;
    if (i > 0) {
      int sub = 2;
      double hh = f.ds / sub;
      for (int k = 0; k < sub; ++k)
        y = rk4_step(y, s - f.ds + k * hh, hh, rhs);
      double chord = norm(y.pos - prev_pos);
      max_speed_defect = std::max(max_speed_defect, std::abs(chord / f.ds - 1.0));
      prev_pos = y.pos;
    }
    f.pos[i] = y.pos;
    f.t[i] = y.t;
    f.n[i] = y.n;
    f.b[i] = y.b;
    f.gamma[i] = gamma_fn(s);
    f.tau[i] = tau_fn ? tau_fn(s) : 0.0;
    f.z_hi = std::max(f.z_hi, y.pos.z());
    f.z_lo = std::min(f.z_lo, y.pos.z());
  }
  f.max_speed_defect = max_speed_defect;
  f.n0 = f.n.front();
  f.b0 = f.b.front();

  finalize_scan_fields(f);
  return f;
}

// ============================================================
// FrameField queries
// ============================================================

double FrameField::max_abs_gamma() const {
  double g = 0.0;
  for (double v : gamma) g = std::max(g, std::abs(v));
  return g;
}

FrameField::Sample FrameField::at(double s) const {
  Sample out;
  out.alpha = alpha(s);
  if (straight_tails && s >= s_hi) {
    out.pos = Vec3{0.0, 0.0, z_hi + (s - s_hi)};
    out.t = Vec3{0.0, 0.0, 1.0};
    out.n = n0;
    out.b = b0;
    out.gamma = 0.0;
    out.tau = 0.0;
    return out;
  }
  if (straight_tails && s <= s_lo) {
    out.pos = Vec3{0.0, 0.0, z_lo - (s_lo - s)};
    out.t = Vec3{0.0, 0.0, 1.0};
    out.n = n0;
    out.b = b0;
    out.gamma = 0.0;
    out.tau = 0.0;
    return out;
  }
  if (s < s_lo - 1e-12 || s > s_hi + 1e-12)
    throw std::out_of_range("frame queried outside its integrated range");

  double x = (s - s_lo) / ds;
  int i = int(std::floor(x));
  i = std::clamp(i, 0, int(pos.size()) - 2);
  double wgt = x - i;

  out.pos = (1.0 - wgt) * pos[i] + wgt * pos[i + 1];
  out.t = (1.0 - wgt) * t[i] + wgt * t[i + 1];
  out.n = (1.0 - wgt) * n[i] + wgt * n[i + 1];
  out.b = (1.0 - wgt) * b[i] + wgt * b[i + 1];
  out.gamma = (1.0 - wgt) * gamma[i] + wgt * gamma[i + 1];
  out.tau = (1.0 - wgt) * tau[i] + wgt * tau[i + 1];
  orthonormalize(out.t, out.n, out.b);
  return out;
}

// ============================================================
// Tube map and its inverse
// ============================================================

Vec3 tube_point(const FrameField& f, double s, double r, double theta) {
  if (r < 0.0) throw std::invalid_argument("radial coordinate must be nonnegative");
  if (std::abs(s) > f.half_length + 1e-12)
    throw std::out_of_range("axis coordinate outside the tube length");
  FrameField::Sample smp = f.at(s);
  double c = std::cos(theta - smp.alpha);
  double sn = std::sin(theta - smp.alpha);
  return smp.pos - r * (c * smp.n + sn * smp.b);
}

namespace {

std::optional<TubeCoords> accept_candidate(const FrameField& f,
                                           const CrossSection& cs, double s,
                                           const FrameField::Sample& smp,
                                           const Vec3& x) {
  if (std::abs(s) > f.half_length + 1e-12) return std::nullopt;
  Vec3 q = x - smp.pos;
  double qn = dot(q, smp.n);
  double qb = dot(q, smp.b);
  double r = std::hypot(qn, qb);
  if (r > cs.r_max * (1.0 + 1e-12)) return std::nullopt;
  double theta = smp.alpha + std::atan2(-qb, -qn);
  // p = -(qn, qb) up to roundoff; membership is tested in frame coordinates.
  double p1 = r * std::cos(theta - smp.alpha);
  double p2 = r * std::sin(theta - smp.alpha);
  if (!cs.member(p1, p2)) return std::nullopt;
  return TubeCoords{s, r, theta};
}

}  // namespace

std::optional<TubeCoords> locate_in_tube(const FrameField& f,
                                         const CrossSection& cs, const Vec3& x,
                                         const LocateOptions& opt) {
  if (!cs.member) throw std::invalid_argument("cross section has no membership test");

  // Straight tails admit a closed-form inverse.
  if (f.straight_tails && (x.z() >= f.z_hi || x.z() <= f.z_lo)) {
    double s = (x.z() >= f.z_hi) ? f.s_hi + (x.z() - f.z_hi)
                                 : f.s_lo - (f.z_lo - x.z());
    if (std::abs(s) > f.half_length + 1e-12) return std::nullopt;
    FrameField::Sample smp = f.at(s);
    return accept_candidate(f, cs, s, smp, x);
  }

  // Gross transverse reject: the axis never strays beyond max_offset.
  double rho = std::hypot(x.x(), x.y());
  if (rho > f.max_offset + cs.r_max + 2.0 * f.ds + 1e-9) return std::nullopt;
  if (!f.straight_tails &&
      (x.z() > f.z_hi + cs.r_max || x.z() < f.z_lo - cs.r_max))
    return std::nullopt;

  int count = int(f.pos.size());
  int ilo = 0, ihi = count - 1;
  if (f.z_monotone) {
    // Window the sample range by axis coordinate; |t| = 1 means the axis
    // cannot outrun arclength, so a window this wide contains every
    // orthogonal foot point of x.
    double wz = 2.0 * (cs.r_max + f.max_offset) + 2.0 * f.ds + 0.1;
    double zmin = x.z() - wz, zmax = x.z() + wz;
    int lo = 0, hi = count - 1;
    while (lo < hi) {  // first index with pos.z >= zmin
      int mid = (lo + hi) / 2;
      if (f.pos[mid].z() < zmin) lo = mid + 1; else hi = mid;
    }
    ilo = std::max(0, lo - 1);
    lo = ilo; hi = count - 1;
    while (lo < hi) {  // last index with pos.z <= zmax
      int mid = (lo + hi + 1) / 2;
      if (f.pos[mid].z() > zmax) hi = mid - 1; else lo = mid;
    }
    ihi = std::min(count - 1, lo + 1);
  }
  if (ihi <= ilo) return std::nullopt;

  // g(s) = <x - Gamma(s), t(s)> vanishes at orthogonal feet.
  auto g_at = [&](const FrameField::Sample& smp) {
    return dot(x - smp.pos, smp.t);
  };

  std::optional<TubeCoords> best;
  double best_dist2 = std::numeric_limits<double>::infinity();

  auto consider = [&](double s, const FrameField::Sample& smp) {
    auto cand = accept_candidate(f, cs, s, smp, x);
    if (!cand) return;
    Vec3 q = x - smp.pos;
    double d2 = dot(q, q);
    if (d2 < best_dist2) {
      best_dist2 = d2;
      best = cand;
    }
  };

  double prev_g = 0.0;
  bool have_prev = false;
  for (int i = ilo; i <= ihi; ++i) {
    double s_i = f.s_lo + i * f.ds;
    Vec3 q = x - f.pos[i];
    double g = dot(q, f.t[i]);
    if (have_prev && prev_g * g <= 0.0 && (prev_g != 0.0 || g != 0.0)) {
      // Bracketed root in [s_{i-1}, s_i]; polish with safeguarded Newton.
      double sa = s_i - f.ds, sb = s_i;
      double ga = prev_g, gb = g;
      double s_cur = (std::abs(ga) < std::abs(gb)) ? sa : sb;
      bool converged = false;
      FrameField::Sample smp;
      for (int it = 0; it < opt.newton_budget; ++it) {
        smp = f.at(s_cur);
        double gc = g_at(smp);
        if (std::abs(gc) <= opt.tol * (1.0 + norm(x))) {
          converged = true;
          break;
        }
        if (ga * gc <= 0.0) { sb = s_cur; gb = gc; }
        else { sa = s_cur; ga = gc; }
        Vec3 qc = x - smp.pos;
        double gp = -1.0 + smp.gamma * dot(qc, smp.n);
        double s_next = (gp != 0.0) ? s_cur - gc / gp
                                    : std::numeric_limits<double>::quiet_NaN();
        if (!(s_next > sa && s_next < sb)) s_next = 0.5 * (sa + sb);
        if (std::abs(s_next - s_cur) < 1e-15 * (1.0 + std::abs(s_cur))) {
          s_cur = s_next;
          smp = f.at(s_cur);
          converged = true;
          break;
        }
        s_cur = s_next;
      }
      if (!converged) {
        std::ostringstream msg;
        msg << "tube inversion did not converge at point (" << x.x() << ", "
            << x.y() << ", " << x.z() << "); residual bracket ["
            << sa << ", " << sb << "]";
        throw std::runtime_error(msg.str());
      }
      consider(s_cur, smp);
    }
    // Endpoint feet (window boundary) rarely matter but cost little.
    if (g == 0.0 && !have_prev) {
      FrameField::Sample smp = f.at(s_i);
      consider(s_i, smp);
    }
    prev_g = g;
    have_prev = true;
  }

  return best;
}

double lift_potential(const FrameField& f, const CrossSection& cs,
                      const std::function<double(double, double)>& V,
                      const Vec3& x) {
  if (!V) throw std::invalid_argument("lift_potential needs a profile");
  auto c = locate_in_tube(f, cs, x);
  if (!c) return 0.0;
  double p1 = c->r * std::cos(c->theta - f.alpha(c->s));
  double p2 = c->r * std::sin(c->theta - f.alpha(c->s));
  return V(p1, p2);
}

// ============================================================
// Diagnostics
// ============================================================

TubeReport validate_tube(const FrameField& f, const CrossSection& cs) {
  TubeReport rep;

  double frame_defect = 0.0;
  for (std::size_t i = 0; i < f.pos.size(); ++i) {
    frame_defect = std::max(frame_defect, std::abs(norm(f.t[i]) - 1.0));
    frame_defect = std::max(frame_defect, std::abs(norm(f.n[i]) - 1.0));
    frame_defect = std::max(frame_defect, std::abs(norm(f.b[i]) - 1.0));
    frame_defect = std::max(frame_defect, std::abs(dot(f.t[i], f.n[i])));
    frame_defect = std::max(frame_defect, std::abs(dot(f.t[i], f.b[i])));
    frame_defect = std::max(frame_defect, std::abs(dot(f.n[i], f.b[i])));
    frame_defect =
        std::max(frame_defect, norm(cross(f.t[i], f.n[i]) - f.b[i]));
  }
  rep.max_frame_defect = frame_defect;
  rep.frames_ok = frame_defect <= 1e-8;

  double speed_defect = 0.0;
  for (std::size_t i = 0; i + 1 < f.pos.size(); ++i) {
    double chord = norm(f.pos[i + 1] - f.pos[i]);
    speed_defect = std::max(speed_defect, std::abs(chord / f.ds - 1.0));
  }
  rep.max_speed_defect = speed_defect;
  rep.arclength_ok = speed_defect <= 1e-4;

  rep.sup_r_gamma = cs.r_max * f.max_abs_gamma();
  rep.injective = rep.sup_r_gamma < 1.0;

  rep.tail_defect = f.tail_defect;

  // Reach of the deformed region: sample the tube wall where the deformation
  // is allowed to live and record how far from the origin it gets.
  double limit = f.s0 / std::sqrt(2.0);
  double reach = 0.0;
  int n_theta = 64;
  for (std::size_t i = 0; i < f.pos.size(); ++i) {
    if (std::abs(f.pos[i].z()) > limit) continue;
    for (int k = 0; k < n_theta; ++k) {
      double th = 2.0 * kPi * k / n_theta;
      Vec3 xw = f.pos[i] - cs.r_max * (std::cos(th) * f.n[i] +
                                       std::sin(th) * f.b[i]);
      if (std::abs(xw.z()) <= limit) reach = std::max(reach, norm(xw));
    }
  }
  if (f.straight_tails && f.z_hi < limit) {
    // Straight continuation still intersects the slab; its wall reaches
    // hypot(r_max, limit) at the slab boundary.
    reach = std::max(reach, std::hypot(cs.r_max, limit));
  }
  rep.confinement_radius = reach;
  rep.confined = reach <= f.s0 + 1e-9;

  return rep;
}

std::string TubeReport::summary() const {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3);
  os << "frame defect      " << max_frame_defect
     << (frames_ok ? "  ok" : "  FAIL") << "\n";
  os << "speed defect      " << max_speed_defect
     << (arclength_ok ? "  ok" : "  FAIL") << "\n";
  os << "sup r*curvature   " << sup_r_gamma
     << (injective ? "  ok" : "  FAIL") << "\n";
  os << "tail defect       " << tail_defect << "\n";
  os << "confinement reach " << confinement_radius
     << (confined ? "  ok" : "  FAIL") << "\n";
  return os.str();
}

void write_frame_csv(const FrameField& f, std::ostream& os) {
  os << "s,x,y,z,tx,ty,tz,nx,ny,nz,bx,by,bz,curvature,torsion\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < f.pos.size(); ++i) {
    double s = f.s_lo + i * f.ds;
    os << s << ',' << f.pos[i].x() << ',' << f.pos[i].y() << ',' << f.pos[i].z()
       << ',' << f.t[i].x() << ',' << f.t[i].y() << ',' << f.t[i].z() << ','
       << f.n[i].x() << ',' << f.n[i].y() << ',' << f.n[i].z() << ','
       << f.b[i].x() << ',' << f.b[i].y() << ',' << f.b[i].z() << ','
       << f.gamma[i] << ',' << f.tau[i] << '\n';
  }
}

}  // namespace magtube
