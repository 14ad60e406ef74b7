// Minimal fixed-size vector used throughout the geometry and field code.
#pragma once

#include <array>
#include <cmath>

namespace magtube {

struct Vec3 {
  double v[3] = {0.0, 0.0, 0.0};

  Vec3() = default;
  Vec3(double x, double y, double z) : v{x, y, z} {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  double x() const { return v[0]; }
  double y() const { return v[1]; }
  double z() const { return v[2]; }

  Vec3 operator+(const Vec3& o) const { return {v[0] + o.v[0], v[1] + o.v[1], v[2] + o.v[2]}; }
  Vec3 operator-(const Vec3& o) const { return {v[0] - o.v[0], v[1] - o.v[1], v[2] - o.v[2]}; }
  Vec3 operator*(double a) const { return {v[0] * a, v[1] * a, v[2] * a}; }
  Vec3 operator/(double a) const { return {v[0] / a, v[1] / a, v[2] / a}; }
  Vec3 operator-() const { return {-v[0], -v[1], -v[2]}; }
  Vec3& operator+=(const Vec3& o) {
    v[0] += o.v[0];
    v[1] += o.v[1];
    v[2] += o.v[2];
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    v[0] -= o.v[0];
    v[1] -= o.v[1];
    v[2] -= o.v[2];
    return *this;
  }
};

inline Vec3 operator*(double a, const Vec3& u) { return u * a; }

inline double dot(const Vec3& a, const Vec3& b) {
  return a.v[0] * b.v[0] + a.v[1] * b.v[1] + a.v[2] * b.v[2];
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.v[1] * b.v[2] - a.v[2] * b.v[1],
          a.v[2] * b.v[0] - a.v[0] * b.v[2],
          a.v[0] * b.v[1] - a.v[1] * b.v[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

}  // namespace magtube
