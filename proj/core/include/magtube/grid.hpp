// Uniform rectilinear grids. Nodes are cell-centered: axis a has n[a] cells
// of width h(a) over [lo[a], hi[a]], with node i at lo + (i + 1/2) h. Walls
// therefore sit half a spacing outside the first/last node, and a plane
// z = c coincides with a cell face exactly when (c - lo) / h is an integer.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace magtube {

enum class Bc { Dirichlet, Neumann };

namespace detail {
inline void check_extents(double lo, double hi, int n, const char* who) {
  if (!(hi > lo)) throw std::invalid_argument(std::string(who) + ": extent must have hi > lo");
  if (n < 3) throw std::invalid_argument(std::string(who) + ": need at least three cells per axis");
}
}  // namespace detail

struct Grid2 {
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<int, 2> n{8, 8};
  // bc[axis][side]: side 0 is the low wall, side 1 the high wall
  std::array<std::array<Bc, 2>, 2> bc{{{Bc::Dirichlet, Bc::Dirichlet},
                                       {Bc::Dirichlet, Bc::Dirichlet}}};

  void validate() const {
    detail::check_extents(lo[0], hi[0], n[0], "Grid2");
    detail::check_extents(lo[1], hi[1], n[1], "Grid2");
  }
  double h(int a) const { return (hi[a] - lo[a]) / n[a]; }
  double coord(int a, int i) const { return lo[a] + (i + 0.5) * h(a); }
  std::int64_t size() const { return std::int64_t(n[0]) * n[1]; }
  std::int64_t index(int i, int j) const { return std::int64_t(i) * n[1] + j; }
  void unindex(std::int64_t id, int& i, int& j) const {
    i = static_cast<int>(id / n[1]);
    j = static_cast<int>(id % n[1]);
  }
};

struct Grid3 {
  std::array<double, 3> lo{-1.0, -1.0, -1.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  std::array<int, 3> n{8, 8, 8};
  std::array<std::array<Bc, 2>, 3> bc{{{Bc::Dirichlet, Bc::Dirichlet},
                                       {Bc::Dirichlet, Bc::Dirichlet},
                                       {Bc::Dirichlet, Bc::Dirichlet}}};

  void validate() const {
    detail::check_extents(lo[0], hi[0], n[0], "Grid3");
    detail::check_extents(lo[1], hi[1], n[1], "Grid3");
    detail::check_extents(lo[2], hi[2], n[2], "Grid3");
  }
  double h(int a) const { return (hi[a] - lo[a]) / n[a]; }
  double coord(int a, int i) const { return lo[a] + (i + 0.5) * h(a); }
  std::int64_t size() const { return std::int64_t(n[0]) * n[1] * n[2]; }
  std::int64_t index(int i, int j, int k) const {
    return (std::int64_t(i) * n[1] + j) * n[2] + k;
  }
  void unindex(std::int64_t id, int& i, int& j, int& k) const {
    k = static_cast<int>(id % n[2]);
    std::int64_t r = id / n[2];
    j = static_cast<int>(r % n[1]);
    i = static_cast<int>(r / n[1]);
  }
};

}  // namespace magtube
