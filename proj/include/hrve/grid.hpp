#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hrve/error.hpp"

namespace hrve {

/// Periodic torus, Dirichlet box, or slab (axis 0 bounded, others periodic).
enum class Topology : std::uint8_t { torus = 0, box = 1, slab = 2 };

const char* to_string(Topology t) noexcept;
Topology topology_from_string(const std::string& s);

using Index = std::array<int, 3>;

/// Uniform Cartesian cell grid. Axis 0 is the slowest index in memory and
/// plays the role of the x-perp axis on slabs. Unused axes have extent 1.
struct GridSpec {
  int d = 2;
  Index n{1, 1, 1};
  double h = 1.0;
  Topology topology = Topology::torus;

  static GridSpec cube(int d, int cells, double h, Topology t);

  void validate() const;

  int extent(int axis) const { return n[axis]; }
  bool periodic(int axis) const {
    return topology == Topology::torus ||
           (topology == Topology::slab && axis != 0);
  }
  /// Number of face layers along `axis`: face j is the lower face of cell j;
  /// bounded axes carry one extra top face.
  int face_extent(int axis) const { return n[axis] + (periodic(axis) ? 0 : 1); }

  std::size_t cells() const {
    return std::size_t(n[0]) * std::size_t(n[1]) * std::size_t(n[2]);
  }
  std::size_t faces(int axis) const {
    Index e = n;
    e[axis] = face_extent(axis);
    return std::size_t(e[0]) * std::size_t(e[1]) * std::size_t(e[2]);
  }
  double side(int axis) const { return n[axis] * h; }
  double cell_volume() const;
  int max_extent() const;

  bool operator==(const GridSpec&) const = default;
};

/// Row-major strides for an extent triple.
inline std::size_t linear(const Index& e, const Index& i) {
  return (std::size_t(i[0]) * e[1] + i[1]) * e[2] + i[2];
}

inline Index unravel(const Index& e, std::size_t k) {
  Index i{};
  i[2] = int(k % e[2]);
  k /= e[2];
  i[1] = int(k % e[1]);
  i[0] = int(k / e[1]);
  return i;
}

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

/// Extents of the face array along `axis`.
inline Index face_extents(const GridSpec& g, int axis) {
  Index e = g.n;
  e[axis] = g.face_extent(axis);
  return e;
}

inline void require_same_grid(const GridSpec& a, const GridSpec& b,
                              const char* where) {
  if (!(a == b))
    throw Error(ErrorCode::grid_mismatch,
                std::string(where) + ": fields live on different grids");
}

/// One value per cell.
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), values(g.cells(), fill) {}

  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }
  double& at(const Index& i) { return values[linear(grid.n, i)]; }
  double at(const Index& i) const { return values[linear(grid.n, i)]; }
  std::size_t size() const { return values.size(); }

  double mean() const;
  double max_abs() const;
};

/// Face-centered field: component k holds one value per k-face, laid out
/// with `face_extents(grid, k)`.
struct VectorField {
  GridSpec grid;
  std::array<std::vector<double>, 3> comp;

  VectorField() = default;
  explicit VectorField(const GridSpec& g, double fill = 0.0);

  double& at(int axis, const Index& i) {
    return comp[axis][linear(face_extents(grid, axis), i)];
  }
  double at(int axis, const Index& i) const {
    return comp[axis][linear(face_extents(grid, axis), i)];
  }
};

/// Calls f(index, linear) for every cell of `g` in memory order.
template <class F> void for_each_cell(const GridSpec& g, F&& f) {
  std::size_t k = 0;
  for (int i0 = 0; i0 < g.n[0]; ++i0)
    for (int i1 = 0; i1 < g.n[1]; ++i1)
      for (int i2 = 0; i2 < g.n[2]; ++i2, ++k)
        f(Index{i0, i1, i2}, k);
}

/// Calls f(index, linear) for every face along `axis` in memory order.
template <class F> void for_each_face(const GridSpec& g, int axis, F&& f) {
  const Index e = face_extents(g, axis);
  std::size_t k = 0;
  for (int i0 = 0; i0 < e[0]; ++i0)
    for (int i1 = 0; i1 < e[1]; ++i1)
      for (int i2 = 0; i2 < e[2]; ++i2, ++k)
        f(Index{i0, i1, i2}, k);
}

/// Center coordinate of a cell along an axis.
inline double cell_center(const GridSpec& g, int i) { return (i + 0.5) * g.h; }

} // namespace hrve
