#include "hrve/grid.hpp"

#include <algorithm>
#include <cmath>

namespace hrve {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::invalid_argument: return "invalid argument";
  case ErrorCode::resolution: return "resolution";
  case ErrorCode::invalid_covariance: return "invalid covariance";
  case ErrorCode::unsupported: return "unsupported";
  case ErrorCode::grid_mismatch: return "grid mismatch";
  case ErrorCode::singular_system: return "singular system";
  case ErrorCode::solver_failure: return "solver failure";
  case ErrorCode::consistency: return "consistency";
  case ErrorCode::configuration: return "configuration";
  case ErrorCode::usage: return "usage";
  case ErrorCode::io: return "io";
  }
  return "unknown";
}

const char* to_string(Topology t) noexcept {
  switch (t) {
  case Topology::torus: return "torus";
  case Topology::box: return "box";
  case Topology::slab: return "slab";
  }
  return "unknown";
}

Topology topology_from_string(const std::string& s) {
  if (s == "torus" || s == "periodic-torus") return Topology::torus;
  if (s == "box") return Topology::box;
  if (s == "slab") return Topology::slab;
  fail(ErrorCode::invalid_argument, "unknown topology '" + s + "'");
}

GridSpec GridSpec::cube(int d, int cells, double h, Topology t) {
  GridSpec g;
  g.d = d;
  g.n = {cells, cells, d == 3 ? cells : 1};
  g.h = h;
  g.topology = t;
  g.validate();
  return g;
}

void GridSpec::validate() const {
  require(d == 2 || d == 3, ErrorCode::invalid_argument,
          "grid dimension must be 2 or 3");
  require(h > 0.0 && std::isfinite(h), ErrorCode::invalid_argument,
          "grid spacing must be positive");
  for (int k = 0; k < d; ++k)
    require(n[k] >= 4, ErrorCode::invalid_argument,
            "grid needs at least 4 cells per axis");
  for (int k = d; k < 3; ++k)
    require(n[k] == 1, ErrorCode::invalid_argument,
            "unused grid axes must have extent 1");
}

double GridSpec::cell_volume() const { return std::pow(h, d); }

int GridSpec::max_extent() const { return std::max({n[0], n[1], n[2]}); }

double ScalarField::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / double(values.size());
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

VectorField::VectorField(const GridSpec& g, double fill) : grid(g) {
  for (int k = 0; k < g.d; ++k) comp[k].assign(g.faces(k), fill);
}

} // namespace hrve
