#include "hrve/operator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "multigrid.hpp"

namespace hrve {

std::size_t layer_size(const GridSpec& g, int axis) { return g.cells() / g.n[axis]; }

std::size_t layer_index(const GridSpec& g, int axis, const Index& i) {
  Index e = g.n, j = i;
  e[axis] = 1;
  j[axis] = 0;
  return linear(e, j);
}

void BoundaryCondition::validate(const GridSpec& g) const {
  require(massive >= 0.0 && std::isfinite(massive), ErrorCode::invalid_argument,
          "massive coefficient must be finite and >= 0");
  for (int k = 0; k < 3; ++k) {
    const bool bounded = k < g.d && !g.periodic(k);
    for (const auto* t : {&lower[k], &upper[k]}) {
      if (t->empty()) continue;
      require(bounded, ErrorCode::invalid_argument,
              "Dirichlet trace given on a periodic axis");
      require(t->size() == layer_size(g, k), ErrorCode::grid_mismatch,
              "Dirichlet trace has the wrong size");
    }
  }
}

VectorField transmissibility(const CoefficientField& a) {
  const GridSpec& g = a.grid;
  VectorField t(g);
  for (int k = 0; k < g.d; ++k) {
    const int nk = g.n[k];
    for_each_face(g, k, [&](const Index& f, std::size_t idx) {
      Index lo = f, hi = f;
      lo[k] = f[k] - 1;
      if (g.periodic(k)) {
        lo[k] = wrap(lo[k], nk);
      } else if (f[k] == 0) {
        t.comp[k][idx] = a.normal(linear(g.n, hi), k);
        return;
      } else if (f[k] == nk) {
        t.comp[k][idx] = a.normal(linear(g.n, lo), k);
        return;
      }
      const double al = a.normal(linear(g.n, lo), k);
      const double ah = a.normal(linear(g.n, hi), k);
      t.comp[k][idx] = 2.0 * al * ah / (al + ah);
    });
  }
  return t;
}

namespace detail {

void build_csr(const GridSpec& g, const std::array<std::vector<double>, 3>& w,
               double mass, std::vector<std::size_t>& row_ptr,
               std::vector<std::uint32_t>& col, std::vector<double>& val) {
  const std::size_t n = g.cells();
  row_ptr.assign(n + 1, 0);
  col.clear();
  val.clear();
  col.reserve(n * (2 * g.d + 1));
  val.reserve(n * (2 * g.d + 1));
  std::vector<std::pair<std::uint32_t, double>> row;
  for_each_cell(g, [&](const Index& c, std::size_t k) {
    row.clear();
    double diag = mass;
    for (int ax = 0; ax < g.d; ++ax) {
      const Index fe = face_extents(g, ax);
      Index up = c;
      up[ax] = c[ax] + 1;
      const int nk = g.n[ax];
      if (g.periodic(ax)) up[ax] = wrap(up[ax], nk);
      const double wl = w[ax][linear(fe, c)];
      const double wu = w[ax][linear(fe, up)];
      diag += wl + wu;
      if (g.periodic(ax) || c[ax] > 0) {
        Index nb = c;
        nb[ax] = wrap(c[ax] - 1, nk);
        row.emplace_back(std::uint32_t(linear(g.n, nb)), -wl);
      }
      if (g.periodic(ax) || c[ax] < nk - 1) {
        Index nb = c;
        nb[ax] = wrap(c[ax] + 1, nk);
        row.emplace_back(std::uint32_t(linear(g.n, nb)), -wu);
      }
    }
    row.emplace_back(std::uint32_t(k), diag);
    std::sort(row.begin(), row.end());
    for (const auto& [j, v] : row) {
      col.push_back(j);
      val.push_back(v);
    }
    row_ptr[k + 1] = col.size();
  });
}

void csr_apply(const std::vector<std::size_t>& row_ptr, const std::vector<std::uint32_t>& col,
               const std::vector<double>& val, const std::vector<double>& x,
               std::vector<double>& y) {
  const std::size_t n = row_ptr.size() - 1;
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
    y[i] = s;
  }
}

} // namespace detail

SparseSpdOperator assemble(const CoefficientField& a, const BoundaryCondition& bc) {
  const GridSpec& g = a.grid;
  g.validate();
  bc.validate(g);
  require(a.entries.size() == g.cells() * CoefficientField::components(g.d),
          ErrorCode::grid_mismatch, "coefficient field does not match its grid");
  require(a.is_diagonal(), ErrorCode::unsupported,
          "two-point flux assembly needs diagonal coefficient matrices");

  SparseSpdOperator op;
  op.grid = g;
  op.dimension = g.cells();
  op.singular = g.topology == Topology::torus && bc.massive == 0.0;
  op.mass_diagonal = bc.massive * g.cell_volume();
  op.dirichlet_load.assign(g.cells(), 0.0);

  const double scale = std::pow(g.h, g.d - 2);
  const VectorField t = transmissibility(a);
  for (int k = 0; k < g.d; ++k) {
    op.face_weight[k].resize(t.comp[k].size());
    for_each_face(g, k, [&](const Index& f, std::size_t idx) {
      const bool boundary = !g.periodic(k) && (f[k] == 0 || f[k] == g.n[k]);
      op.face_weight[k][idx] = scale * t.comp[k][idx] * (boundary ? 2.0 : 1.0);
      if (!boundary) return;
      Index cell = f;
      double trace = 0.0;
      if (f[k] == 0) {
        trace = bc.lower_value(k, layer_index(g, k, f));
      } else {
        cell[k] = f[k] - 1;
        trace = bc.upper_value(k, layer_index(g, k, f));
      }
      op.dirichlet_load[linear(g.n, cell)] += op.face_weight[k][idx] * trace;
    });
  }
  detail::build_csr(g, op.face_weight, op.mass_diagonal, op.row_ptr, op.col, op.val);
  return op;
}

void SparseSpdOperator::apply(const std::vector<double>& x, std::vector<double>& y) const {
  detail::csr_apply(row_ptr, col, val, x, y);
}

std::vector<double> SparseSpdOperator::diagonal() const {
  std::vector<double> d(dimension, 0.0);
  for (std::size_t i = 0; i < dimension; ++i)
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
      if (col[p] == i) d[i] = val[p];
  return d;
}

double SparseSpdOperator::entry(std::size_t row, std::size_t column) const {
  for (std::size_t p = row_ptr[row]; p < row_ptr[row + 1]; ++p)
    if (col[p] == column) return val[p];
  return 0.0;
}

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradients

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  for (double& x : v) x -= m;
}

} // namespace

SolveResult solve(const SparseSpdOperator& op, const ScalarField& rhs,
                  const SolverOptions& opts) {
  require_same_grid(op.grid, rhs.grid, "solve");
  const std::size_t n = op.dimension;
  std::vector<double> b = rhs.values;
  if (op.singular) {
    double sum = 0.0, scale = 0.0;
    for (double v : b) {
      sum += v;
      scale += std::abs(v);
    }
    if (std::abs(sum) > 1e-8 * scale)
      throw Error(ErrorCode::invalid_argument,
                  "singular periodic system needs a mean-zero right-hand side");
    remove_mean(b);
  }

  SolveResult res;
  res.u = ScalarField(op.grid);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return res;

  const int cap = opts.max_iters > 0 ? opts.max_iters : 50 * op.grid.max_extent();
  std::unique_ptr<detail::Multigrid> mg;
  std::vector<double> inv_diag;
  if (opts.preconditioner == Preconditioner::multigrid) {
    mg = std::make_unique<detail::Multigrid>(op);
  } else {
    inv_diag = op.diagonal();
    for (double& v : inv_diag) v = 1.0 / v;
  }
  auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
    if (mg) {
      mg->vcycle(r, z);
    } else {
      z.resize(n);
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    }
    if (op.singular) remove_mean(z);
  };

  std::vector<double>& x = res.u.values;
  std::vector<double> r = b, z, p, ap;
  int iters = 0;
  double rel = 1.0;
  // Outer loop restarts from the true residual if the recursive one drifted.
  for (int restart = 0; restart < 4 && iters < cap; ++restart) {
    if (restart > 0) {
      op.apply(x, ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    }
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    while (iters < cap) {
      op.apply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++iters;
      rel = std::sqrt(dot(r, r)) / bnorm;
      if (rel <= opts.tol) break;
      precondition(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    op.apply(x, ap);
    double true_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) true_r += (b[i] - ap[i]) * (b[i] - ap[i]);
    rel = std::sqrt(true_r) / bnorm;
    if (rel <= opts.tol) break;
  }
  if (op.singular) remove_mean(x);
  res.iterations = iters;
  res.relative_residual = rel;
  if (!(rel <= opts.tol))
    throw SolverFailure("conjugate gradients did not converge: relative residual " +
                            std::to_string(rel) + " after " + std::to_string(iters) +
                            " iterations",
                        rel, iters);
  return res;
}

// ---------------------------------------------------------------------------
// Discrete calculus

VectorField gradient(const ScalarField& u, const BoundaryCondition& bc) {
  const GridSpec& g = u.grid;
  bc.validate(g);
  VectorField out(g);
  const double ih = 1.0 / g.h;
  for (int k = 0; k < g.d; ++k) {
    const int nk = g.n[k];
    for_each_face(g, k, [&](const Index& f, std::size_t idx) {
      Index lo = f;
      lo[k] = f[k] - 1;
      if (g.periodic(k)) {
        lo[k] = wrap(lo[k], nk);
        out.comp[k][idx] = (u.at(f) - u.at(lo)) * ih;
      } else if (f[k] == 0) {
        out.comp[k][idx] = (u.at(f) - bc.lower_value(k, layer_index(g, k, f))) * 2.0 * ih;
      } else if (f[k] == nk) {
        out.comp[k][idx] = (bc.upper_value(k, layer_index(g, k, f)) - u.at(lo)) * 2.0 * ih;
      } else {
        out.comp[k][idx] = (u.at(f) - u.at(lo)) * ih;
      }
    });
  }
  return out;
}

ScalarField divergence(const VectorField& f) {
  const GridSpec& g = f.grid;
  ScalarField out(g);
  const double ih = 1.0 / g.h;
  for (int k = 0; k < g.d; ++k) {
    const Index fe = face_extents(g, k);
    for_each_cell(g, [&](const Index& c, std::size_t idx) {
      Index up = c;
      up[k] = g.periodic(k) ? wrap(c[k] + 1, g.n[k]) : c[k] + 1;
      out.values[idx] += (f.comp[k][linear(fe, up)] - f.comp[k][linear(fe, c)]) * ih;
    });
  }
  return out;
}

VectorField flux(const CoefficientField& a, const ScalarField& u, int axis,
                 const BoundaryCondition& bc) {
  require_same_grid(a.grid, u.grid, "flux");
  VectorField grad = gradient(u, bc);
  const VectorField t = transmissibility(a);
  for (int k = 0; k < a.grid.d; ++k) {
    const double shift = k == axis ? 1.0 : 0.0;
    for (std::size_t i = 0; i < grad.comp[k].size(); ++i)
      grad.comp[k][i] = t.comp[k][i] * (shift + grad.comp[k][i]);
  }
  return grad;
}

std::array<ScalarField, 3> face_to_cell(const VectorField& f) {
  const GridSpec& g = f.grid;
  std::array<ScalarField, 3> out;
  for (int k = 0; k < g.d; ++k) {
    out[k] = ScalarField(g);
    const Index fe = face_extents(g, k);
    for_each_cell(g, [&](const Index& c, std::size_t idx) {
      Index up = c;
      up[k] = g.periodic(k) ? wrap(c[k] + 1, g.n[k]) : c[k] + 1;
      out[k].values[idx] = 0.5 * (f.comp[k][linear(fe, c)] + f.comp[k][linear(fe, up)]);
    });
  }
  return out;
}

double inner_cells(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "inner_cells");
  return a.grid.cell_volume() * dot(a.values, b.values);
}

double inner_faces(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "inner_faces");
  double s = 0.0;
  for (int k = 0; k < a.grid.d; ++k) s += dot(a.comp[k], b.comp[k]);
  return a.grid.cell_volume() * s;
}

} // namespace hrve
