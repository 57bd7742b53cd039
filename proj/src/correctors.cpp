#include "hrve/correctors.hpp"

#include <algorithm>
#include <cmath>

#include "hrve/fft.hpp"

namespace hrve {

namespace {

Index shifted(const Index& c, int axis, int by, const GridSpec& g) {
  Index s = c;
  s[axis] = wrap(c[axis] + by, g.n[axis]);
  return s;
}

/// h^d div(T e_i): assembled right-hand side of the corrector problem.
ScalarField corrector_rhs(const CoefficientField& a, int axis) {
  const GridSpec& g = a.grid;
  VectorField te(g);
  te.comp[axis] = transmissibility(a).comp[axis];
  ScalarField rhs = divergence(te);
  const double vol = g.cell_volume();
  for (double& v : rhs.values) v *= vol;
  return rhs;
}

} // namespace

PeriodicCorrector periodic_corrector(const CoefficientField& a, int axis,
                                     const SolverOptions& opts, double massive) {
  require(a.grid.topology == Topology::torus, ErrorCode::invalid_argument,
          "periodic_corrector needs a torus");
  require(axis >= 0 && axis < a.grid.d, ErrorCode::invalid_argument, "axis out of range");
  const SparseSpdOperator op = assemble(a, BoundaryCondition::homogeneous(massive));
  SolveResult sr = solve(op, corrector_rhs(a, axis), opts);
  PeriodicCorrector pc;
  pc.phi = std::move(sr.u);
  if (massive == 0.0) {
    // Exact zero mean, independent of solver roundoff.
    const double m = pc.phi.mean();
    for (double& v : pc.phi.values) v -= m;
  }
  pc.flux = flux(a, pc.phi, axis);
  pc.iterations = sr.iterations;
  pc.relative_residual = sr.relative_residual;
  return pc;
}

int FluxCorrector::pair_index(int j, int k) {
  if (j > k) std::swap(j, k);
  // (0,1) -> 0, (0,2) -> 1, (1,2) -> 2
  return j == 0 ? k - 1 : 2;
}

double FluxCorrector::value(int i, int j, int k, std::size_t c) const {
  if (j == k) return 0.0;
  const double v = comp[i][pair_index(j, k)].values[c];
  return j < k ? v : -v;
}

CorrectorSet compute_correctors(const CoefficientField& a, const SolverOptions& opts,
                                bool with_sigma, double massive) {
  const GridSpec& g = a.grid;
  CorrectorSet set;
  set.grid = g;
  set.abar = Tensor(g.d);
  for (int i = 0; i < g.d; ++i) {
    set.correctors.push_back(periodic_corrector(a, i, opts, massive));
    const auto& J = set.correctors.back().flux;
    for (int k = 0; k < g.d; ++k) {
      double s = 0.0;
      for (double v : J.comp[k]) s += v;
      set.abar(k, i) = s / double(J.comp[k].size());
    }
  }
  if (with_sigma && massive == 0.0) set.sigma = flux_corrector(set);
  return set;
}

VectorField oscillating_flux(const CorrectorSet& set, int i) {
  VectorField q = set.correctors[i].flux;
  for (int k = 0; k < set.grid.d; ++k)
    for (double& v : q.comp[k]) v -= set.abar(k, i);
  return q;
}

FluxCorrector flux_corrector(const CorrectorSet& set) {
  const GridSpec& g = set.grid;
  require(g.topology == Topology::torus, ErrorCode::invalid_argument,
          "flux corrector needs a torus");
  FluxCorrector sigma;
  sigma.d = g.d;
  const double ih = 1.0 / g.h;
  for (int i = 0; i < g.d; ++i) {
    const VectorField q = oscillating_flux(set, i);
    for (int j = 0; j < g.d; ++j)
      for (int k = j + 1; k < g.d; ++k) {
        // rhs on the (j,k) edge grid: D_j q_{ik} - D_k q_{ij}
        ScalarField rhs(g);
        for_each_cell(g, [&](const Index& c, std::size_t idx) {
          const double djqk =
              (q.comp[k][idx] - q.comp[k][linear(g.n, shifted(c, j, -1, g))]) * ih;
          const double dkqj =
              (q.comp[j][idx] - q.comp[j][linear(g.n, shifted(c, k, -1, g))]) * ih;
          rhs.values[idx] = djqk - dkqj;
        });
        try {
          sigma.comp[i][FluxCorrector::pair_index(j, k)] = poisson_periodic(rhs);
        } catch (const Error& e) {
          throw Error(ErrorCode::consistency,
                      std::string("flux corrector right-hand side: ") + e.what());
        }
      }
  }
  return sigma;
}

VectorField sigma_divergence(const FluxCorrector& sigma, const GridSpec& g, int i) {
  VectorField out(g);
  const double ih = 1.0 / g.h;
  for (int j = 0; j < g.d; ++j)
    for_each_cell(g, [&](const Index& c, std::size_t idx) {
      double s = 0.0;
      for (int k = 0; k < g.d; ++k) {
        if (k == j) continue;
        s += (sigma.value(i, j, k, linear(g.n, shifted(c, k, 1, g))) -
              sigma.value(i, j, k, idx)) * ih;
      }
      out.comp[j][idx] = s;
    });
  return out;
}

// ---------------------------------------------------------------------------
// Box

ScalarField dirichlet_corrector(const CoefficientField& a, int axis,
                                const SolverOptions& opts, int* iterations) {
  require(a.grid.topology == Topology::box, ErrorCode::invalid_argument,
          "dirichlet_corrector needs a box");
  require(axis >= 0 && axis < a.grid.d, ErrorCode::invalid_argument, "axis out of range");
  const SparseSpdOperator op = assemble(a, BoundaryCondition::homogeneous());
  SolveResult sr = solve(op, corrector_rhs(a, axis), opts);
  if (iterations) *iterations = sr.iterations;
  return std::move(sr.u);
}

BoxProblem solve_box_problem(const CoefficientField& a, double kappa, const SolverOptions& opts) {
  require(kappa > 0.0 && kappa <= 0.25, ErrorCode::invalid_argument,
          "kappa must lie in (0, 1/4]");
  BoxProblem box;
  box.L = a.grid.side(0);
  box.kappa = kappa;
  box.grid = a.grid;
  for (int i = 0; i < a.grid.d; ++i) {
    int it = 0;
    box.phiL.push_back(dirichlet_corrector(a, i, opts, &it));
    box.iterations.push_back(it);
  }
  return box;
}

std::vector<double> box_boundary_values(const ScalarField& u, const BoundaryCondition& bc) {
  const GridSpec& g = u.grid;
  std::vector<double> out;
  for (int k = 0; k < g.d; ++k) {
    if (g.periodic(k)) continue;
    for_each_face(g, k, [&](const Index& f, std::size_t) {
      if (f[k] == 0) out.push_back(bc.lower_value(k, layer_index(g, k, f)));
      else if (f[k] == g.n[k]) out.push_back(bc.upper_value(k, layer_index(g, k, f)));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slab

double BoundaryLayerField::energy_fraction_above(int from_layer) const {
  double total = 0.0, above = 0.0;
  for (std::size_t r = 0; r < energy_profile.size(); ++r) {
    total += energy_profile[r];
    if (int(r) >= from_layer) above += energy_profile[r];
  }
  return total > 0.0 ? above / total : 0.0;
}

std::vector<double> layer_energy(const ScalarField& u, const BoundaryCondition& bc) {
  const GridSpec& g = u.grid;
  const auto cells = face_to_cell(gradient(u, bc));
  std::vector<double> e(g.n[0], 0.0);
  for_each_cell(g, [&](const Index& c, std::size_t idx) {
    double s = 0.0;
    for (int k = 0; k < g.d; ++k) s += cells[k].values[idx] * cells[k].values[idx];
    e[c[0]] += s;
  });
  const double per_layer = double(layer_size(g, 0));
  for (double& v : e) v /= per_layer;
  return e;
}

BoundaryLayerField boundary_layer_corrector(const CoefficientField& slab,
                                            const std::vector<double>& trace, double T,
                                            const SolverOptions& opts) {
  const GridSpec& g = slab.grid;
  require(g.topology == Topology::slab, ErrorCode::invalid_argument,
          "boundary_layer_corrector needs a slab");
  require(T > 0.0 && std::isfinite(T), ErrorCode::invalid_argument, "T must be positive");
  const double H = g.side(0);
  require(T <= (H / 4.0) * (H / 4.0) * (1.0 + 1e-12), ErrorCode::configuration,
          "T exceeds (H/4)^2; the massive term no longer localizes the slab");
  require(trace.size() == layer_size(g, 0), ErrorCode::grid_mismatch,
          "trace size differs from the slab bottom face");

  BoundaryCondition bc = BoundaryCondition::homogeneous(1.0 / T);
  bc.lower[0] = trace;
  const SparseSpdOperator op = assemble(slab, bc);
  ScalarField rhs(g);
  rhs.values = op.dirichlet_load;
  SolveResult sr = solve(op, rhs, opts);

  BoundaryLayerField out;
  out.grid = g;
  out.T = T;
  out.theta = std::move(sr.u);
  out.trace = trace;
  out.iterations = sr.iterations;
  out.energy_profile = layer_energy(out.theta, bc);
  return out;
}

std::vector<double> torus_face_trace(const ScalarField& u) {
  const GridSpec& g = u.grid;
  std::vector<double> t(layer_size(g, 0));
  for_each_cell(g, [&](const Index& c, std::size_t idx) {
    if (c[0] != 0) return;
    Index top = c;
    top[0] = g.n[0] - 1;
    t[layer_index(g, 0, c)] = 0.5 * (u.values[idx] + u.at(top));
  });
  return t;
}

// ---------------------------------------------------------------------------
// Two-scale expansion

ScalarField centered_difference(const ScalarField& u, int j) {
  const GridSpec& g = u.grid;
  ScalarField out(g);
  const double f = 0.5 / g.h;
  for_each_cell(g, [&](const Index& c, std::size_t idx) {
    out.values[idx] = (u.at(shifted(c, j, 1, g)) - u.at(shifted(c, j, -1, g))) * f;
  });
  return out;
}

ScalarField two_scale_expand(const ScalarField& hbar, const CorrectorSet& set) {
  require_same_grid(hbar.grid, set.grid, "two_scale_expand");
  require(hbar.grid.topology == Topology::torus, ErrorCode::invalid_argument,
          "two-scale expansion runs on a torus");
  ScalarField out = hbar;
  for (int j = 0; j < set.grid.d; ++j) {
    const ScalarField dj = centered_difference(hbar, j);
    for (std::size_t c = 0; c < out.size(); ++c) out.values[c] += set.phi(j)[c] * dj[c];
  }
  return out;
}

TwoScaleResidual two_scale_residual(const CoefficientField& a, const CorrectorSet& set,
                                    const ScalarField& hbar, const VectorField& g) {
  const GridSpec& gr = a.grid;
  require_same_grid(gr, set.grid, "two_scale_residual");
  require_same_grid(gr, hbar.grid, "two_scale_residual");
  require_same_grid(gr, g.grid, "two_scale_residual");
  require(set.sigma.has_value(), ErrorCode::invalid_argument,
          "two_scale_residual needs the flux corrector");
  const int d = gr.d;
  const double ih = 1.0 / gr.h;
  const FluxCorrector& sigma = *set.sigma;

  TwoScaleResidual out;
  out.htilde = two_scale_expand(hbar, set);

  // lhs = -div(t D htilde) = op htilde / h^d
  const SparseSpdOperator op = assemble(a, BoundaryCondition::homogeneous());
  out.lhs = ScalarField(gr);
  op.apply(out.htilde.values, out.lhs.values);
  const double ivol = 1.0 / gr.cell_volume();
  for (double& v : out.lhs.values) v *= ivol;

  std::vector<ScalarField> psi;
  for (int j = 0; j < d; ++j) psi.push_back(centered_difference(hbar, j));
  const VectorField t = transmissibility(a);
  const VectorField dh = gradient(hbar);

  auto at = [&](const ScalarField& f, const Index& c, int ax, int by) {
    return f.values[linear(gr.n, shifted(c, ax, by, gr))];
  };
  // w_{j,kl} at edge c: mean of psi_j over the four cells around the edge.
  auto w_edge = [&](int j, int k, int l, const Index& c) {
    const int p = std::min(k, l), q = std::max(k, l);
    const Index cp = shifted(c, p, -1, gr);
    return 0.25 * (psi[j].at(c) + psi[j].at(cp) + at(psi[j], c, q, -1) +
                   at(psi[j], cp, q, -1));
  };

  // Face field F = S - P - C1 - C2.
  VectorField F(gr);
  for (int k = 0; k < d; ++k)
    for_each_cell(gr, [&](const Index& c, std::size_t idx) {
      const double tk = t.comp[k][idx];
      auto avg_k = [&](const ScalarField& f) { return 0.5 * (f.values[idx] + at(f, c, k, -1)); };
      auto diff_k = [&](const ScalarField& f) { return (f.values[idx] - at(f, c, k, -1)) * ih; };

      double S = 0.0, P = 0.0, C2 = 0.0;
      for (int j = 0; j < d; ++j) {
        P += tk * avg_k(set.phi(j)) * diff_k(psi[j]);
        for (int l = 0; l < d; ++l) {
          if (l == k) continue;
          const Index cl = shifted(c, l, 1, gr);
          const std::size_t il = linear(gr.n, cl);
          const double s0 = sigma.value(j, k, l, idx), s1 = sigma.value(j, k, l, il);
          const double w0 = w_edge(j, k, l, c), w1 = w_edge(j, k, l, cl);
          S += 0.5 * (s0 + s1) * (w1 - w0) * ih;
          C2 += (avg_k(psi[j]) - 0.5 * (w0 + w1)) * (s1 - s0) * ih;
        }
      }
      const double C1 = (tk - set.abar(k, k)) * (dh.comp[k][idx] - avg_k(psi[k]));
      F.comp[k][idx] = S - P - C1 - C2;
    });

  const ScalarField divg = divergence(g);
  const ScalarField divF = divergence(F);
  out.rhs = ScalarField(gr);
  for (std::size_t c = 0; c < out.rhs.size(); ++c) out.rhs.values[c] = divg[c] + divF[c];

  double viol = 0.0;
  for (std::size_t c = 0; c < out.rhs.size(); ++c)
    viol = std::max(viol, std::abs(out.lhs[c] - out.rhs[c]));
  out.scale = divg.max_abs();
  for (int j = 0; j < d; ++j) {
    VectorField te(gr);
    te.comp[j] = t.comp[j];
    out.scale += divergence(te).max_abs() * psi[j].max_abs();
  }
  out.max_violation = out.scale > 0.0 ? viol / out.scale : viol;
  return out;
}

} // namespace hrve
