#pragma once

#include <array>
#include <optional>
#include <vector>

#include "hrve/ensemble.hpp"
#include "hrve/operator.hpp"
#include "hrve/tensor.hpp"

namespace hrve {

/// Periodic corrector phi_i with its face flux J_i = t (e_i + grad phi_i).
struct PeriodicCorrector {
  ScalarField phi;
  VectorField flux;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves -div(a (e_i + grad phi_i)) + massive phi_i = 0 on the torus and
/// returns the mean-zero phi_i. massive = 0 is the standard corrector.
PeriodicCorrector periodic_corrector(const CoefficientField& a, int axis,
                                     const SolverOptions& opts = {}, double massive = 0.0);

/// Flux corrector sigma_i, a skew field per direction i. Component (j, k)
/// with j < k is stored; (k, j) is its negative and (j, j) vanishes.
/// Staggering: value at index c sits on the edge x_c - h/2 (e_j + e_k), so
/// forward differences along k land on j-faces.
struct FluxCorrector {
  int d = 2;
  // comp[i][pair_index(j, k)]
  std::array<std::array<ScalarField, 3>, 3> comp;

  static int pair_index(int j, int k);
  /// sigma_{ijk} at edge index c.
  double value(int i, int j, int k, std::size_t c) const;
};

struct CorrectorSet {
  GridSpec grid;
  std::vector<PeriodicCorrector> correctors;
  Tensor abar;
  std::optional<FluxCorrector> sigma;

  const ScalarField& phi(int i) const { return correctors[i].phi; }
};

/// All d periodic correctors, the induced abar (column i is the torus
/// average of J_i) and optionally sigma.
CorrectorSet compute_correctors(const CoefficientField& a, const SolverOptions& opts = {},
                                bool with_sigma = true, double massive = 0.0);

/// q_i = J_i - abar e_i on faces.
VectorField oscillating_flux(const CorrectorSet& set, int i);

/// Solves -Lap sigma_{ijk} = D_j q_{ik} - D_k q_{ij} with the FFT Poisson
/// solver, for every i and j < k.
FluxCorrector flux_corrector(const CorrectorSet& set);

/// Face field whose j-component is sum_k D_k sigma_{ijk}; equals q_i when
/// the correctors are exact.
VectorField sigma_divergence(const FluxCorrector& sigma, const GridSpec& grid, int i);

/// Dirichlet box corrector phi^L_i: zero trace on every face of the box.
struct BoxProblem {
  double L = 0.0;
  double kappa = 0.25;
  GridSpec grid;
  std::vector<ScalarField> phiL;
  std::vector<int> iterations;
};

ScalarField dirichlet_corrector(const CoefficientField& a, int axis,
                                const SolverOptions& opts = {}, int* iterations = nullptr);

BoxProblem solve_box_problem(const CoefficientField& a, double kappa,
                             const SolverOptions& opts = {});

/// Face values of a cell field on the bounded faces of a box, reconstructed
/// from the Dirichlet data (exactly the trace).
std::vector<double> box_boundary_values(const ScalarField& u, const BoundaryCondition& bc = {});

/// Massive boundary-layer corrector on a slab: -div(a grad theta) +
/// theta / T = 0, theta = trace on the bottom face, 0 on the top face.
struct BoundaryLayerField {
  GridSpec grid;
  double T = 0.0;
  ScalarField theta;
  std::vector<double> trace;
  /// Tangential average of |grad theta|^2 per layer (cell-interpolated).
  std::vector<double> energy_profile;
  int iterations = 0;

  /// Face values on the bottom face; the Dirichlet data itself.
  const std::vector<double>& bottom_values() const { return trace; }
  /// Share of the summed layer energy in layers at or above `from_layer`.
  double energy_fraction_above(int from_layer) const;
};

BoundaryLayerField boundary_layer_corrector(const CoefficientField& slab,
                                            const std::vector<double>& trace, double T,
                                            const SolverOptions& opts = {});

/// Face trace of a torus field on the plane between layer n0-1 and layer 0
/// (the bottom face of a slab cut from the torus).
std::vector<double> torus_face_trace(const ScalarField& u);

/// Layer-wise tangential mean of |grad u|^2 with cell-interpolated gradients.
std::vector<double> layer_energy(const ScalarField& u, const BoundaryCondition& bc);

/// Centered cell difference (u(c + e_j) - u(c - e_j)) / 2h on the torus.
ScalarField centered_difference(const ScalarField& u, int j);

/// First-order two-scale expansion hbar + sum_j phi_j dc_j hbar.
ScalarField two_scale_expand(const ScalarField& hbar, const CorrectorSet& set);

/// Both sides of the discrete two-scale residual identity, per unit volume:
/// lhs = -div(t D htilde) and rhs = div g + div(S - P - C), where S is the
/// sigma term, P the phi a term and C the discrete commutators.
struct TwoScaleResidual {
  ScalarField htilde;
  ScalarField lhs;
  ScalarField rhs;
  /// max |div g| + sum_j max |div(t e_j)| max |dc_j hbar|: the size of the
  /// forcing of the identity, through which corrector residuals enter.
  double scale = 0.0;
  double max_violation = 0.0; // max |lhs - rhs| / scale
};

/// hbar must solve solve_constant_tensor_periodic(set.abar, div g).
TwoScaleResidual two_scale_residual(const CoefficientField& a, const CorrectorSet& set,
                                    const ScalarField& hbar, const VectorField& g);

} // namespace hrve
