#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hrve/ensemble.hpp"
#include "hrve/grid.hpp"

namespace hrve {

/// Dirichlet traces on the bounded faces plus the zero-order (massive)
/// coefficient 1/T. Which axes are periodic follows the grid topology.
/// Traces are indexed like a face layer (the bounded axis collapsed to one);
/// an empty trace means homogeneous data.
struct BoundaryCondition {
  std::array<std::vector<double>, 3> lower;
  std::array<std::vector<double>, 3> upper;
  double massive = 0.0;

  static BoundaryCondition homogeneous(double massive = 0.0) {
    BoundaryCondition bc;
    bc.massive = massive;
    return bc;
  }

  void validate(const GridSpec& g) const;
  double lower_value(int axis, std::size_t face_cell) const {
    return lower[axis].empty() ? 0.0 : lower[axis][face_cell];
  }
  double upper_value(int axis, std::size_t face_cell) const {
    return upper[axis].empty() ? 0.0 : upper[axis][face_cell];
  }
};

/// Number of cells in the face layer orthogonal to `axis`.
std::size_t layer_size(const GridSpec& g, int axis);
/// Position of a face (or cell) index inside the layer orthogonal to `axis`.
std::size_t layer_index(const GridSpec& g, int axis, const Index& i);

/// Assembled h^d (-div(a grad .) + massive) with two-point fluxes.
/// Off-diagonal entries are stored in CSR; the structured face weights are
/// kept alongside for the multigrid preconditioner.
struct SparseSpdOperator {
  GridSpec grid;
  std::size_t dimension = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  bool symmetric = true;
  /// Pure torus with no zero-order term: kernel is the constants.
  bool singular = false;

  /// h^{d-2} * transmissibility on each face; boundary faces already carry
  /// the half-cell factor 2.
  std::array<std::vector<double>, 3> face_weight;
  /// Zero-order diagonal contribution per cell (massive * h^d).
  double mass_diagonal = 0.0;
  /// Right-hand-side contribution of the Dirichlet traces.
  std::vector<double> dirichlet_load;

  void apply(const std::vector<double>& x, std::vector<double>& y) const;
  std::vector<double> diagonal() const;
  double entry(std::size_t row, std::size_t column) const;
};

/// Face transmissibility: harmonic mean of the normal coefficients of the
/// two adjacent cells; bounded faces use the single adjacent cell.
VectorField transmissibility(const CoefficientField& a);

SparseSpdOperator assemble(const CoefficientField& a, const BoundaryCondition& bc);

enum class Preconditioner { jacobi, multigrid };

struct SolverOptions {
  double tol = 1e-10;  // relative residual
  int max_iters = 0;   // 0 selects 50 * max extent
  Preconditioner preconditioner = Preconditioner::jacobi;
};

struct SolveResult {
  ScalarField u;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients on op u = rhs. `rhs` is in assembled
/// (volume-integrated) scaling. On the singular torus the rhs is projected
/// to mean zero when within tolerance and the mean-zero solution returned.
SolveResult solve(const SparseSpdOperator& op, const ScalarField& rhs,
                  const SolverOptions& opts = {});

/// Face differences D_k u, using the Dirichlet traces of `bc` on bounded
/// faces (distance h/2).
VectorField gradient(const ScalarField& u, const BoundaryCondition& bc = {});

/// Per-unit-volume divergence of a face field.
ScalarField divergence(const VectorField& f);

/// Face fluxes t_k (delta_{ik} + D_k u). Pass axis = -1 for t_k D_k u.
VectorField flux(const CoefficientField& a, const ScalarField& u, int axis,
                 const BoundaryCondition& bc = {});

/// Cell values of a face field: mean of the two faces of each cell.
std::array<ScalarField, 3> face_to_cell(const VectorField& f);

/// Discrete inner products with cell-volume weights.
double inner_cells(const ScalarField& a, const ScalarField& b);
double inner_faces(const VectorField& a, const VectorField& b);

} // namespace hrve
