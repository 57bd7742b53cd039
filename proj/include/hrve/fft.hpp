#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "hrve/grid.hpp"
#include "hrve/tensor.hpp"

namespace hrve {

/// Real-to-complex transforms over the first d axes of a grid (FFTW
/// backed). Unnormalized in both directions.
class RealFFT {
public:
  RealFFT(int d, const Index& extents);
  ~RealFFT();
  RealFFT(const RealFFT&) = delete;
  RealFFT& operator=(const RealFFT&) = delete;

  /// Extents of the half spectrum: last used axis is n/2 + 1.
  const Index& spectral_extents() const { return spec_; }
  std::size_t spectral_size() const;

  void forward(std::span<const double> in, std::vector<std::complex<double>>& out);
  /// Consumes `in`.
  void inverse(std::vector<std::complex<double>>& in, std::span<double> out);

  /// Signed integer frequency of a spectral index along an axis.
  int frequency(int axis, int index) const {
    return index <= n_[axis] / 2 ? index : index - n_[axis];
  }

private:
  struct Plans;
  int d_;
  Index n_;
  Index spec_;
  std::unique_ptr<Plans> plans_;
};

/// Symbol of the standard (2d+1)-point negative Laplacian at integer
/// frequency m on a torus of extents n and spacing h.
double laplacian_symbol(int d, const Index& n, double h, const Index& m);

/// Solves -Lap_h u = rhs on the torus by FFT diagonalization; rhs and result
/// are per unit volume. Rejects rhs whose mean exceeds 1e-10 of its scale.
ScalarField poisson_periodic(const ScalarField& rhs);

/// Solves the constant-tensor homogenized problem -div G(u) = rhs on the
/// torus, with G_k = abar_kk D_k u + sum_{j != k} abar_kj avg_k(dc_j u),
/// D_k the face difference, avg_k the face average and dc_j the centered
/// cell difference. Returns the mean-zero solution.
ScalarField solve_constant_tensor_periodic(const Tensor& abar, const ScalarField& rhs);

} // namespace hrve
