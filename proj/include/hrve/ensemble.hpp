#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hrve/grid.hpp"
#include "hrve/rng.hpp"

namespace hrve {

enum class EnsembleKind { gaussian, inclusions, constant, laminate, checkerboard };
enum class CovarianceFamily { squared_exponential, exponential, triangular };

const char* to_string(EnsembleKind k) noexcept;
const char* to_string(CovarianceFamily c) noexcept;
EnsembleKind ensemble_kind_from_string(const std::string& s);
CovarianceFamily covariance_from_string(const std::string& s);

/// Parameters of a coefficient ensemble. Lengths are in the same units as
/// the grid spacing.
struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::gaussian;
  double lambda = 0.25;  // ellipticity ratio, a takes values in [lambda, 1]
  double epsilon = 4.0;  // correlation length (ball radius for inclusions)

  // gaussian
  CovarianceFamily covariance = CovarianceFamily::squared_exponential;
  double variance = 1.0;                 // pointwise variance of the scalar field
  std::optional<double> map_center;      // g(s) = clamp(center + slope s, lambda, 1)
  std::optional<double> map_slope;

  // inclusions
  double intensity = 0.0;  // Poisson intensity per unit volume

  // constant
  double constant = 1.0;

  double center() const { return map_center.value_or(0.5 * (1.0 + lambda)); }
  double slope() const { return map_slope.value_or(0.25 * (1.0 - lambda)); }
  /// Bounded Lipschitz map into [lambda, 1].
  double map(double s) const;

  void validate(const GridSpec& g) const;
};

/// Grid of symmetric d x d matrices, stored as the upper triangle of each
/// cell in row-major order (a11, a12, .., a1d, a22, ..).
struct CoefficientField {
  GridSpec grid;
  std::vector<double> entries;
  double lambda = 1.0;
  double epsilon = 1.0;
  RngSeed seed{};

  static int components(int d) { return d * (d + 1) / 2; }
  static int component_index(int d, int i, int j);

  /// Scalar field a = s(x) Id.
  static CoefficientField isotropic(const GridSpec& g,
                                    const std::vector<double>& s,
                                    double lambda, double epsilon);

  double entry(std::size_t cell, int i, int j) const {
    return entries[cell * components(grid.d) + component_index(grid.d, i, j)];
  }
  /// a_kk, the coefficient seen by fluxes normal to axis k.
  double normal(std::size_t cell, int k) const { return entry(cell, k, k); }

  bool is_diagonal() const;
  /// Returns a copy with every matrix multiplied by c.
  CoefficientField scaled(double c) const;
  /// Same values on a grid of identical shape but different topology.
  CoefficientField with_topology(Topology t) const;
};

/// Smallest and largest eigenvalue over all cells.
struct EllipticityBounds {
  double min_eigenvalue;
  double max_eigenvalue;
};
EllipticityBounds ellipticity_bounds(const CoefficientField& a);

/// Stationary centered Gaussian scalar field on a torus with the ensemble's
/// covariance, synthesized spectrally from counter-indexed white noise.
/// `shift` cyclically offsets the noise index map, so the output equals the
/// unshifted output read at shifted indices.
ScalarField gaussian_scalar_field(const EnsembleSpec& spec, const GridSpec& torus,
                                  const RngSeed& seed, const Index& shift = {});

/// Nonnegative spectral weights of the torus covariance, normalized so they
/// sum to cells * variance. Throws invalid_covariance on negative density.
std::vector<double> spectral_weights(const EnsembleSpec& spec, const GridSpec& torus);

CoefficientField sample_gaussian_field(const EnsembleSpec& spec, const GridSpec& grid,
                                       const RngSeed& seed, const Index& shift = {});

/// A marked Poisson point: integer cell plus fractional offset per axis, so
/// that cyclic integer shifts are exact.
struct MarkedPoint {
  Index cell;
  std::array<double, 3> frac;
  double mark;
};

/// Candidate points of the Poisson process on the torus (unsorted).
std::vector<MarkedPoint> poisson_candidates(const EnsembleSpec& spec,
                                            const GridSpec& torus,
                                            const RngSeed& seed);

/// Hardcore thinning: candidates in increasing mark order, a ball is kept
/// iff it is disjoint from every previously kept ball.
std::vector<MarkedPoint> hardcore_thinning(std::vector<MarkedPoint> candidates,
                                           const GridSpec& torus, double radius);

/// Indicator rasterization of balls at cell centers (periodic).
std::vector<char> rasterize_balls(const std::vector<MarkedPoint>& centers,
                                  const GridSpec& torus, double radius);

CoefficientField sample_inclusion_field(const EnsembleSpec& spec, const GridSpec& grid,
                                        const RngSeed& seed, const Index& shift = {});

CoefficientField sample_structured_field(const EnsembleSpec& spec, const GridSpec& grid);

/// Dispatches on spec.kind.
CoefficientField sample_field(const EnsembleSpec& spec, const GridSpec& grid,
                              const RngSeed& seed);

/// Sub-block [origin, origin + extents) of a field, placed on `target`.
CoefficientField crop(const CoefficientField& a, const Index& origin,
                      const GridSpec& target);

/// Relabels axes: output axis k carries input axis perm[k].
CoefficientField permute_axes(const CoefficientField& a, const std::array<int, 3>& perm);

} // namespace hrve
