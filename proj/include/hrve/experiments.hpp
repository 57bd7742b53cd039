#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrve/correctors.hpp"
#include "hrve/rve.hpp"
#include "hrve/stats.hpp"

namespace hrve {

// ---------------------------------------------------------------------------
// RVE sweep

struct SweepConfig {
  EnsembleSpec ensemble;
  int d = 2;
  double h = 1.0;
  std::vector<double> L_over_eps{8, 16, 32};
  double kappa = 0.25;
  int samples = 200;
  /// Cells per side of the reference torus; 0 selects 4 * largest box.
  int reference_cells = 0;
  int reference_samples = 100;
  /// Accept a reference torus below 4x the largest box (grid-capped d = 3
  /// runs).
  bool small_reference = false;
  std::uint64_t seed = 1;
  SolverOptions solver;
  int threads = 1;

  void validate() const;
  int box_cells(double L_over_eps) const;
  int reference_extent() const;
};

/// One CSV row: a per-sample estimator value or a reference torus sample.
struct SampleRow {
  std::uint64_t stream = 0;
  double L_over_eps = 0.0;
  double kappa = 0.0;
  EstimatorKind kind = EstimatorKind::standard;
  Tensor tensor;
  double condition = 1.0;
  int solver_iters = 0;

  /// New-formula rows flagged singular (or non-finite) are excluded from
  /// every statistic.
  bool excluded() const;
};

/// Rows in deterministic order: reference samples by stream, then per L the
/// samples by stream with kinds standard, oversampled, new-formula.
std::vector<SampleRow> run_rve_samples(const SweepConfig& cfg);

void write_sweep_csv(std::ostream& os, std::span<const SampleRow> rows, int d);
std::vector<SampleRow> read_sweep_csv(std::istream& is, int* d = nullptr);

struct ErrorStat {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Statistics of one (L, estimator) cell. Scalar statistics use the
/// isotropic part trace/d; entrywise tensors are kept alongside.
struct EstimatorStats {
  double L_over_eps = 0.0;
  EstimatorKind kind = EstimatorKind::standard;
  int attempted = 0;
  int reported = 0;
  int excluded = 0;
  Tensor mean;
  Tensor fluctuation; // population std per entry
  Tensor systematic;  // |mean - reference| per entry
  Tensor total;       // RMS of (sample - reference) per entry
  ErrorStat fluct;
  ErrorStat sys;
  ErrorStat tot;
};

struct SlopeSet {
  std::optional<SlopeFit> fluctuation;
  std::optional<SlopeFit> systematic;
  std::optional<SlopeFit> total;
  /// Largest change of the systematic slope when the reference moves by
  /// +-2 standard errors.
  double systematic_band = 0.0;
};

struct SweepResult {
  int d = 2;
  Tensor reference;
  Tensor reference_se;
  double reference_scalar = 0.0;
  double reference_scalar_se = 0.0;
  int reference_samples = 0;
  std::vector<EstimatorStats> stats;
  std::map<EstimatorKind, SlopeSet> slopes;

  const EstimatorStats* find(EstimatorKind kind, double L_over_eps) const;
  std::vector<double> scales() const;
  double exclusion_rate(EstimatorKind kind) const;
};

/// Pure function of the rows; needs at least one reference row.
SweepResult aggregate_sweep(std::span<const SampleRow> rows, int d);

SweepResult rve_sweep(const SweepConfig& cfg, std::vector<SampleRow>* rows = nullptr);

// ---------------------------------------------------------------------------
// Boundary-layer decay

struct DecayConfig {
  EnsembleSpec ensemble;
  int d = 2;
  double h = 1.0;
  double height_over_eps = 64;
  double width_over_eps = 64;
  std::optional<double> T; // default (H/4)^2
  int samples = 100;
  std::uint64_t seed = 1;
  SolverOptions solver;
  int threads = 1;
  double delta = 0.5;

  void validate() const;
  GridSpec slab() const;
  double massive_T() const;
};

struct DecayLayer {
  double x_perp_over_eps;
  double rms;
  double stderr_;
};

struct DecayProfile {
  std::vector<DecayLayer> layers;
  std::optional<SlopeFit> fit; // exponent of the RMS in x_perp
  double delta = 0.5;
  double T = 0.0;
  int samples = 0;
  /// Share of the layer energy in the top quarter of the slab.
  double top_quarter_fraction = 0.0;
  bool valid = true;
  int solver_iters = 0;
};

/// Annealed RMS of the gradient of theta^T per layer, pooled over the d
/// corrector directions. Fit over x_perp in [2 eps, H/4].
DecayProfile boundary_layer_decay(const DecayConfig& cfg);

/// Energy profile -> DecayProfile statistics (sample energies per layer).
DecayProfile decay_profile_from(const std::vector<std::vector<double>>& sample_energy,
                                const GridSpec& slab, double epsilon, double T);

void write_decay_csv(std::ostream& os, const DecayProfile& p);
DecayProfile read_decay_csv(std::istream& is);

/// Single tangential Fourier mode cos(2 pi m x_t / W) along the last axis,
/// sampled at the bottom face.
std::vector<double> single_mode_trace(const GridSpec& slab, int mode);

struct ModalControl {
  double fitted_rate = 0.0;
  double analytic_rate = 0.0;
  double relative_error = 0.0;
};
/// Constant unit field, single-mode trace: exponential rate of the layer
/// RMS against sqrt(k^2 + 1/T).
ModalControl modal_decay_control(const GridSpec& slab, double epsilon, double T, int mode,
                                 const SolverOptions& opts = {});

// ---------------------------------------------------------------------------
// Localization

struct LocalizationEntry {
  double T = 0.0;
  double gamma = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

struct LocalizationReport {
  std::vector<LocalizationEntry> entries;
  double max_ratio = 0.0;
  /// Largest ratio(gamma / 2) / ratio(gamma) over the T grid; 0 when no
  /// halved pair was tested.
  double max_halving_growth = 0.0;
};

/// Weighted energies of u = theta^T and of g = cutoff * trace with weight
/// exp(-gamma |x - x0| / sqrt T), x0 the center of the bottom face. The
/// cutoff is max(0, 1 - x_perp / epsilon).
LocalizationReport localization_check(const CoefficientField& slab,
                                      const std::vector<double>& trace,
                                      std::span<const double> T_list,
                                      std::span<const double> gammas,
                                      const SolverOptions& opts = {});

// ---------------------------------------------------------------------------
// Two-scale residual

struct TwoScaleConfig {
  EnsembleSpec ensemble;
  int d = 2;
  double h = 1.0;
  std::vector<double> eps_over_L{1.0 / 8, 1.0 / 16, 1.0 / 32};
  int samples = 50;
  std::uint64_t seed = 1;
  SolverOptions solver;
  int threads = 1;

  void validate() const;
};

struct TwoScaleSample {
  double eps_over_L = 0.0;
  std::uint64_t stream = 0;
  double violation = 0.0;
  double ratio = 0.0; // |grad(h - htilde)| / |grad(h - hbar)|
};

struct TwoScaleLevel {
  double eps_over_L = 0.0;
  int samples = 0;
  double mean_ratio = 0.0;
  double ratio_se = 0.0;
  double max_violation = 0.0;
};

struct TwoScaleReport {
  std::vector<TwoScaleSample> samples;
  std::vector<TwoScaleLevel> levels;
  double max_violation = 0.0;
  double tolerance = 0.0; // 10 x solver tolerance
  bool decreasing = false;
};

/// Smooth deterministic face field with zero torus mean.
VectorField smooth_forcing(const GridSpec& torus);

/// One sample: correctors, heterogeneous and homogenized solves, identity
/// check and the H1-seminorm ratio.
TwoScaleSample two_scale_sample(const CoefficientField& torus_field, const SolverOptions& opts);

/// Throws consistency when the identity is violated beyond 10 x tol.
TwoScaleReport two_scale_residual_experiment(const TwoScaleConfig& cfg);

/// Per-level statistics in order of first appearance; no tolerance check.
TwoScaleReport summarize_two_scale(std::vector<TwoScaleSample> samples, double tolerance);

void write_two_scale_csv(std::ostream& os, const TwoScaleReport& r);
std::vector<TwoScaleSample> read_two_scale_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Manifest

std::uint64_t fnv1a(std::string_view text);

/// Ordered key = value document; the content hash covers every line that is
/// not itself a manifest.* key.
class Manifest {
public:
  void set(const std::string& key, const std::string& value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string text() const;

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest round-trip decimal form.
std::string format_double(double v);

} // namespace hrve
