#pragma once

#include <string>
#include <vector>

#include "hrve/correctors.hpp"
#include "hrve/tensor.hpp"

namespace hrve {

enum class EstimatorKind { standard, oversampled, new_formula, reference };

const char* to_string(EstimatorKind k) noexcept;
EstimatorKind estimator_from_string(const std::string& s);

/// Condition number of B above which the new formula is flagged singular.
inline constexpr double kSingularCondition = 1e6;

struct EffectiveTensor {
  Tensor matrix;
  EstimatorKind kind = EstimatorKind::standard;
  /// 1-norm condition number of B (new formula); 1 otherwise.
  double condition = 1.0;
  bool singular = false;
  double L = 0.0;
  double kappa = 0.0;
  RngSeed seed{};
  int solver_iterations = 0;

  // reference only
  Tensor standard_error;
  int samples = 1;
};

/// Cells whose centers lie in [kappa L, (1 - kappa) L]^d. Throws when a side
/// of the window has fewer than 4 cells.
struct Window {
  Index lo{0, 0, 0};
  Index hi{1, 1, 1}; // exclusive
  std::size_t cells() const;
};
Window interior_window(const GridSpec& box, double kappa);

/// Window averages of the cell-interpolated gradient e_i + grad phi^L_i
/// (column i of B) and flux a (e_i + grad phi^L_i) (column i of Q).
struct WindowAverages {
  Tensor gradient;
  Tensor flux;
};
WindowAverages window_averages(const BoxProblem& box, const CoefficientField& a,
                               const Window& w);

EffectiveTensor standard_rve(const BoxProblem& box, const CoefficientField& a);
EffectiveTensor oversampled_rve(const BoxProblem& box, const CoefficientField& a,
                                double kappa);

/// Q B^-1 from window averages. Flags (does not throw) when cond(B) exceeds
/// kSingularCondition; throws singular_system when elimination hits a zero
/// pivot.
EffectiveTensor new_formula_rve(const BoxProblem& box, const CoefficientField& a,
                                double kappa);
EffectiveTensor new_formula_from(const Tensor& gradient_avg, const Tensor& flux_avg);

/// Torus average of the corrected fluxes of one periodic sample.
EffectiveTensor torus_effective(const CoefficientField& torus_field,
                                const SolverOptions& opts = {});

/// Monte Carlo mean over `samples` independent torus realizations (streams
/// 0 .. samples-1 of `base`) with entrywise standard errors.
EffectiveTensor reference_effective(const EnsembleSpec& spec, const GridSpec& torus,
                                    int samples, std::uint64_t base,
                                    const SolverOptions& opts = {}, int threads = 1);

/// Mean and entrywise standard error of per-sample tensors.
EffectiveTensor combine_reference(const std::vector<Tensor>& per_sample);

} // namespace hrve
