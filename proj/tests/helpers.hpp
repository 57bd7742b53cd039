#pragma once

#include <cmath>
#include <vector>

#include "hrve/ensemble.hpp"

namespace test {

inline hrve::EnsembleSpec gaussian(double eps = 4.0, double lambda = 0.25) {
  hrve::EnsembleSpec s;
  s.kind = hrve::EnsembleKind::gaussian;
  s.epsilon = eps;
  s.lambda = lambda;
  return s;
}

/// High-contrast gaussian used by the statistical experiments.
inline hrve::EnsembleSpec contrast_gaussian(double eps) {
  hrve::EnsembleSpec s = gaussian(eps, 0.1);
  s.map_slope = 1.0;
  return s;
}

inline hrve::EnsembleSpec structured(hrve::EnsembleKind k, double eps, double lambda = 0.25,
                                     double c = 1.0) {
  hrve::EnsembleSpec s;
  s.kind = k;
  s.epsilon = eps;
  s.lambda = lambda;
  s.constant = c;
  return s;
}

inline hrve::CoefficientField constant_field(const hrve::GridSpec& g, double c) {
  return hrve::CoefficientField::isotropic(g, std::vector<double>(g.cells(), c), 0.25, 1.0);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

} // namespace test
