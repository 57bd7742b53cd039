#pragma once

#include <span>
#include <vector>

namespace hrve {

struct FitPoint {
  double scale;
  double value;
  double stderr_ = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
  bool weighted = false;
};

/// Least squares of log(value) on log(scale). When every point carries a
/// positive standard error the fit is weighted by the inverse squared
/// relative error and the slope error is the weighted formula error;
/// otherwise the fit is unweighted with the residual-based error.
/// Needs >= 3 points with distinct scales; non-positive values throw.
SlopeFit fit_loglog_slope(std::span<const FitPoint> points);

/// Slope of log(y) against x (unweighted), i.e. the rate r in y ~ exp(-r x)
/// reported as -r.
SlopeFit fit_log_linear(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
/// 1/M normalization.
double population_std(std::span<const double> v);
/// 1/(M-1) normalization; 0 for M < 2.
double sample_std(std::span<const double> v);

} // namespace hrve
