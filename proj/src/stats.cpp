#include "hrve/stats.hpp"

#include <cmath>
#include <string>

#include "hrve/error.hpp"

namespace hrve {

namespace {

SlopeFit linear_fit(std::span<const double> x, std::span<const double> y,
                    std::span<const double> w, bool weighted) {
  const std::size_t n = x.size();
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::invalid_argument, "fit needs distinct abscissae");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.weighted = weighted;
  if (weighted) {
    f.stderr_ = std::sqrt(1.0 / sxx);
  } else if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.stderr_ = std::sqrt(rss / double(n - 2) / sxx);
  }
  return f;
}

} // namespace

SlopeFit fit_loglog_slope(std::span<const FitPoint> points) {
  require(points.size() >= 3, ErrorCode::invalid_argument,
          "slope fit needs at least 3 points");
  std::vector<double> x, y, w;
  bool weighted = true;
  for (const FitPoint& p : points) {
    require(p.scale > 0.0 && std::isfinite(p.scale), ErrorCode::invalid_argument,
            "slope fit: scale must be positive");
    require(p.value > 0.0 && std::isfinite(p.value), ErrorCode::invalid_argument,
            "slope fit: non-positive value " + std::to_string(p.value));
    if (!(p.stderr_ > 0.0)) weighted = false;
    x.push_back(std::log(p.scale));
    y.push_back(std::log(p.value));
  }
  for (const FitPoint& p : points) {
    const double rel = p.stderr_ / p.value;
    w.push_back(weighted ? 1.0 / (rel * rel) : 1.0);
  }
  return linear_fit(x, y, w, weighted);
}

SlopeFit fit_log_linear(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_argument,
          "rate fit needs matching samples");
  std::vector<double> ly, w(x.size(), 1.0);
  for (double v : y) {
    require(v > 0.0, ErrorCode::invalid_argument, "rate fit: non-positive value");
    ly.push_back(std::log(v));
  }
  return linear_fit(x, ly, w, false);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

} // namespace hrve
