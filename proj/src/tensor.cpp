#include "hrve/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hrve {

Tensor Tensor::identity(int d, double c) {
  Tensor t(d);
  for (int i = 0; i < d; ++i) t(i, i) = c;
  return t;
}

Tensor Tensor::transpose() const {
  Tensor t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) t(i, j) = (*this)(j, i);
  return t;
}

Tensor Tensor::operator*(const Tensor& o) const {
  Tensor t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (*this)(i, k) * o(k, j);
      t(i, j) = s;
    }
  return t;
}

Tensor Tensor::operator-(const Tensor& o) const {
  Tensor t(d);
  for (int i = 0; i < 9; ++i) t.a[i] = a[i] - o.a[i];
  return t;
}

Tensor Tensor::scaled(double c) const {
  Tensor t(d);
  for (int i = 0; i < 9; ++i) t.a[i] = a[i] * c;
  return t;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::trace() const {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (*this)(i, i);
  return s;
}

std::array<double, 3> Tensor::sym_eigenvalues() const {
  auto s = [&](int i, int j) { return 0.5 * ((*this)(i, j) + (*this)(j, i)); };
  std::array<double, 3> ev{0.0, 0.0, 0.0};
  if (d == 2) {
    const double m = 0.5 * (s(0, 0) + s(1, 1));
    const double r = std::hypot(0.5 * (s(0, 0) - s(1, 1)), s(0, 1));
    ev = {m - r, m + r, 0.0};
    return ev;
  }
  // Closed-form symmetric 3x3 eigenvalues (trigonometric method).
  const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
  const double q = (s(0, 0) + s(1, 1) + s(2, 2)) / 3.0;
  if (p1 == 0.0) {
    ev = {s(0, 0), s(1, 1), s(2, 2)};
    std::sort(ev.begin(), ev.end());
    return ev;
  }
  const double p2 = (s(0, 0) - q) * (s(0, 0) - q) + (s(1, 1) - q) * (s(1, 1) - q) +
                    (s(2, 2) - q) * (s(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  double b[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (s(i, j) - (i == j ? q : 0.0)) / p;
  const double detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                      b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                      b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(detb / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  ev = {e3, 3.0 * q - e1 - e3, e1};
  std::sort(ev.begin(), ev.end());
  return ev;
}

std::string Tensor::str() const {
  std::ostringstream os;
  os.precision(10);
  os << '[';
  for (int i = 0; i < d; ++i) {
    os << (i ? "; " : "");
    for (int j = 0; j < d; ++j) os << (j ? " " : "") << (*this)(i, j);
  }
  os << ']';
  return os.str();
}

LuResult lu_invert(const Tensor& m) {
  const int d = m.d;
  Tensor lu = m;
  std::array<int, 3> perm{0, 1, 2};
  LuResult res;
  res.inverse = Tensor(d);
  for (int k = 0; k < d; ++k) {
    int p = k;
    for (int i = k + 1; i < d; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
    if (lu(p, k) == 0.0) return res;
    if (p != k) {
      for (int j = 0; j < d; ++j) std::swap(lu(k, j), lu(p, j));
      std::swap(perm[k], perm[p]);
    }
    for (int i = k + 1; i < d; ++i) {
      lu(i, k) /= lu(k, k);
      for (int j = k + 1; j < d; ++j) lu(i, j) -= lu(i, k) * lu(k, j);
    }
  }
  for (int c = 0; c < d; ++c) {
    std::array<double, 3> x{};
    for (int i = 0; i < d; ++i) {
      double s = perm[i] == c ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) s -= lu(i, j) * x[j];
      x[i] = s;
    }
    for (int i = d - 1; i >= 0; --i) {
      double s = x[i];
      for (int j = i + 1; j < d; ++j) s -= lu(i, j) * x[j];
      x[i] = s / lu(i, i);
    }
    for (int i = 0; i < d; ++i) res.inverse(i, c) = x[i];
  }
  auto norm1 = [d](const Tensor& t) {
    double best = 0.0;
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += std::abs(t(i, j));
      best = std::max(best, s);
    }
    return best;
  };
  res.condition_1 = norm1(m) * norm1(res.inverse);
  res.pivot_ok = std::isfinite(res.condition_1);
  return res;
}

} // namespace hrve
