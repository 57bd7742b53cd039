#pragma once

#include <array>
#include <string>

namespace hrve {

/// Small dense d x d matrix (d <= 3), row-major.
struct Tensor {
  int d = 2;
  std::array<double, 9> a{};

  Tensor() = default;
  explicit Tensor(int dim) : d(dim) {}

  static Tensor identity(int d, double c = 1.0);

  double& operator()(int i, int j) { return a[i * 3 + j]; }
  double operator()(int i, int j) const { return a[i * 3 + j]; }

  Tensor transpose() const;
  Tensor operator*(const Tensor& o) const;
  Tensor operator-(const Tensor& o) const;
  Tensor scaled(double c) const;
  double max_abs() const;
  double trace() const;
  /// Eigenvalues of the symmetric part, ascending.
  std::array<double, 3> sym_eigenvalues() const;
  std::string str() const;
};

/// LU with partial pivoting; `pivot_ok` is false when a zero pivot occurs.
struct LuResult {
  Tensor inverse;
  double condition_1 = 0.0; // ||A||_1 ||A^-1||_1
  bool pivot_ok = false;
};
LuResult lu_invert(const Tensor& m);

} // namespace hrve
