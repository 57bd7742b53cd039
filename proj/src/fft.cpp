#include "hrve/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace hrve {

namespace {
// FFTW planning is not thread safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

struct RealFFT::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};

RealFFT::RealFFT(int d, const Index& extents)
    : d_(d), n_(extents), spec_(extents), plans_(std::make_unique<Plans>()) {
  spec_[d - 1] = n_[d - 1] / 2 + 1;
  std::size_t nreal = std::size_t(n_[0]) * n_[1] * n_[2];
  std::lock_guard lock(planner_mutex());
  plans_->real = fftw_alloc_real(nreal);
  plans_->cplx = fftw_alloc_complex(spectral_size());
  int dims[3] = {n_[0], n_[1], n_[2]};
  plans_->fwd = fftw_plan_dft_r2c(d, dims, plans_->real, plans_->cplx, FFTW_ESTIMATE);
  plans_->inv = fftw_plan_dft_c2r(d, dims, plans_->cplx, plans_->real, FFTW_ESTIMATE);
}

RealFFT::~RealFFT() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plans_->fwd);
  fftw_destroy_plan(plans_->inv);
  fftw_free(plans_->real);
  fftw_free(plans_->cplx);
}

std::size_t RealFFT::spectral_size() const {
  return std::size_t(spec_[0]) * spec_[1] * spec_[2];
}

void RealFFT::forward(std::span<const double> in,
                      std::vector<std::complex<double>>& out) {
  std::memcpy(plans_->real, in.data(), in.size() * sizeof(double));
  fftw_execute(plans_->fwd);
  out.resize(spectral_size());
  std::memcpy(static_cast<void*>(out.data()), plans_->cplx, out.size() * sizeof(fftw_complex));
}

void RealFFT::inverse(std::vector<std::complex<double>>& in, std::span<double> out) {
  std::memcpy(plans_->cplx, in.data(), in.size() * sizeof(fftw_complex));
  fftw_execute(plans_->inv);
  std::memcpy(out.data(), plans_->real, out.size() * sizeof(double));
}

double laplacian_symbol(int d, const Index& n, double h, const Index& m) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    const double t = std::sin(std::numbers::pi * m[k] / n[k]);
    s += 4.0 * t * t;
  }
  return s / (h * h);
}

namespace {

void require_mean_zero(const ScalarField& rhs, const char* where) {
  double sum = 0.0, scale = 0.0;
  for (double v : rhs.values) {
    sum += v;
    scale += std::abs(v);
  }
  if (std::abs(sum) > 1e-10 * scale)
    throw Error(ErrorCode::invalid_argument,
                std::string(where) + ": right-hand side is not mean-zero");
}

/// Divides the spectrum by symbol(m) and returns the mean-zero inverse.
template <class Symbol>
ScalarField spectral_solve(const ScalarField& rhs, Symbol&& symbol) {
  const GridSpec& g = rhs.grid;
  RealFFT fft(g.d, g.n);
  std::vector<std::complex<double>> spec;
  fft.forward(rhs.values, spec);
  const Index se = fft.spectral_extents();
  std::size_t k = 0;
  for (int i0 = 0; i0 < se[0]; ++i0)
    for (int i1 = 0; i1 < se[1]; ++i1)
      for (int i2 = 0; i2 < se[2]; ++i2, ++k) {
        const Index m{fft.frequency(0, i0), fft.frequency(1, i1),
                      g.d == 3 ? fft.frequency(2, i2) : 0};
        if (m == Index{0, 0, 0}) {
          spec[k] = 0.0;
          continue;
        }
        spec[k] /= symbol(m);
      }
  ScalarField u(g);
  fft.inverse(spec, u.values);
  const double norm = 1.0 / double(g.cells());
  for (double& v : u.values) v *= norm;
  return u;
}

} // namespace

ScalarField poisson_periodic(const ScalarField& rhs) {
  require(rhs.grid.topology == Topology::torus, ErrorCode::invalid_argument,
          "poisson_periodic needs a torus");
  require_mean_zero(rhs, "poisson_periodic");
  const GridSpec& g = rhs.grid;
  return spectral_solve(rhs, [&](const Index& m) {
    return laplacian_symbol(g.d, g.n, g.h, m);
  });
}

ScalarField solve_constant_tensor_periodic(const Tensor& abar, const ScalarField& rhs) {
  require(rhs.grid.topology == Topology::torus, ErrorCode::invalid_argument,
          "constant-tensor solve needs a torus");
  require(abar.d == rhs.grid.d, ErrorCode::grid_mismatch,
          "tensor dimension differs from grid dimension");
  require_mean_zero(rhs, "solve_constant_tensor_periodic");
  const GridSpec& g = rhs.grid;
  // Symbol of -div G: sum_k abar_kk c_k^2 + sum_{j != k} abar_kj s_k s_j with
  // c_k = 2 sin(theta_k / 2) / h and s_k = sin(theta_k) / h.
  return spectral_solve(rhs, [&](const Index& m) {
    std::array<double, 3> c{}, s{};
    for (int k = 0; k < g.d; ++k) {
      const double th = 2.0 * std::numbers::pi * m[k] / g.n[k];
      c[k] = 2.0 * std::sin(0.5 * th) / g.h;
      s[k] = std::sin(th) / g.h;
    }
    double sym = 0.0;
    for (int k = 0; k < g.d; ++k)
      for (int j = 0; j < g.d; ++j)
        sym += (j == k) ? abar(k, k) * c[k] * c[k] : abar(k, j) * s[k] * s[j];
    return sym;
  });
}

} // namespace hrve
