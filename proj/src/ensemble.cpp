#include "hrve/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrve/fft.hpp"

namespace hrve {

namespace {
constexpr std::uint64_t kPurposeWhiteNoise = 1;
constexpr std::uint64_t kPurposePoisson = 2;
} // namespace

const char* to_string(EnsembleKind k) noexcept {
  switch (k) {
  case EnsembleKind::gaussian: return "gaussian";
  case EnsembleKind::inclusions: return "inclusions";
  case EnsembleKind::constant: return "constant";
  case EnsembleKind::laminate: return "laminate";
  case EnsembleKind::checkerboard: return "checkerboard";
  }
  return "unknown";
}

const char* to_string(CovarianceFamily c) noexcept {
  switch (c) {
  case CovarianceFamily::squared_exponential: return "squared-exponential";
  case CovarianceFamily::exponential: return "exponential";
  case CovarianceFamily::triangular: return "triangular";
  }
  return "unknown";
}

EnsembleKind ensemble_kind_from_string(const std::string& s) {
  for (auto k : {EnsembleKind::gaussian, EnsembleKind::inclusions, EnsembleKind::constant,
                 EnsembleKind::laminate, EnsembleKind::checkerboard})
    if (s == to_string(k)) return k;
  fail(ErrorCode::invalid_argument, "unknown ensemble kind '" + s + "'");
}

CovarianceFamily covariance_from_string(const std::string& s) {
  for (auto c : {CovarianceFamily::squared_exponential, CovarianceFamily::exponential,
                 CovarianceFamily::triangular})
    if (s == to_string(c)) return c;
  fail(ErrorCode::invalid_argument, "unknown covariance family '" + s + "'");
}

double EnsembleSpec::map(double s) const {
  return std::clamp(center() + slope() * s, lambda, 1.0);
}

void EnsembleSpec::validate(const GridSpec& g) const {
  require(lambda > 0.0 && lambda <= 1.0, ErrorCode::invalid_argument,
          "lambda must lie in (0, 1]");
  require(std::isfinite(epsilon) && epsilon > 0.0, ErrorCode::invalid_argument,
          "epsilon must be positive");
  const bool random = kind == EnsembleKind::gaussian || kind == EnsembleKind::inclusions;
  if (random || kind == EnsembleKind::laminate || kind == EnsembleKind::checkerboard)
    require(epsilon >= g.h, ErrorCode::resolution,
            "correlation length epsilon is smaller than the grid spacing h");
  if (kind == EnsembleKind::gaussian)
    require(variance >= 0.0, ErrorCode::invalid_argument, "variance must be >= 0");
  if (kind == EnsembleKind::inclusions)
    require(std::isfinite(intensity) && intensity >= 0.0, ErrorCode::invalid_argument,
            "inclusion intensity must be >= 0");
  if (kind == EnsembleKind::constant)
    require(constant >= lambda && constant <= 1.0, ErrorCode::invalid_argument,
            "constant value must lie in [lambda, 1]");
}

// ---------------------------------------------------------------------------
// CoefficientField

int CoefficientField::component_index(int d, int i, int j) {
  if (i > j) std::swap(i, j);
  // Upper triangle, row-major.
  return i * d - i * (i - 1) / 2 + (j - i);
}

CoefficientField CoefficientField::isotropic(const GridSpec& g,
                                             const std::vector<double>& s,
                                             double lambda, double epsilon) {
  CoefficientField a;
  a.grid = g;
  a.lambda = lambda;
  a.epsilon = epsilon;
  const int nc = components(g.d);
  a.entries.assign(g.cells() * nc, 0.0);
  for (std::size_t c = 0; c < g.cells(); ++c)
    for (int k = 0; k < g.d; ++k)
      a.entries[c * nc + component_index(g.d, k, k)] = s[c];
  return a;
}

bool CoefficientField::is_diagonal() const {
  const int nc = components(grid.d);
  for (std::size_t c = 0; c < grid.cells(); ++c)
    for (int i = 0; i < grid.d; ++i)
      for (int j = i + 1; j < grid.d; ++j)
        if (entries[c * nc + component_index(grid.d, i, j)] != 0.0) return false;
  return true;
}

CoefficientField CoefficientField::scaled(double c) const {
  CoefficientField out = *this;
  for (double& v : out.entries) v *= c;
  return out;
}

CoefficientField CoefficientField::with_topology(Topology t) const {
  CoefficientField out = *this;
  out.grid.topology = t;
  return out;
}

EllipticityBounds ellipticity_bounds(const CoefficientField& a) {
  EllipticityBounds b{INFINITY, -INFINITY};
  for (std::size_t c = 0; c < a.grid.cells(); ++c) {
    Tensor t(a.grid.d);
    for (int i = 0; i < a.grid.d; ++i)
      for (int j = 0; j < a.grid.d; ++j) t(i, j) = a.entry(c, i, j);
    const auto ev = t.sym_eigenvalues();
    b.min_eigenvalue = std::min(b.min_eigenvalue, ev[0]);
    b.max_eigenvalue = std::max(b.max_eigenvalue, ev[a.grid.d - 1]);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Gaussian ensemble

std::vector<double> spectral_weights(const EnsembleSpec& spec, const GridSpec& torus) {
  const int d = torus.d;
  RealFFT fft(d, torus.n);
  const Index se = fft.spectral_extents();
  std::vector<double> w(fft.spectral_size(), 0.0);

  if (spec.covariance == CovarianceFamily::triangular) {
    // Tent covariance evaluated in real space with minimum-image distances.
    std::vector<double> cov(torus.cells());
    for_each_cell(torus, [&](const Index& i, std::size_t k) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const int m = std::min(i[a], torus.n[a] - i[a]);
        r2 += double(m) * m;
      }
      cov[k] = std::max(0.0, 1.0 - std::sqrt(r2) * torus.h / spec.epsilon);
    });
    std::vector<std::complex<double>> s;
    fft.forward(cov, s);
    double smax = 0.0;
    for (const auto& v : s) smax = std::max(smax, v.real());
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k].real() < -1e-12 * smax)
        throw Error(ErrorCode::invalid_covariance,
                    "covariance has a negative spectral density on this torus");
      w[k] = std::max(0.0, s[k].real());
    }
  } else {
    std::size_t k = 0;
    for (int i0 = 0; i0 < se[0]; ++i0)
      for (int i1 = 0; i1 < se[1]; ++i1)
        for (int i2 = 0; i2 < se[2]; ++i2, ++k) {
          const Index idx{i0, i1, i2};
          double k2 = 0.0;
          for (int a = 0; a < d; ++a) {
            const double kk = 2.0 * std::numbers::pi * fft.frequency(a, idx[a]) /
                              (torus.n[a] * torus.h);
            k2 += kk * kk;
          }
          const double e2 = spec.epsilon * spec.epsilon;
          w[k] = spec.covariance == CovarianceFamily::squared_exponential
                     ? std::exp(-0.5 * e2 * k2)
                     : std::pow(1.0 + e2 * k2, -0.5 * (d + 1));
        }
  }

  // Normalize: the half spectrum counts interior modes of the last axis twice.
  const int last = d - 1;
  double total = 0.0;
  std::size_t k = 0;
  for (int i0 = 0; i0 < se[0]; ++i0)
    for (int i1 = 0; i1 < se[1]; ++i1)
      for (int i2 = 0; i2 < se[2]; ++i2, ++k) {
        const int il = Index{i0, i1, i2}[last];
        const bool self_conjugate = il == 0 || (torus.n[last] % 2 == 0 && il == torus.n[last] / 2);
        total += w[k] * (self_conjugate ? 1.0 : 2.0);
      }
  const double scale = total > 0.0 ? double(torus.cells()) * spec.variance / total : 0.0;
  for (double& v : w) v *= scale;
  return w;
}

ScalarField gaussian_scalar_field(const EnsembleSpec& spec, const GridSpec& torus,
                                  const RngSeed& seed, const Index& shift) {
  require(torus.topology == Topology::torus, ErrorCode::invalid_argument,
          "gaussian synthesis runs on a torus");
  const auto w = spectral_weights(spec, torus);
  std::vector<double> noise(torus.cells());
  for_each_cell(torus, [&](const Index& i, std::size_t k) {
    Index s{};
    for (int a = 0; a < 3; ++a) s[a] = wrap(i[a] + shift[a], torus.n[a]);
    noise[k] = normal_at(seed, kPurposeWhiteNoise, linear(torus.n, s));
  });
  RealFFT fft(torus.d, torus.n);
  std::vector<std::complex<double>> spec_noise;
  fft.forward(noise, spec_noise);
  for (std::size_t k = 0; k < spec_noise.size(); ++k) spec_noise[k] *= std::sqrt(w[k]);
  ScalarField out(torus);
  fft.inverse(spec_noise, out.values);
  const double norm = 1.0 / double(torus.cells());
  for (double& v : out.values) v *= norm;
  return out;
}

namespace {

/// Sampling torus for a target grid: the grid itself when periodic, twice
/// its extent when it is a box (cropped afterwards).
GridSpec generation_torus(const GridSpec& g) {
  GridSpec t = g;
  t.topology = Topology::torus;
  if (g.topology != Topology::torus)
    for (int a = 0; a < g.d; ++a)
      if (!g.periodic(a)) t.n[a] = 2 * g.n[a];
  return t;
}

} // namespace

CoefficientField sample_gaussian_field(const EnsembleSpec& spec, const GridSpec& grid,
                                       const RngSeed& seed, const Index& shift) {
  require(spec.kind == EnsembleKind::gaussian, ErrorCode::invalid_argument,
          "sample_gaussian_field needs kind = gaussian");
  grid.validate();
  spec.validate(grid);
  const GridSpec torus = generation_torus(grid);
  const ScalarField s = gaussian_scalar_field(spec, torus, seed, shift);
  std::vector<double> vals(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) vals[k] = spec.map(s[k]);
  CoefficientField full = CoefficientField::isotropic(torus, vals, spec.lambda, spec.epsilon);
  full.seed = seed;
  if (torus == grid) return full;
  return crop(full, Index{0, 0, 0}, grid);
}

// ---------------------------------------------------------------------------
// Inclusions

std::vector<MarkedPoint> poisson_candidates(const EnsembleSpec& spec, const GridSpec& torus,
                                            const RngSeed& seed) {
  require(std::isfinite(spec.intensity) && spec.intensity >= 0.0, ErrorCode::invalid_argument,
          "inclusion intensity must be >= 0");
  double volume = 1.0;
  for (int a = 0; a < torus.d; ++a) volume *= torus.side(a);
  const double mean = spec.intensity * volume;
  CounterRng rng(seed, kPurposePoisson);
  // Poisson count via unit-rate exponential arrivals on [0, mean).
  std::size_t count = 0;
  for (double t = rng.exponential(); t < mean; t += rng.exponential()) ++count;
  std::vector<MarkedPoint> pts(count);
  for (auto& p : pts) {
    p.cell = {0, 0, 0};
    p.frac = {0.0, 0.0, 0.0};
    for (int a = 0; a < torus.d; ++a) {
      const double x = rng.uniform() * torus.n[a];
      p.cell[a] = std::min(int(x), torus.n[a] - 1);
      p.frac[a] = x - p.cell[a];
    }
    p.mark = rng.uniform();
  }
  return pts;
}

namespace {

/// Periodic squared distance (in units of h^2) between two marked points,
/// or between a point and a cell center when `b_center` is set.
double periodic_dist2(const MarkedPoint& p, const Index& cell,
                      const std::array<double, 3>& frac, const GridSpec& torus) {
  double r2 = 0.0;
  for (int a = 0; a < torus.d; ++a) {
    int di = wrap(cell[a] - p.cell[a], torus.n[a]);
    if (2 * di > torus.n[a]) di -= torus.n[a];
    double dx = di + (frac[a] - p.frac[a]);
    // Re-wrap if the fractional part pushed us past half the torus.
    if (dx > 0.5 * torus.n[a]) dx -= torus.n[a];
    if (dx < -0.5 * torus.n[a]) dx += torus.n[a];
    r2 += dx * dx;
  }
  return r2;
}

} // namespace

std::vector<MarkedPoint> hardcore_thinning(std::vector<MarkedPoint> candidates,
                                           const GridSpec& torus, double radius) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MarkedPoint& a, const MarkedPoint& b) { return a.mark < b.mark; });
  const double min_d2 = std::pow(2.0 * radius / torus.h, 2);
  std::vector<MarkedPoint> kept;
  for (const auto& p : candidates) {
    bool disjoint = true;
    for (const auto& q : kept)
      if (periodic_dist2(q, p.cell, p.frac, torus) < min_d2) {
        disjoint = false;
        break;
      }
    if (disjoint) kept.push_back(p);
  }
  return kept;
}

std::vector<char> rasterize_balls(const std::vector<MarkedPoint>& centers,
                                  const GridSpec& torus, double radius) {
  std::vector<char> inside(torus.cells(), 0);
  const double r_cells = radius / torus.h;
  const double r2 = r_cells * r_cells;
  const int reach = int(std::ceil(r_cells)) + 1;
  const std::array<double, 3> mid{0.5, 0.5, 0.5};
  for (const auto& p : centers) {
    Index lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < torus.d; ++a) {
      lo[a] = p.cell[a] - reach;
      hi[a] = p.cell[a] + reach;
    }
    for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
      for (int i1 = lo[1]; i1 <= hi[1]; ++i1)
        for (int i2 = lo[2]; i2 <= hi[2]; ++i2) {
          const Index c{wrap(i0, torus.n[0]), wrap(i1, torus.n[1]), wrap(i2, torus.n[2])};
          if (periodic_dist2(p, c, mid, torus) < r2) inside[linear(torus.n, c)] = 1;
        }
  }
  return inside;
}

CoefficientField sample_inclusion_field(const EnsembleSpec& spec, const GridSpec& grid,
                                        const RngSeed& seed, const Index& shift) {
  require(spec.kind == EnsembleKind::inclusions, ErrorCode::invalid_argument,
          "sample_inclusion_field needs kind = inclusions");
  grid.validate();
  spec.validate(grid);
  const GridSpec torus = generation_torus(grid);
  auto candidates = poisson_candidates(spec, torus, seed);
  for (auto& p : candidates)
    for (int a = 0; a < torus.d; ++a) p.cell[a] = wrap(p.cell[a] - shift[a], torus.n[a]);
  const auto kept = hardcore_thinning(std::move(candidates), torus, spec.epsilon);
  const auto inside = rasterize_balls(kept, torus, spec.epsilon);
  std::vector<double> vals(torus.cells());
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = inside[k] ? 1.0 : spec.lambda;
  CoefficientField full = CoefficientField::isotropic(torus, vals, spec.lambda, spec.epsilon);
  full.seed = seed;
  if (torus == grid) return full;
  return crop(full, Index{0, 0, 0}, grid);
}

// ---------------------------------------------------------------------------
// Deterministic fields

CoefficientField sample_structured_field(const EnsembleSpec& spec, const GridSpec& grid) {
  grid.validate();
  spec.validate(grid);
  std::vector<double> vals(grid.cells());
  auto band = [&](int i) { return int(std::floor(cell_center(grid, i) / spec.epsilon)); };
  switch (spec.kind) {
  case EnsembleKind::constant:
    std::fill(vals.begin(), vals.end(), spec.constant);
    break;
  case EnsembleKind::laminate:
    for_each_cell(grid, [&](const Index& i, std::size_t k) {
      vals[k] = band(i[0]) % 2 == 0 ? 1.0 : spec.lambda;
    });
    break;
  case EnsembleKind::checkerboard:
    require(grid.d == 2, ErrorCode::unsupported, "checkerboard fields are 2-D only");
    for_each_cell(grid, [&](const Index& i, std::size_t k) {
      vals[k] = (band(i[0]) + band(i[1])) % 2 == 0 ? 1.0 : spec.lambda;
    });
    break;
  default:
    fail(ErrorCode::invalid_argument, "sample_structured_field needs a deterministic kind");
  }
  return CoefficientField::isotropic(grid, vals, spec.lambda, spec.epsilon);
}

CoefficientField sample_field(const EnsembleSpec& spec, const GridSpec& grid,
                              const RngSeed& seed) {
  switch (spec.kind) {
  case EnsembleKind::gaussian: return sample_gaussian_field(spec, grid, seed);
  case EnsembleKind::inclusions: return sample_inclusion_field(spec, grid, seed);
  default: {
    auto a = sample_structured_field(spec, grid);
    a.seed = seed;
    return a;
  }
  }
}

CoefficientField crop(const CoefficientField& a, const Index& origin, const GridSpec& target) {
  for (int k = 0; k < 3; ++k)
    require(origin[k] + target.n[k] <= a.grid.n[k] || a.grid.periodic(k),
            ErrorCode::invalid_argument, "crop window exceeds the source grid");
  CoefficientField out;
  out.grid = target;
  out.lambda = a.lambda;
  out.epsilon = a.epsilon;
  out.seed = a.seed;
  const int nc = CoefficientField::components(a.grid.d);
  out.entries.resize(target.cells() * nc);
  for_each_cell(target, [&](const Index& i, std::size_t k) {
    Index s{};
    for (int ax = 0; ax < 3; ++ax) s[ax] = wrap(origin[ax] + i[ax], a.grid.n[ax]);
    const std::size_t src = linear(a.grid.n, s);
    std::copy_n(a.entries.begin() + src * nc, nc, out.entries.begin() + k * nc);
  });
  return out;
}

CoefficientField permute_axes(const CoefficientField& a, const std::array<int, 3>& perm) {
  const int d = a.grid.d;
  CoefficientField out = a;
  for (int k = 0; k < d; ++k) out.grid.n[k] = a.grid.n[perm[k]];
  const int nc = CoefficientField::components(d);
  for_each_cell(out.grid, [&](const Index& i, std::size_t k) {
    Index src{0, 0, 0};
    for (int ax = 0; ax < d; ++ax) src[perm[ax]] = i[ax];
    const std::size_t s = linear(a.grid.n, src);
    for (int p = 0; p < d; ++p)
      for (int q = p; q < d; ++q)
        out.entries[k * nc + CoefficientField::component_index(d, p, q)] =
            a.entry(s, perm[p], perm[q]);
  });
  return out;
}

} // namespace hrve
