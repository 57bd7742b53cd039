#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "hrve/correctors.hpp"
#include "hrve/experiments.hpp"
#include "hrve/fft.hpp"
#include "hrve/rve.hpp"

using namespace hrve;

namespace {

SolverOptions tight() {
  SolverOptions o;
  o.tol = 1e-12;
  o.preconditioner = Preconditioner::multigrid;
  return o;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Solves a tridiagonal system (sub, diag, super) by forward elimination.
std::vector<double> thomas(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                           std::vector<double> rhs) {
  const std::size_t n = di.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - up[i] * x[i + 1]) / di[i];
  return x;
}

} // namespace

TEST_CASE("constant coefficient gives vanishing correctors and abar = c Id") {
  const GridSpec g = GridSpec::cube(2, 16, 1.0, Topology::torus);
  const auto set = compute_correctors(test::constant_field(g, 1.7), tight());
  for (int i = 0; i < 2; ++i) CHECK(set.phi(i).max_abs() <= 1e-14);
  CHECK((set.abar - Tensor::identity(2, 1.7)).max_abs() <= 1e-14);
  REQUIRE(set.sigma.has_value());
  for (int i = 0; i < 2; ++i) CHECK(set.sigma->comp[i][FluxCorrector::pair_index(0, 1)].max_abs() <= 1e-13);
}

TEST_CASE("periodic laminate matches the discrete harmonic and arithmetic means") {
  const double lambda = 0.2;
  const GridSpec g = GridSpec::cube(2, 32, 1.0, Topology::torus);
  const auto a = sample_structured_field(test::structured(EnsembleKind::laminate, 4.0, lambda), g);
  const auto t = transmissibility(a);
  double inv = 0, arith = 0;
  for (int i = 0; i < 32; ++i) inv += 1.0 / t.at(0, {i, 0, 0});
  for (double v : t.comp[1]) arith += v;
  const double harmonic = 32.0 / inv;
  arith /= double(t.comp[1].size());

  const auto set = compute_correctors(a, tight());
  CHECK(set.abar(0, 0) == doctest::Approx(harmonic).epsilon(1e-8));
  CHECK(set.abar(1, 1) == doctest::Approx(arith).epsilon(1e-8));
  CHECK(std::abs(set.abar(0, 1)) <= 1e-10);
  CHECK(std::abs(set.abar(1, 0)) <= 1e-10);
  CHECK(set.phi(1).max_abs() <= 1e-12);
  // Corrected flux across the bands is constant.
  for (double v : set.correctors[0].flux.comp[0]) CHECK(v == doctest::Approx(harmonic).epsilon(1e-8));
}

TEST_CASE("random torus correctors: zero means, symmetric abar inside Voigt-Reuss") {
  for (int d : {2, 3}) {
    const GridSpec g = GridSpec::cube(d, d == 2 ? 32 : 12, 1.0, Topology::torus);
    const auto a = sample_field(test::gaussian(d == 2 ? 4.0 : 2.0), g, {7, 0});
    const auto set = compute_correctors(a, tight(), d == 2);
    const auto t = transmissibility(a);
    for (int i = 0; i < d; ++i) {
      CHECK(std::abs(set.phi(i).mean()) <= 1e-12);
      const auto grad = gradient(set.phi(i));
      for (int k = 0; k < d; ++k) {
        double s = 0;
        for (double v : grad.comp[k]) s += v;
        CHECK(std::abs(s) <= 1e-9);
      }
      double arith = 0, inv = 0;
      for (double v : t.comp[i]) arith += v, inv += 1.0 / v;
      const double n = double(t.comp[i].size());
      CHECK(set.abar(i, i) <= arith / n + 1e-12);
      CHECK(set.abar(i, i) >= n / inv - 1e-12);
    }
    CHECK((set.abar - set.abar.transpose()).max_abs() <= 1e-8);
  }
}

TEST_CASE("flux corrector is skew and its divergence reproduces the oscillating flux") {
  for (int d : {2, 3}) {
    const GridSpec g = GridSpec::cube(d, d == 2 ? 32 : 10, 1.0, Topology::torus);
    const auto a = sample_field(test::gaussian(2.0), g, {3, 1});
    const auto set = compute_correctors(a, tight());
    REQUIRE(set.sigma.has_value());
    const auto& s = *set.sigma;
    for (int i = 0; i < d; ++i) {
      for (std::size_t c = 0; c < g.cells(); c += 17)
        for (int j = 0; j < d; ++j) {
          CHECK(s.value(i, j, j, c) == 0.0);
          for (int k = 0; k < d; ++k) CHECK(s.value(i, j, k, c) == -s.value(i, k, j, c));
        }
      const auto q = oscillating_flux(set, i);
      const auto div = sigma_divergence(s, g, i);
      for (int j = 0; j < d; ++j) CHECK(max_diff(q.comp[j], div.comp[j]) <= 1e-8);
    }
  }
}

TEST_CASE("Dirichlet box corrector has zero face values") {
  const GridSpec g = GridSpec::cube(2, 24, 1.0, Topology::box);
  const auto a = sample_field(test::gaussian(3.0), g, {1, 0});
  for (int i = 0; i < 2; ++i) {
    const auto phi = dirichlet_corrector(a, i, tight());
    CHECK(phi.max_abs() > 0.0);
    for (double v : box_boundary_values(phi)) CHECK(v == 0.0);
  }
}

TEST_CASE("Dirichlet and periodic laminate tensors agree at L = 16 eps") {
  const double eps = 2.0;
  const auto spec = test::structured(EnsembleKind::laminate, eps, 0.25);
  const auto torus = sample_structured_field(spec, GridSpec::cube(2, 32, 1.0, Topology::torus));
  const auto box = sample_structured_field(spec, GridSpec::cube(2, 32, 1.0, Topology::box));
  const auto set = compute_correctors(torus, tight(), false);
  const auto std_rve = standard_rve(solve_box_problem(box, 0.25, tight()), box);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(std_rve.matrix(i, i) - set.abar(i, i)) <= 0.05 * set.abar(i, i));
}

TEST_CASE("boundary-layer corrector matches the tridiagonal modal oracle") {
  const int N = 48, n = 32, m = 3;
  const double h = 0.5, T = std::pow(N * h / 4, 2);
  GridSpec g;
  g.d = 2;
  g.n = {N, n, 1};
  g.h = h;
  g.topology = Topology::slab;
  const auto trace = single_mode_trace(g, m);
  const auto bl = boundary_layer_corrector(test::constant_field(g, 1.0), trace, T, tight());
  CHECK(bl.bottom_values() == trace);

  const double shift = 4 * std::pow(std::sin(std::numbers::pi * m / n), 2) + h * h / T;
  std::vector<double> lo(N, -1.0), di(N, 2.0 + shift), up(N, -1.0), rhs(N, 0.0);
  di[0] = 1.0 + 2.0 + shift; // ghost elimination at the trace face
  rhs[0] = 2.0;
  di[N - 1] = 1.0 + 2.0 + shift;
  const auto c = thomas(lo, di, up, rhs);
  double err = 0;
  for_each_cell(g, [&](const Index& i, std::size_t k) {
    err = std::max(err, std::abs(bl.theta[k] - c[i[0]] * trace[i[1]]));
  });
  CHECK(err <= 1e-6);
  CHECK(bl.energy_fraction_above(N / 2) <= 0.01);
}

TEST_CASE("massive parameter above (H/4)^2 is a configuration error") {
  GridSpec g;
  g.d = 2;
  g.n = {16, 16, 1};
  g.topology = Topology::slab;
  const auto trace = single_mode_trace(g, 1);
  CHECK_NOTHROW(boundary_layer_corrector(test::constant_field(g, 1.0), trace, 16.0));
  try {
    boundary_layer_corrector(test::constant_field(g, 1.0), trace, 16.5);
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::configuration);
  }
}

TEST_CASE("two-scale expansion of a constant or with vanishing correctors is the identity") {
  const GridSpec g = GridSpec::cube(2, 16, 1.0, Topology::torus);
  const auto random = compute_correctors(sample_field(test::gaussian(2.0), g, {2, 0}), tight(), false);
  const ScalarField c(g, 3.0);
  CHECK(max_diff(two_scale_expand(c, random).values, c.values) == 0.0);

  const auto flat = compute_correctors(test::constant_field(g, 1.0), tight(), false);
  ScalarField hbar(g);
  for_each_cell(g, [&](const Index& i, std::size_t k) {
    hbar[k] = std::sin(2 * std::numbers::pi * i[0] / 16.0);
  });
  CHECK(max_diff(two_scale_expand(hbar, flat).values, hbar.values) <= 1e-14);
}

TEST_CASE("discrete two-scale identity holds for laminate and random fields") {
  const GridSpec g = GridSpec::cube(2, 32, 1.0, Topology::torus);
  for (const auto& a : {sample_structured_field(test::structured(EnsembleKind::laminate, 2.0, 0.2), g),
                        sample_field(test::contrast_gaussian(2.0), g, {5, 0})}) {
    const auto set = compute_correctors(a, tight());
    const auto force = smooth_forcing(g);
    const auto hbar = solve_constant_tensor_periodic(set.abar, divergence(force));
    const auto r = two_scale_residual(a, set, hbar, force);
    CHECK(r.scale > 0.0);
    CHECK(r.max_violation <= 1e-9);
  }
}
