#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "hrve/fft.hpp"
#include "hrve/operator.hpp"
#include "hrve/stats.hpp"

using namespace hrve;

namespace {

ScalarField random_field(const GridSpec& g, unsigned seed, bool mean_zero) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ScalarField u(g);
  for (auto& v : u.values) v = n(rng);
  if (mean_zero) {
    const double m = u.mean();
    for (auto& v : u.values) v -= m;
  }
  return u;
}

VectorField random_faces(const GridSpec& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  VectorField f(g);
  for (int k = 0; k < g.d; ++k)
    for (auto& v : f.comp[k]) v = n(rng);
  return f;
}

double residual_norm(const SparseSpdOperator& op, const ScalarField& u, const ScalarField& rhs) {
  std::vector<double> y;
  op.apply(u.values, y);
  double r = 0, b = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    r += (y[k] - rhs[k]) * (y[k] - rhs[k]);
    b += rhs[k] * rhs[k];
  }
  return std::sqrt(r / b);
}

} // namespace

TEST_CASE("identity coefficient on a 4x4 torus assembles the 5-point Laplacian") {
  const GridSpec g = GridSpec::cube(2, 4, 0.5, Topology::torus);
  const auto op = assemble(test::constant_field(g, 1.0), {});
  CHECK(op.singular);
  CHECK(op.symmetric);
  for (std::size_t r = 0; r < op.dimension; ++r) {
    const Index i = unravel(g.n, r);
    for (std::size_t c = 0; c < op.dimension; ++c) {
      const Index j = unravel(g.n, c);
      int manhattan = 0;
      for (int k = 0; k < 2; ++k) {
        const int dk = std::abs(i[k] - j[k]);
        manhattan += std::min(dk, 4 - dk);
      }
      const double expect = manhattan == 0 ? 4.0 : manhattan == 1 ? -1.0 : 0.0;
      CHECK(op.entry(r, c) == doctest::Approx(expect).epsilon(1e-15));
    }
  }
}

TEST_CASE("assembly is linear in the coefficient") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0, Topology::box);
  const auto a = sample_field(test::gaussian(2.0), g, {1, 1});
  const auto op1 = assemble(a, {});
  const auto op2 = assemble(a.scaled(0.5), {});
  for (std::size_t k = 0; k < op1.val.size(); ++k)
    CHECK(op2.val[k] == doctest::Approx(0.5 * op1.val[k]).epsilon(1e-15));
}

TEST_CASE("face transmissibility is the harmonic mean of the two normal coefficients") {
  const GridSpec g = GridSpec::cube(2, 4, 1.0, Topology::torus);
  std::vector<double> s(g.cells(), 1.0);
  const double lambda = 0.3;
  s[linear(g.n, {1, 0, 0})] = lambda;
  const auto t = transmissibility(CoefficientField::isotropic(g, s, lambda, 1.0));
  CHECK(t.at(0, {1, 0, 0}) == doctest::Approx(2 * lambda / (1 + lambda)));
  CHECK(t.at(0, {2, 0, 0}) == doctest::Approx(2 * lambda / (1 + lambda)));
  CHECK(t.at(0, {3, 0, 0}) == 1.0);
  CHECK(t.at(1, {1, 0, 0}) == doctest::Approx(2 * lambda / (1 + lambda)));
  CHECK(t.at(1, {1, 1, 0}) == doctest::Approx(2 * lambda / (1 + lambda)));
  CHECK(t.at(1, {1, 2, 0}) == 1.0);
}

TEST_CASE("assembled operators are exactly symmetric and positive definite with a boundary") {
  for (auto topo : {Topology::box, Topology::slab, Topology::torus}) {
    const GridSpec g = GridSpec::cube(2, 12, 1.0, topo);
    const auto a = sample_field(test::gaussian(2.0), g, {2, 2});
    const double massive = topo == Topology::torus ? 0.01 : 0.0;
    const auto op = assemble(a, BoundaryCondition::homogeneous(massive));
    for (std::size_t r = 0; r < op.dimension; ++r)
      for (std::size_t p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p)
        CHECK(op.entry(op.col[p], r) == op.val[p]);
    for (unsigned s = 0; s < 5; ++s) {
      const auto x = random_field(g, s, false);
      std::vector<double> y;
      op.apply(x.values, y);
      double q = 0;
      for (std::size_t k = 0; k < y.size(); ++k) q += x[k] * y[k];
      CHECK(q > 0.0);
    }
  }
}

TEST_CASE("zero right side gives zero solution") {
  const GridSpec g = GridSpec::cube(2, 16, 1.0, Topology::box);
  const auto op = assemble(sample_field(test::gaussian(2.0), g, {1, 0}), {});
  const auto r = solve(op, ScalarField(g));
  CHECK(r.u.max_abs() == 0.0);
}

TEST_CASE("manufactured sine solution converges at second order") {
  std::vector<FitPoint> pts;
  for (int n : {16, 32, 64}) {
    const double h = 1.0 / n;
    const GridSpec g = GridSpec::cube(2, n, h, Topology::box);
    const auto op = assemble(test::constant_field(g, 1.0), {});
    ScalarField rhs(g), exact(g);
    for_each_cell(g, [&](const Index& i, std::size_t k) {
      const double us = std::sin(M_PI * cell_center(g, i[0])) * std::sin(M_PI * cell_center(g, i[1]));
      exact[k] = us;
      rhs[k] = h * h * 2 * M_PI * M_PI * us;
    });
    SolverOptions o;
    o.tol = 1e-12;
    const auto r = solve(op, rhs, o);
    double e2 = 0;
    for (std::size_t k = 0; k < g.cells(); ++k) e2 += h * h * std::pow(r.u[k] - exact[k], 2);
    pts.push_back({h, std::sqrt(e2)});
  }
  const auto fit = fit_loglog_slope(pts);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("singular torus solve returns the mean-zero representative within tolerance") {
  const GridSpec g = GridSpec::cube(2, 24, 1.0, Topology::torus);
  const auto op = assemble(sample_field(test::gaussian(3.0), g, {4, 0}), {});
  const auto rhs = random_field(g, 3, true);
  for (auto pc : {Preconditioner::jacobi, Preconditioner::multigrid}) {
    SolverOptions o;
    o.preconditioner = pc;
    const auto r = solve(op, rhs, o);
    CHECK(r.relative_residual <= o.tol);
    CHECK(residual_norm(op, r.u, rhs) <= 1.01 * o.tol);
    CHECK(std::abs(r.u.mean()) <= 1e-13);
  }
}

TEST_CASE("multigrid and Jacobi preconditioning agree") {
  const GridSpec g = GridSpec::cube(2, 32, 1.0, Topology::box);
  const auto op = assemble(sample_field(test::contrast_gaussian(3.0), g, {8, 0}), {});
  const auto rhs = random_field(g, 5, false);
  SolverOptions j, m;
  m.preconditioner = Preconditioner::multigrid;
  const auto a = solve(op, rhs, j), b = solve(op, rhs, m);
  double diff = 0;
  for (std::size_t k = 0; k < g.cells(); ++k) diff = std::max(diff, std::abs(a.u[k] - b.u[k]));
  CHECK(diff <= 1e-7 * a.u.max_abs());
  CHECK(b.iterations < a.iterations);
}

TEST_CASE("iteration cap raises a solver failure carrying the residual") {
  const GridSpec g = GridSpec::cube(2, 32, 1.0, Topology::box);
  const auto op = assemble(test::constant_field(g, 1.0), {});
  SolverOptions o;
  o.max_iters = 2;
  try {
    solve(op, random_field(g, 1, false), o);
    FAIL("expected solver failure");
  } catch (const SolverFailure& e) {
    CHECK(e.code() == ErrorCode::solver_failure);
    CHECK(e.residual() > o.tol);
    CHECK(e.iterations() == 2);
  }
}

TEST_CASE("torus rhs with a nonzero mean is rejected") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0, Topology::torus);
  const auto op = assemble(test::constant_field(g, 1.0), {});
  CHECK_THROWS_AS(solve(op, ScalarField(g, 1.0)), Error);
}

TEST_CASE("gradient and divergence are adjoint on the torus") {
  for (int d : {2, 3}) {
    const GridSpec g = GridSpec::cube(d, 8, 0.7, Topology::torus);
    const auto u = random_field(g, 11, false);
    const auto F = random_faces(g, 12);
    const double lhs = inner_faces(gradient(u), F);
    const double rhs = -inner_cells(u, divergence(F));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    const auto div = divergence(F);
    double sum = 0, scale = 0;
    for (double v : div.values) sum += v, scale += std::abs(v);
    CHECK(std::abs(sum) <= 1e-13 * scale);
  }
}

TEST_CASE("constant fields have zero gradient and transmissibility flux") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0, Topology::torus);
  const auto a = sample_field(test::gaussian(2.0), g, {1, 3});
  const ScalarField c(g, 2.5);
  const auto grad = gradient(c);
  for (int k = 0; k < 2; ++k) CHECK(test::max_abs(grad.comp[k]) == 0.0);
  const auto f = flux(a, c, 1);
  const auto t = transmissibility(a);
  CHECK(f.comp[1] == t.comp[1]);
  CHECK(test::max_abs(f.comp[0]) == 0.0);
}

TEST_CASE("fields on different grids are rejected") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0, Topology::torus);
  const GridSpec h = GridSpec::cube(2, 12, 1.0, Topology::torus);
  try {
    flux(test::constant_field(g, 1.0), ScalarField(h), 0);
    FAIL("expected grid mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::grid_mismatch);
  }
}

TEST_CASE("constant-coefficient Dirichlet solutions obey the maximum principle") {
  const GridSpec g = GridSpec::cube(2, 20, 1.0, Topology::box);
  BoundaryCondition bc;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < 2; ++k) {
    bc.lower[k].resize(layer_size(g, k));
    bc.upper[k].resize(layer_size(g, k));
    for (auto* t : {&bc.lower[k], &bc.upper[k]})
      for (auto& v : *t) {
        v = u(rng);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  const auto op = assemble(test::constant_field(g, 0.7), bc);
  ScalarField rhs(g);
  rhs.values = op.dirichlet_load;
  const auto r = solve(op, rhs);
  for (double v : r.u.values) {
    CHECK(v >= lo - 1e-9);
    CHECK(v <= hi + 1e-9);
  }
}

TEST_CASE("FFT Poisson solver") {
  const GridSpec g = GridSpec::cube(2, 32, 0.5, Topology::torus);
  SUBCASE("zero") { CHECK(poisson_periodic(ScalarField(g)).max_abs() == 0.0); }
  SUBCASE("single mode is divided by the symbol") {
    const Index m{3, 5, 0};
    ScalarField rhs(g);
    for_each_cell(g, [&](const Index& i, std::size_t k) {
      rhs[k] = std::cos(2 * M_PI * (double(m[0]) * i[0] / 32 + double(m[1]) * i[1] / 32));
    });
    const double sym = laplacian_symbol(2, g.n, g.h, m);
    const auto u = poisson_periodic(rhs);
    for (std::size_t k = 0; k < g.cells(); ++k) CHECK(u[k] == doctest::Approx(rhs[k] / sym).epsilon(1e-12).scale(1.0 / sym));
  }
  SUBCASE("random mean-zero right side satisfies the assembled Laplacian") {
    const auto rhs = random_field(g, 21, true);
    const auto u = poisson_periodic(rhs);
    const auto op = assemble(test::constant_field(g, 1.0), {});
    std::vector<double> y;
    op.apply(u.values, y);
    double err = 0;
    const double vol = g.h * g.h;
    for (std::size_t k = 0; k < g.cells(); ++k) err = std::max(err, std::abs(y[k] / vol - rhs[k]));
    CHECK(err <= 1e-10 * rhs.max_abs());
    CHECK(std::abs(u.mean()) <= 1e-13);
  }
  SUBCASE("nonzero mean is rejected") {
    CHECK_THROWS_AS(poisson_periodic(ScalarField(g, 1.0)), Error);
  }
}
