#include "doctest.h"
#include "helpers.hpp"
#include "hrve/rve.hpp"

using namespace hrve;

namespace {

SolverOptions tight() {
  SolverOptions o;
  o.tol = 1e-12;
  o.preconditioner = Preconditioner::multigrid;
  return o;
}

struct AllEstimators {
  EffectiveTensor standard, oversampled, fresh;
};

AllEstimators estimate(const CoefficientField& a, double kappa) {
  const auto box = solve_box_problem(a, kappa, tight());
  return {standard_rve(box, a), oversampled_rve(box, a, kappa), new_formula_rve(box, a, kappa)};
}

// Isotropic field with the roles of axes 0 and 1 exchanged.
CoefficientField transposed(const CoefficientField& a) {
  std::vector<double> s(a.grid.cells());
  for_each_cell(a.grid, [&](const Index& i, std::size_t k) {
    s[linear(a.grid.n, {i[1], i[0], i[2]})] = a.entry(k, 0, 0);
  });
  return CoefficientField::isotropic(a.grid, s, a.lambda, a.epsilon);
}

} // namespace

TEST_CASE("every estimator returns c Id for a constant field") {
  for (int d : {2, 3}) {
    const GridSpec g = GridSpec::cube(d, 16, 1.0, Topology::box);
    const auto e = estimate(test::constant_field(g, 0.6), 0.25);
    for (const auto* t : {&e.standard, &e.oversampled, &e.fresh})
      CHECK((t->matrix - Tensor::identity(d, 0.6)).max_abs() <= 1e-12);
    const auto ref = reference_effective(test::structured(EnsembleKind::constant, 4.0, 0.25, 0.6),
                                         GridSpec::cube(d, 8, 1.0, Topology::torus), 3, 9, tight());
    CHECK((ref.matrix - Tensor::identity(d, 0.6)).max_abs() <= 1e-12);
    CHECK(ref.standard_error.max_abs() == 0.0);
  }
}

TEST_CASE("oversampling by half a cell selects the whole box") {
  const GridSpec g = GridSpec::cube(2, 20, 1.0, Topology::box);
  const auto a = sample_field(test::gaussian(3.0), g, {1, 2});
  const auto w = interior_window(g, 0.5 / 20);
  CHECK(w.cells() == g.cells());
  const auto e = estimate(a, 0.5 / 20);
  CHECK((e.oversampled.matrix - e.standard.matrix).max_abs() <= 1e-12);
}

TEST_CASE("window with fewer than 4 cells per side is rejected") {
  CHECK_NOTHROW(interior_window(GridSpec::cube(2, 6, 1.0, Topology::box), 0.25));
  CHECK_THROWS_AS(interior_window(GridSpec::cube(2, 5, 1.0, Topology::box), 0.25), Error);
  CHECK_THROWS_AS(interior_window(GridSpec::cube(2, 16, 1.0, Topology::box), 0.3), Error);
}

TEST_CASE("new formula reduces to Q when B is the identity") {
  Tensor q(2);
  q(0, 0) = 0.7;
  q(0, 1) = 0.1;
  q(1, 0) = 0.12;
  q(1, 1) = 0.5;
  const auto t = new_formula_from(Tensor::identity(2), q);
  CHECK((t.matrix - q).max_abs() <= 1e-15);
  CHECK(t.condition == doctest::Approx(1.0));
  CHECK_FALSE(t.singular);
}

TEST_CASE("ill-conditioned B is flagged and a zero pivot throws") {
  Tensor b = Tensor::identity(2);
  b(1, 1) = 1e-8;
  const auto t = new_formula_from(b, Tensor::identity(2));
  CHECK(t.singular);
  CHECK(t.condition > kSingularCondition);
  try {
    new_formula_from(Tensor(2), Tensor::identity(2));
    FAIL("expected singular system");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_system);
  }
}

TEST_CASE("estimators are equivariant under axis exchange and scaling") {
  const GridSpec g = GridSpec::cube(2, 24, 1.0, Topology::box);
  const auto a = sample_field(test::gaussian(3.0), g, {4, 4});
  const auto e = estimate(a, 0.25);
  const auto p = estimate(transposed(a), 0.25);
  const auto s = estimate(a.scaled(2.5), 0.25);
  const std::pair<const EffectiveTensor*, const EffectiveTensor*> pairs[] = {
      {&e.standard, &p.standard}, {&e.oversampled, &p.oversampled}, {&e.fresh, &p.fresh}};
  for (auto [x, y] : pairs)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK((*x).matrix(i, j) == doctest::Approx((*y).matrix(1 - i, 1 - j)).epsilon(1e-8));
  CHECK((s.standard.matrix - e.standard.matrix.scaled(2.5)).max_abs() <= 1e-9);
  CHECK((s.oversampled.matrix - e.oversampled.matrix.scaled(2.5)).max_abs() <= 1e-9);
  CHECK((s.fresh.matrix - e.fresh.matrix.scaled(2.5)).max_abs() <= 1e-9);
}

TEST_CASE("standard estimator lies between the Reuss and Voigt bounds of the box") {
  const GridSpec g = GridSpec::cube(2, 32, 1.0, Topology::box);
  const auto a = sample_field(test::contrast_gaussian(4.0), g, {2, 8});
  const auto e = estimate(a, 0.25);
  double arith = 0, inv = 0;
  for (std::size_t k = 0; k < g.cells(); ++k) arith += a.entry(k, 0, 0), inv += 1.0 / a.entry(k, 0, 0);
  arith /= double(g.cells());
  const double harm = double(g.cells()) / inv;
  for (int i = 0; i < 2; ++i) {
    CHECK(e.standard.matrix(i, i) <= arith + 1e-12);
    CHECK(e.standard.matrix(i, i) >= harm - 1e-12);
  }
}

TEST_CASE("checkerboard standard estimator approaches sqrt(lambda)") {
  const double eps = 2.0;
  const GridSpec g = GridSpec::cube(2, 64, 1.0, Topology::box);
  const auto a = sample_structured_field(test::structured(EnsembleKind::checkerboard, eps, 0.25), g);
  const auto e = estimate(a, 0.25);
  CHECK(e.standard.matrix.trace() / 2 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("reference of a laminate recovers the harmonic and arithmetic means") {
  const auto spec = test::structured(EnsembleKind::laminate, 2.0, 0.2);
  const GridSpec g = GridSpec::cube(2, 16, 1.0, Topology::torus);
  const auto ref = reference_effective(spec, g, 2, 3, tight());
  const auto t = transmissibility(sample_structured_field(spec, g));
  double inv = 0, arith = 0;
  for (int i = 0; i < 16; ++i) inv += 1.0 / t.at(0, {i, 0, 0});
  for (double v : t.comp[1]) arith += v;
  CHECK(ref.matrix(0, 0) == doctest::Approx(16.0 / inv).epsilon(1e-8));
  CHECK(ref.matrix(1, 1) == doctest::Approx(arith / double(t.comp[1].size())).epsilon(1e-8));
  CHECK(ref.samples == 2);
}

TEST_CASE("reference tensor does not depend on the thread count") {
  const auto spec = test::gaussian(2.0);
  const GridSpec g = GridSpec::cube(2, 16, 1.0, Topology::torus);
  const auto one = reference_effective(spec, g, 6, 11, tight(), 1);
  const auto three = reference_effective(spec, g, 6, 11, tight(), 3);
  CHECK(one.matrix.a == three.matrix.a);
  CHECK(one.standard_error.a == three.standard_error.a);
  CHECK(one.standard_error.max_abs() > 0.0);
}

TEST_CASE("combined reference has the sample mean and standard error") {
  Tensor a = Tensor::identity(2, 1.0), b = Tensor::identity(2, 3.0);
  const auto r = combine_reference({a, b});
  CHECK(r.matrix(0, 0) == doctest::Approx(2.0));
  CHECK(r.standard_error(0, 0) == doctest::Approx(1.0));
  CHECK(r.samples == 2);
}
