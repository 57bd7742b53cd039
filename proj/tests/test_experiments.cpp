#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hrve/experiments.hpp"

using namespace hrve;

namespace {

SweepConfig small_sweep() {
  SweepConfig c;
  c.ensemble = test::gaussian(2.0);
  c.L_over_eps = {8, 12, 16};
  c.samples = 4;
  c.reference_cells = 128;
  c.reference_samples = 3;
  c.solver.preconditioner = Preconditioner::multigrid;
  return c;
}

std::string csv_of(const SweepConfig& c) {
  std::vector<SampleRow> rows;
  rve_sweep(c, &rows);
  std::ostringstream os;
  write_sweep_csv(os, rows, c.d);
  return os.str();
}

GridSpec slab(int height, int width) {
  GridSpec g;
  g.d = 2;
  g.n = {height, width, 1};
  g.topology = Topology::slab;
  return g;
}

} // namespace

TEST_CASE("log-log slope of an exact power law") {
  std::vector<FitPoint> p;
  for (double L : {8.0, 16.0, 32.0, 64.0}) p.push_back({L, 3.0 * std::pow(L, -1.25)});
  const auto f = fit_loglog_slope(p);
  CHECK(f.slope == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.stderr_ <= 1e-12);
  std::vector<FitPoint> sq{{8, 1.0 / 64}, {16, 1.0 / 256}, {32, 1.0 / 1024}};
  CHECK(fit_loglog_slope(sq).slope == doctest::Approx(-2.0).epsilon(1e-12));
  for (auto& q : p) q.value = 0.4;
  CHECK(std::abs(fit_loglog_slope(p).slope) <= 1e-14);
}

TEST_CASE("slope fit rejects too few scales and non-positive values") {
  std::vector<FitPoint> two{{8, 1.0}, {16, 0.5}};
  CHECK_THROWS_AS(fit_loglog_slope(two), Error);
  std::vector<FitPoint> repeated{{8, 1.0}, {8, 0.5}, {8, 0.2}};
  CHECK_THROWS_AS(fit_loglog_slope(repeated), Error);
  std::vector<FitPoint> zero{{8, 1.0}, {16, 0.0}, {32, 0.2}};
  CHECK_THROWS_AS(fit_loglog_slope(zero), Error);
}

TEST_CASE("weighted slope recovers a noisy -3/2 law over 100 replicates") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 1.0);
  double sum = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    std::vector<FitPoint> p;
    for (double L : {8.0, 16.0, 32.0, 64.0, 128.0}) {
      const double truth = std::pow(L, -1.5), se = 0.05 * truth;
      p.push_back({L, truth + se * noise(rng), se});
    }
    const auto f = fit_loglog_slope(p);
    CHECK(f.weighted);
    sum += f.slope;
  }
  CHECK(std::abs(sum / reps + 1.5) <= 0.1);
}

TEST_CASE("population and sample standard deviations") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(population_std(v) == doctest::Approx(std::sqrt(1.25)));
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(sample_std(std::vector<double>{7.0}) == 0.0);
}

TEST_CASE("sweep statistics, determinism and CSV round trip") {
  const SweepConfig c = small_sweep();
  std::vector<SampleRow> rows;
  const auto r = rve_sweep(c, &rows);
  CHECK(rows.size() == std::size_t(c.reference_samples + 3 * 3 * c.samples));

  SUBCASE("total error splits into systematic and fluctuation parts") {
    for (const auto& s : r.stats) {
      CHECK(s.attempted == c.samples);
      CHECK(s.reported + s.excluded == s.attempted);
      const double lhs = s.tot.value * s.tot.value;
      const double rhs = s.sys.value * s.sys.value + s.fluct.value * s.fluct.value;
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(lhs, 1e-300));
    }
    // Fewer than 30 samples per scale: no slope is fitted.
    for (auto k : {EstimatorKind::standard, EstimatorKind::oversampled, EstimatorKind::new_formula})
      CHECK_FALSE(r.slopes.at(k).fluctuation.has_value());
  }
  SUBCASE("CSV round trip reproduces the aggregate") {
    std::ostringstream os;
    write_sweep_csv(os, rows, c.d);
    std::istringstream is(os.str());
    int d = 0;
    const auto back = read_sweep_csv(is, &d);
    CHECK(d == 2);
    REQUIRE(back.size() == rows.size());
    const auto r2 = aggregate_sweep(back, d);
    REQUIRE(r2.stats.size() == r.stats.size());
    for (std::size_t k = 0; k < r.stats.size(); ++k) {
      CHECK(r2.stats[k].tot.value == r.stats[k].tot.value);
      CHECK(r2.stats[k].fluct.value == r.stats[k].fluct.value);
    }
    std::ostringstream again;
    write_sweep_csv(again, back, d);
    CHECK(again.str() == os.str());
  }
  SUBCASE("excluded new-formula samples leave every statistic") {
    auto edited = rows;
    const SampleRow* victim = nullptr;
    for (auto& row : edited)
      if (row.kind == EstimatorKind::new_formula && row.L_over_eps == 12) {
        row.condition = 1e9;
        row.tensor(0, 0) = 1e6;
        victim = &row;
        break;
      }
    REQUIRE(victim != nullptr);
    const auto r2 = aggregate_sweep(edited, 2);
    const auto* s = r2.find(EstimatorKind::new_formula, 12);
    REQUIRE(s != nullptr);
    CHECK(s->excluded == 1);
    CHECK(s->reported == c.samples - 1);
    CHECK(s->tot.value < 1.0);
    CHECK(r2.exclusion_rate(EstimatorKind::new_formula) == doctest::Approx(1.0 / (3 * c.samples)));
    CHECK(r2.exclusion_rate(EstimatorKind::standard) == 0.0);
  }
}

TEST_CASE("thirty samples per scale enable the slope fits") {
  SweepConfig c = small_sweep();
  c.samples = 30;
  const auto r = rve_sweep(c);
  for (auto k : {EstimatorKind::standard, EstimatorKind::oversampled, EstimatorKind::new_formula}) {
    const auto& set = r.slopes.at(k);
    REQUIRE(set.fluctuation.has_value());
    CHECK(set.fluctuation->slope < 0.0);
    CHECK(set.systematic.has_value());
    CHECK(set.total.has_value());
    CHECK(set.systematic_band >= 0.0);
  }
}

TEST_CASE("sweep output is byte-identical across reruns and thread counts") {
  SweepConfig c = small_sweep();
  const std::string a = csv_of(c);
  CHECK(csv_of(c) == a);
  c.threads = 3;
  CHECK(csv_of(c) == a);
  c.seed = 2;
  CHECK(csv_of(c) != a);
}

TEST_CASE("constant-field sweep has zero error and no fitted slopes") {
  SweepConfig c = small_sweep();
  c.ensemble = test::structured(EnsembleKind::constant, 2.0, 0.25, 0.8);
  const auto r = rve_sweep(c);
  CHECK(r.reference_scalar == doctest::Approx(0.8));
  for (const auto& s : r.stats) {
    CHECK(s.tot.value <= 1e-12);
    CHECK(s.fluct.value <= 1e-12);
  }
  for (const auto& [k, set] : r.slopes) CHECK_FALSE(set.total.has_value());
}

TEST_CASE("two box sizes give statistics but no slopes") {
  SweepConfig c = small_sweep();
  c.L_over_eps = {8, 12};
  const auto r = rve_sweep(c);
  CHECK(r.stats.size() == 6);
  for (const auto& [k, set] : r.slopes) {
    CHECK_FALSE(set.fluctuation.has_value());
    CHECK_FALSE(set.systematic.has_value());
  }
}

TEST_CASE("sweep configuration errors") {
  SweepConfig c = small_sweep();
  c.L_over_eps = {4, 8, 16};
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_sweep();
  c.L_over_eps = {16, 8, 32};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("constant-field decay profile is identically zero") {
  DecayConfig c;
  c.ensemble = test::structured(EnsembleKind::constant, 2.0);
  c.height_over_eps = 16;
  c.width_over_eps = 16;
  c.samples = 2;
  const auto p = boundary_layer_decay(c);
  for (const auto& l : p.layers) CHECK(l.rms == 0.0);
  CHECK_FALSE(p.fit.has_value());
  CHECK(p.T == doctest::Approx(64.0));
}

TEST_CASE("decay profile CSV round trip and refit window") {
  DecayConfig c;
  c.ensemble = test::gaussian(2.0);
  c.height_over_eps = 32;
  c.width_over_eps = 16;
  c.samples = 3;
  c.solver.preconditioner = Preconditioner::multigrid;
  const auto p = boundary_layer_decay(c);
  REQUIRE(p.fit.has_value());
  CHECK(p.layers.size() == 64);
  CHECK(p.valid);
  std::ostringstream os;
  write_decay_csv(os, p);
  std::istringstream is(os.str());
  const auto back = read_decay_csv(is);
  REQUIRE(back.layers.size() == p.layers.size());
  for (std::size_t k = 0; k < p.layers.size(); ++k) CHECK(back.layers[k].rms == p.layers[k].rms);
}

TEST_CASE("single-mode decay rate matches sqrt(k^2 + 1/T)") {
  const GridSpec g = slab(128, 64);
  const double T = std::pow(128 / 4.0, 2);
  SolverOptions o;
  o.preconditioner = Preconditioner::multigrid;
  o.tol = 1e-12;
  const auto m = modal_decay_control(g, 2.0, T, 1, o);
  CHECK(m.relative_error <= 0.05);
  CHECK(m.fitted_rate > 0.0);
}

TEST_CASE("localization with zero trace reports zero ratios") {
  const GridSpec g = slab(32, 32);
  const std::vector<double> trace(32, 0.0);
  const double Ts[] = {16.0, 64.0};
  const double gammas[] = {0.05, 0.1};
  const auto r = localization_check(test::constant_field(g, 1.0), trace, Ts, gammas);
  CHECK(r.entries.size() == 4);
  for (const auto& e : r.entries) CHECK(e.ratio == 0.0);
  CHECK(r.max_ratio == 0.0);
}

TEST_CASE("localization ratio is bounded for a single mode on a constant field") {
  const GridSpec g = slab(64, 64);
  const double Ts[] = {16.0, 64.0, 256.0};
  const double gammas[] = {0.05, 0.1};
  const auto r = localization_check(test::constant_field(g, 1.0), single_mode_trace(g, 1), Ts, gammas);
  CHECK(r.max_ratio > 0.0);
  CHECK(r.max_ratio <= 50.0);
  CHECK(r.max_halving_growth > 0.0);
  CHECK(r.max_halving_growth <= 4.0);
}

TEST_CASE("two-scale experiment on a constant field reports zero ratios") {
  TwoScaleConfig c;
  c.ensemble = test::structured(EnsembleKind::constant, 2.0);
  c.samples = 2;
  const auto r = two_scale_residual_experiment(c);
  CHECK(r.levels.size() == 3);
  for (const auto& lv : r.levels) CHECK(lv.mean_ratio == 0.0);
  CHECK(r.max_violation <= r.tolerance);
  CHECK(r.decreasing);
}

TEST_CASE("two-scale summary groups levels and round-trips through CSV") {
  std::vector<TwoScaleSample> s{{0.25, 0, 1e-12, 0.8}, {0.125, 1, 2e-12, 0.5},
                                {0.25, 2, 3e-12, 0.6}, {0.125, 3, 1e-12, 0.3}};
  const auto r = summarize_two_scale(s, 1e-9);
  REQUIRE(r.levels.size() == 2);
  CHECK(r.levels[0].eps_over_L == 0.25);
  CHECK(r.levels[0].mean_ratio == doctest::Approx(0.7));
  CHECK(r.levels[1].mean_ratio == doctest::Approx(0.4));
  CHECK(r.levels[0].ratio_se == doctest::Approx(0.1));
  CHECK(r.max_violation == 3e-12);
  CHECK(r.decreasing);
  std::ostringstream os;
  write_two_scale_csv(os, r);
  std::istringstream is(os.str());
  const auto back = read_two_scale_csv(is);
  REQUIRE(back.size() == 4);
  CHECK(back[1].ratio == 0.5);
  CHECK(back[2].stream == 2);
}

TEST_CASE("manifest hash covers the body and ignores manifest keys") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  auto hash_line = [](const Manifest& m) {
    const std::string t = m.text();
    return t.substr(t.find("manifest.hash"));
  };
  Manifest a, b, c;
  a.set("kappa", "0.25");
  a.set("manifest.wall_clock_s", "1.5");
  b.set("kappa", "0.25");
  b.set("manifest.wall_clock_s", "99");
  c.set("kappa", "0.125");
  CHECK(hash_line(a) == hash_line(b));
  CHECK(hash_line(a) != hash_line(c));
  CHECK(a.text().rfind("kappa = 0.25\n", 0) == 0);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.25) == "0.25");
}
