#include "hrve/rve.hpp"

#include <cmath>

#include "parallel.hpp"

namespace hrve {

const char* to_string(EstimatorKind k) noexcept {
  switch (k) {
  case EstimatorKind::standard: return "standard";
  case EstimatorKind::oversampled: return "oversampled";
  case EstimatorKind::new_formula: return "new-formula";
  case EstimatorKind::reference: return "reference";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "standard") return EstimatorKind::standard;
  if (s == "oversampled") return EstimatorKind::oversampled;
  if (s == "new-formula") return EstimatorKind::new_formula;
  if (s == "reference") return EstimatorKind::reference;
  fail(ErrorCode::invalid_argument, "unknown estimator kind '" + s + "'");
}

std::size_t Window::cells() const {
  std::size_t c = 1;
  for (int k = 0; k < 3; ++k) c *= std::size_t(hi[k] - lo[k]);
  return c;
}

Window interior_window(const GridSpec& box, double kappa) {
  require(kappa > 0.0 && kappa <= 0.25, ErrorCode::invalid_argument,
          "kappa must lie in (0, 1/4]");
  Window w;
  for (int k = 0; k < box.d; ++k) {
    const double L = box.side(k), a = kappa * L, b = (1.0 - kappa) * L;
    const double slack = 1e-12 * L;
    int lo = box.n[k], hi = 0;
    for (int j = 0; j < box.n[k]; ++j) {
      const double x = cell_center(box, j);
      if (x >= a - slack && x <= b + slack) {
        lo = std::min(lo, j);
        hi = std::max(hi, j + 1);
      }
    }
    require(hi - lo >= 4, ErrorCode::invalid_argument,
            "oversampling window has fewer than 4 cells per side");
    w.lo[k] = lo;
    w.hi[k] = hi;
  }
  return w;
}

namespace {

Window full_window(const GridSpec& g) {
  Window w;
  for (int k = 0; k < 3; ++k) w.hi[k] = g.n[k];
  return w;
}

bool inside(const Window& w, const Index& c) {
  for (int k = 0; k < 3; ++k)
    if (c[k] < w.lo[k] || c[k] >= w.hi[k]) return false;
  return true;
}

int total_iterations(const BoxProblem& box) {
  int s = 0;
  for (int it : box.iterations) s += it;
  return s;
}

void check_box(const BoxProblem& box, const CoefficientField& a) {
  require_same_grid(box.grid, a.grid, "rve estimator");
  require(int(box.phiL.size()) == a.grid.d, ErrorCode::invalid_argument,
          "box problem lacks correctors for every direction");
}

} // namespace

WindowAverages window_averages(const BoxProblem& box, const CoefficientField& a,
                               const Window& w) {
  check_box(box, a);
  const GridSpec& g = a.grid;
  const int d = g.d;
  WindowAverages out{Tensor(d), Tensor(d)};
  const double inv = 1.0 / double(w.cells());
  const BoundaryCondition bc = BoundaryCondition::homogeneous();
  for (int i = 0; i < d; ++i) {
    const auto grad = face_to_cell(gradient(box.phiL[i], bc));
    const auto fl = face_to_cell(flux(a, box.phiL[i], i, bc));
    std::array<double, 3> gs{}, fs{};
    for_each_cell(g, [&](const Index& c, std::size_t idx) {
      if (!inside(w, c)) return;
      for (int k = 0; k < d; ++k) {
        gs[k] += grad[k].values[idx];
        fs[k] += fl[k].values[idx];
      }
    });
    for (int k = 0; k < d; ++k) {
      out.gradient(k, i) = (k == i ? 1.0 : 0.0) + gs[k] * inv;
      out.flux(k, i) = fs[k] * inv;
    }
  }
  return out;
}

EffectiveTensor standard_rve(const BoxProblem& box, const CoefficientField& a) {
  EffectiveTensor t;
  t.kind = EstimatorKind::standard;
  t.matrix = window_averages(box, a, full_window(a.grid)).flux;
  t.L = box.L;
  t.seed = a.seed;
  t.solver_iterations = total_iterations(box);
  return t;
}

EffectiveTensor oversampled_rve(const BoxProblem& box, const CoefficientField& a,
                                double kappa) {
  EffectiveTensor t;
  t.kind = EstimatorKind::oversampled;
  t.matrix = window_averages(box, a, interior_window(a.grid, kappa)).flux;
  t.L = box.L;
  t.kappa = kappa;
  t.seed = a.seed;
  t.solver_iterations = total_iterations(box);
  return t;
}

EffectiveTensor new_formula_from(const Tensor& gradient_avg, const Tensor& flux_avg) {
  const LuResult lu = lu_invert(gradient_avg);
  if (!lu.pivot_ok)
    fail(ErrorCode::singular_system,
         "window-averaged gradient matrix B is singular: " + gradient_avg.str());
  EffectiveTensor t;
  t.kind = EstimatorKind::new_formula;
  t.matrix = flux_avg * lu.inverse;
  t.condition = lu.condition_1;
  t.singular = !(lu.condition_1 <= kSingularCondition);
  return t;
}

EffectiveTensor new_formula_rve(const BoxProblem& box, const CoefficientField& a,
                                double kappa) {
  const WindowAverages avg = window_averages(box, a, interior_window(a.grid, kappa));
  EffectiveTensor t = new_formula_from(avg.gradient, avg.flux);
  t.L = box.L;
  t.kappa = kappa;
  t.seed = a.seed;
  t.solver_iterations = total_iterations(box);
  return t;
}

EffectiveTensor torus_effective(const CoefficientField& torus_field, const SolverOptions& opts) {
  const CorrectorSet set = compute_correctors(torus_field, opts, false);
  EffectiveTensor t;
  t.kind = EstimatorKind::reference;
  t.matrix = set.abar;
  t.L = torus_field.grid.side(0);
  t.seed = torus_field.seed;
  t.standard_error = Tensor(torus_field.grid.d);
  for (const auto& c : set.correctors) t.solver_iterations += c.iterations;
  return t;
}

EffectiveTensor combine_reference(const std::vector<Tensor>& per_sample) {
  require(!per_sample.empty(), ErrorCode::invalid_argument, "no reference samples");
  const int d = per_sample.front().d;
  const double M = double(per_sample.size());
  EffectiveTensor t;
  t.kind = EstimatorKind::reference;
  t.matrix = Tensor(d);
  t.standard_error = Tensor(d);
  t.samples = int(per_sample.size());
  for (const Tensor& s : per_sample)
    for (int i = 0; i < 9; ++i) t.matrix.a[i] += s.a[i] / M;
  if (per_sample.size() > 1)
    for (int i = 0; i < 9; ++i) {
      double v = 0.0;
      for (const Tensor& s : per_sample) v += (s.a[i] - t.matrix.a[i]) * (s.a[i] - t.matrix.a[i]);
      t.standard_error.a[i] = std::sqrt(v / (M - 1.0) / M);
    }
  return t;
}

EffectiveTensor reference_effective(const EnsembleSpec& spec, const GridSpec& torus,
                                    int samples, std::uint64_t base, const SolverOptions& opts,
                                    int threads) {
  require(torus.topology == Topology::torus, ErrorCode::invalid_argument,
          "reference tensor needs a torus grid");
  require(samples >= 1, ErrorCode::invalid_argument, "reference needs at least one sample");
  std::vector<Tensor> per(std::size_t(samples), Tensor(torus.d));
  int iters = 0;
  std::vector<int> it(per.size(), 0);
  detail::parallel_for(per.size(), threads, [&](std::size_t s) {
    const CoefficientField a = sample_field(spec, torus, RngSeed{base, s});
    const EffectiveTensor e = torus_effective(a, opts);
    per[s] = e.matrix;
    it[s] = e.solver_iterations;
  });
  for (int v : it) iters += v;
  EffectiveTensor t = combine_reference(per);
  t.L = torus.side(0);
  t.seed = RngSeed{base, 0};
  t.solver_iterations = iters;
  return t;
}

} // namespace hrve
