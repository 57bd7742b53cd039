#include "hrve/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "hrve/fft.hpp"
#include "parallel.hpp"

namespace hrve {

namespace {

constexpr std::uint64_t kReferenceSalt = 0x7265666572656e63ULL;

std::uint64_t level_stream(std::size_t level, std::size_t sample) {
  return (std::uint64_t(level) << 32) | std::uint64_t(sample);
}

int cells_for(double length, double h) {
  const double n = length / h;
  const int r = int(std::lround(n));
  require(std::abs(n - r) < 1e-9 * std::max(1.0, n), ErrorCode::invalid_argument,
          "length " + format_double(length) + " is not a multiple of the grid spacing");
  return r;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    fail(ErrorCode::io, "malformed number '" + s + "' in CSV");
  return v;
}

double scalar_part(const Tensor& t) { return t.trace() / t.d; }

} // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Sweep

void SweepConfig::validate() const {
  require(d == 2 || d == 3, ErrorCode::invalid_argument, "d must be 2 or 3");
  require(h > 0.0, ErrorCode::invalid_argument, "h must be positive");
  require(L_over_eps.size() >= 1, ErrorCode::invalid_argument, "need at least one box size");
  for (std::size_t i = 0; i < L_over_eps.size(); ++i) {
    require(L_over_eps[i] >= 8.0, ErrorCode::invalid_argument, "box sizes must be >= 8 eps");
    if (i > 0)
      require(L_over_eps[i] > L_over_eps[i - 1], ErrorCode::invalid_argument,
              "box sizes must be strictly increasing");
    box_cells(L_over_eps[i]);
  }
  require(kappa > 0.0 && kappa <= 0.25, ErrorCode::invalid_argument,
          "kappa must lie in (0, 1/4]");
  require(samples >= 1, ErrorCode::invalid_argument, "samples must be positive");
  require(reference_samples >= 1, ErrorCode::invalid_argument,
          "reference samples must be positive");
  const int largest = box_cells(L_over_eps.back());
  require(small_reference || reference_extent() >= 4 * largest, ErrorCode::invalid_argument,
          "reference torus must be at least 4x the largest box");
  require(reference_extent() >= largest, ErrorCode::invalid_argument,
          "reference torus must hold the largest box");
  ensemble.validate(GridSpec::cube(d, largest, h, Topology::box));
}

int SweepConfig::box_cells(double L) const { return cells_for(L * ensemble.epsilon, h); }

int SweepConfig::reference_extent() const {
  return reference_cells > 0 ? reference_cells : 4 * box_cells(L_over_eps.back());
}

bool SampleRow::excluded() const {
  if (kind != EstimatorKind::new_formula) return false;
  if (!(condition <= kSingularCondition)) return true;
  for (int i = 0; i < 9; ++i)
    if (!std::isfinite(tensor.a[i])) return true;
  return false;
}

std::vector<SampleRow> run_rve_samples(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t M = std::size_t(cfg.samples), R = std::size_t(cfg.reference_samples);
  const std::size_t nL = cfg.L_over_eps.size();
  std::vector<SampleRow> ref(R);
  std::vector<std::array<SampleRow, 3>> box(nL * M);
  const GridSpec torus = GridSpec::cube(cfg.d, cfg.reference_extent(), cfg.h, Topology::torus);
  const std::uint64_t ref_base = mix64(cfg.seed ^ kReferenceSalt);
  const double ref_scale = torus.side(0) / cfg.ensemble.epsilon;

  detail::parallel_for(R + nL * M, cfg.threads, [&](std::size_t task) {
    if (task < R) {
      const CoefficientField a = sample_field(cfg.ensemble, torus, RngSeed{ref_base, task});
      const EffectiveTensor e = torus_effective(a, cfg.solver);
      SampleRow& r = ref[task];
      r.stream = task;
      r.L_over_eps = ref_scale;
      r.kind = EstimatorKind::reference;
      r.tensor = e.matrix;
      r.solver_iters = e.solver_iterations;
      return;
    }
    const std::size_t t = task - R, li = t / M, s = t % M;
    const double L = cfg.L_over_eps[li];
    const GridSpec g = GridSpec::cube(cfg.d, cfg.box_cells(L), cfg.h, Topology::box);
    const std::uint64_t stream = level_stream(li, s);
    const CoefficientField a = sample_field(cfg.ensemble, g, RngSeed{cfg.seed, stream});
    const BoxProblem bp = solve_box_problem(a, cfg.kappa, cfg.solver);

    auto& out = box[t];
    const EffectiveTensor st = standard_rve(bp, a);
    const EffectiveTensor ov = oversampled_rve(bp, a, cfg.kappa);
    EffectiveTensor nf;
    try {
      nf = new_formula_rve(bp, a, cfg.kappa);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_system) throw;
      nf.kind = EstimatorKind::new_formula;
      nf.matrix = Tensor(cfg.d);
      nf.matrix.a.fill(std::numeric_limits<double>::quiet_NaN());
      nf.condition = std::numeric_limits<double>::infinity();
      nf.solver_iterations = st.solver_iterations;
    }
    const EffectiveTensor* est[3] = {&st, &ov, &nf};
    for (int k = 0; k < 3; ++k) {
      out[k].stream = stream;
      out[k].L_over_eps = L;
      out[k].kappa = k == 0 ? 0.0 : cfg.kappa;
      out[k].kind = est[k]->kind;
      out[k].tensor = est[k]->matrix;
      out[k].condition = est[k]->condition;
      out[k].solver_iters = st.solver_iterations;
    }
  });

  std::vector<SampleRow> rows = std::move(ref);
  rows.reserve(rows.size() + 3 * box.size());
  for (const auto& triple : box)
    for (const auto& r : triple) rows.push_back(r);
  return rows;
}

void write_sweep_csv(std::ostream& os, std::span<const SampleRow> rows, int d) {
  os << "seed_stream,L_over_eps,kappa,kind";
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) os << ",a" << i + 1 << j + 1;
  os << ",condition,solver_iters\n";
  for (const SampleRow& r : rows) {
    os << r.stream << ',' << format_double(r.L_over_eps) << ',' << format_double(r.kappa) << ','
       << to_string(r.kind);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ',' << format_double(r.tensor(i, j));
    os << ',' << format_double(r.condition) << ',' << r.solver_iters << '\n';
  }
}

std::vector<SampleRow> read_sweep_csv(std::istream& is, int* d_out) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::io, "empty sweep CSV");
  const auto header = split_csv(line);
  const int entries = int(header.size()) - 6;
  int d = 0;
  if (entries == 4) d = 2;
  else if (entries == 9) d = 3;
  if (d == 0 || header[0] != "seed_stream" || header[3] != "kind")
    fail(ErrorCode::io, "not a sweep CSV (unexpected header)");
  if (d_out) *d_out = d;
  std::vector<SampleRow> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) fail(ErrorCode::io, "sweep CSV row has wrong column count");
    SampleRow r;
    r.stream = std::stoull(f[0]);
    r.L_over_eps = parse_double(f[1]);
    r.kappa = parse_double(f[2]);
    try {
      r.kind = estimator_from_string(f[3]);
    } catch (const Error& e) {
      fail(ErrorCode::io, e.what());
    }
    r.tensor = Tensor(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) r.tensor(i, j) = parse_double(f[4 + i * d + j]);
    r.condition = parse_double(f[4 + entries]);
    r.solver_iters = std::stoi(f[5 + entries]);
    rows.push_back(r);
  }
  return rows;
}

const EstimatorStats* SweepResult::find(EstimatorKind kind, double L) const {
  for (const auto& s : stats)
    if (s.kind == kind && s.L_over_eps == L) return &s;
  return nullptr;
}

std::vector<double> SweepResult::scales() const {
  std::vector<double> out;
  for (const auto& s : stats)
    if (std::find(out.begin(), out.end(), s.L_over_eps) == out.end()) out.push_back(s.L_over_eps);
  std::sort(out.begin(), out.end());
  return out;
}

double SweepResult::exclusion_rate(EstimatorKind kind) const {
  int attempted = 0, excluded = 0;
  for (const auto& s : stats)
    if (s.kind == kind) {
      attempted += s.attempted;
      excluded += s.excluded;
    }
  return attempted > 0 ? double(excluded) / attempted : 0.0;
}

namespace {

std::optional<SlopeFit> try_fit(const std::vector<FitPoint>& pts) {
  try {
    return fit_loglog_slope(pts);
  } catch (const Error&) {
    return std::nullopt;
  }
}

} // namespace

SweepResult aggregate_sweep(std::span<const SampleRow> rows, int d) {
  SweepResult res;
  res.d = d;
  std::vector<Tensor> ref;
  std::vector<double> ref_scalar;
  for (const auto& r : rows)
    if (r.kind == EstimatorKind::reference) {
      ref.push_back(r.tensor);
      ref_scalar.push_back(scalar_part(r.tensor));
    }
  require(!ref.empty(), ErrorCode::invalid_argument, "sweep has no reference rows");
  const EffectiveTensor rt = combine_reference(ref);
  res.reference = rt.matrix;
  res.reference_se = rt.standard_error;
  res.reference_samples = rt.samples;
  res.reference_scalar = mean(ref_scalar);
  res.reference_scalar_se =
      ref_scalar.size() > 1 ? sample_std(ref_scalar) / std::sqrt(double(ref_scalar.size())) : 0.0;

  std::vector<double> scales;
  for (const auto& r : rows)
    if (r.kind != EstimatorKind::reference &&
        std::find(scales.begin(), scales.end(), r.L_over_eps) == scales.end())
      scales.push_back(r.L_over_eps);
  std::sort(scales.begin(), scales.end());

  const double ref_s = res.reference_scalar;
  for (EstimatorKind kind :
       {EstimatorKind::standard, EstimatorKind::oversampled, EstimatorKind::new_formula}) {
    std::vector<std::vector<double>> per_scale_samples;
    for (double L : scales) {
      EstimatorStats st;
      st.L_over_eps = L;
      st.kind = kind;
      st.mean = st.fluctuation = st.systematic = st.total = Tensor(d);
      std::vector<const SampleRow*> used;
      for (const auto& r : rows)
        if (r.kind == kind && r.L_over_eps == L) {
          ++st.attempted;
          if (r.excluded()) ++st.excluded;
          else used.push_back(&r);
        }
      if (st.attempted == 0) continue;
      st.reported = int(used.size());
      std::vector<double> s;
      for (const auto* r : used) s.push_back(scalar_part(r->tensor));
      if (!used.empty()) {
        const double M = double(used.size());
        for (int i = 0; i < 9; ++i) {
          double m = 0, v = 0, e = 0;
          for (const auto* r : used) m += r->tensor.a[i];
          m /= M;
          for (const auto* r : used) {
            v += (r->tensor.a[i] - m) * (r->tensor.a[i] - m);
            e += (r->tensor.a[i] - res.reference.a[i]) * (r->tensor.a[i] - res.reference.a[i]);
          }
          st.mean.a[i] = m;
          st.fluctuation.a[i] = std::sqrt(v / M);
          st.systematic.a[i] = std::abs(m - res.reference.a[i]);
          st.total.a[i] = std::sqrt(e / M);
        }
        const double m = mean(s);
        st.fluct.value = population_std(s);
        st.fluct.stderr_ = M > 1 ? st.fluct.value / std::sqrt(2.0 * (M - 1.0)) : 0.0;
        st.sys.value = std::abs(m - ref_s);
        st.sys.stderr_ = std::sqrt(sample_std(s) * sample_std(s) / M +
                                   res.reference_scalar_se * res.reference_scalar_se);
        std::vector<double> sq;
        for (double x : s) sq.push_back((x - ref_s) * (x - ref_s));
        st.tot.value = std::sqrt(mean(sq));
        st.tot.stderr_ =
            st.tot.value > 0 ? sample_std(sq) / std::sqrt(M) / (2.0 * st.tot.value) : 0.0;
      }
      per_scale_samples.push_back(std::move(s));
      res.stats.push_back(st);
    }

    // Slopes only for >= 3 scales, >= 30 reported samples each.
    SlopeSet slopes;
    std::vector<const EstimatorStats*> cells;
    for (const auto& st : res.stats)
      if (st.kind == kind) cells.push_back(&st);
    bool applicable = cells.size() >= 3;
    for (const auto* c : cells) applicable = applicable && c->reported >= 30;
    if (applicable) {
      std::vector<FitPoint> fp, sp, tp;
      for (const auto* c : cells) {
        fp.push_back({c->L_over_eps, c->fluct.value, c->fluct.stderr_});
        sp.push_back({c->L_over_eps, c->sys.value, c->sys.stderr_});
        tp.push_back({c->L_over_eps, c->tot.value, c->tot.stderr_});
      }
      slopes.fluctuation = try_fit(fp);
      slopes.systematic = try_fit(sp);
      slopes.total = try_fit(tp);
      if (slopes.systematic) {
        for (double shift : {2.0, -2.0}) {
          std::vector<FitPoint> shifted = sp;
          const double moved = ref_s + shift * res.reference_scalar_se;
          for (std::size_t k = 0; k < cells.size(); ++k)
            shifted[k].value = std::abs(mean(per_scale_samples[k]) - moved);
          const auto f = try_fit(shifted);
          const double change = f ? std::abs(f->slope - slopes.systematic->slope)
                                  : std::numeric_limits<double>::infinity();
          slopes.systematic_band = std::max(slopes.systematic_band, change);
        }
      }
    }
    res.slopes[kind] = slopes;
  }
  return res;
}

SweepResult rve_sweep(const SweepConfig& cfg, std::vector<SampleRow>* rows_out) {
  std::vector<SampleRow> rows = run_rve_samples(cfg);
  SweepResult res = aggregate_sweep(rows, cfg.d);
  if (rows_out) *rows_out = std::move(rows);
  return res;
}

// ---------------------------------------------------------------------------
// Decay

void DecayConfig::validate() const {
  require(d == 2 || d == 3, ErrorCode::invalid_argument, "d must be 2 or 3");
  require(height_over_eps >= 8 && width_over_eps >= 8, ErrorCode::invalid_argument,
          "slab must be at least 8 eps high and wide");
  require(samples >= 1, ErrorCode::invalid_argument, "samples must be positive");
  const double H = height_over_eps * ensemble.epsilon;
  if (T)
    require(*T > 0.0 && *T <= (H / 4) * (H / 4) * (1 + 1e-12), ErrorCode::configuration,
            "T must lie in (0, (H/4)^2]");
  ensemble.validate(slab());
}

GridSpec DecayConfig::slab() const {
  GridSpec g;
  g.d = d;
  g.h = h;
  g.topology = Topology::slab;
  g.n = {1, 1, 1};
  g.n[0] = cells_for(height_over_eps * ensemble.epsilon, h);
  for (int k = 1; k < d; ++k) g.n[k] = cells_for(width_over_eps * ensemble.epsilon, h);
  g.validate();
  return g;
}

double DecayConfig::massive_T() const {
  const double H = height_over_eps * ensemble.epsilon;
  return T.value_or((H / 4) * (H / 4));
}

DecayProfile decay_profile_from(const std::vector<std::vector<double>>& sample_energy,
                                const GridSpec& slab, double epsilon, double T) {
  DecayProfile p;
  p.T = T;
  p.samples = int(sample_energy.size());
  const int n0 = slab.n[0];
  const double H = slab.side(0);
  const double M = double(sample_energy.size());
  std::vector<double> mean_e(n0, 0.0);
  for (int l = 0; l < n0; ++l) {
    std::vector<double> e;
    for (const auto& s : sample_energy) e.push_back(s[l]);
    mean_e[l] = mean(e);
    const double rms = std::sqrt(mean_e[l]);
    const double se = (rms > 0 && M > 1) ? sample_std(e) / std::sqrt(M) / (2 * rms) : 0.0;
    p.layers.push_back({cell_center(slab, l) / epsilon, rms, se});
  }
  double total = 0, top = 0;
  for (int l = 0; l < n0; ++l) {
    total += mean_e[l];
    if (cell_center(slab, l) >= 0.75 * H) top += mean_e[l];
  }
  p.top_quarter_fraction = total > 0 ? top / total : 0.0;
  p.valid = p.top_quarter_fraction <= 0.01;

  std::vector<FitPoint> pts;
  for (const auto& L : p.layers)
    if (L.x_perp_over_eps * epsilon >= 2 * epsilon && L.x_perp_over_eps * epsilon <= H / 4)
      pts.push_back({L.x_perp_over_eps, L.rms, L.stderr_});
  p.fit = try_fit(pts);
  return p;
}

DecayProfile boundary_layer_decay(const DecayConfig& cfg) {
  cfg.validate();
  const GridSpec slab = cfg.slab();
  GridSpec torus = slab;
  torus.topology = Topology::torus;
  const double T = cfg.massive_T();
  const std::size_t M = std::size_t(cfg.samples);
  std::vector<std::vector<double>> energy(M);
  std::vector<int> iters(M, 0);

  detail::parallel_for(M, cfg.threads, [&](std::size_t s) {
    const CoefficientField a = sample_field(cfg.ensemble, torus, RngSeed{cfg.seed, s});
    const CorrectorSet set = compute_correctors(a, cfg.solver, false);
    const CoefficientField a_slab = a.with_topology(Topology::slab);
    std::vector<double> e(slab.n[0], 0.0);
    for (int i = 0; i < cfg.d; ++i) {
      const BoundaryLayerField bl =
          boundary_layer_corrector(a_slab, torus_face_trace(set.phi(i)), T, cfg.solver);
      for (int l = 0; l < slab.n[0]; ++l) e[l] += bl.energy_profile[l] / cfg.d;
      iters[s] += bl.iterations + set.correctors[i].iterations;
    }
    energy[s] = std::move(e);
  });

  DecayProfile p = decay_profile_from(energy, slab, cfg.ensemble.epsilon, T);
  p.delta = cfg.delta;
  for (int v : iters) p.solver_iters += v;
  return p;
}

void write_decay_csv(std::ostream& os, const DecayProfile& p) {
  os << "x_perp_over_eps,rms,stderr\n";
  for (const auto& l : p.layers)
    os << format_double(l.x_perp_over_eps) << ',' << format_double(l.rms) << ','
       << format_double(l.stderr_) << '\n';
}

DecayProfile read_decay_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) !=
                                     std::vector<std::string>{"x_perp_over_eps", "rms", "stderr"})
    fail(ErrorCode::io, "not a decay-profile CSV");
  DecayProfile p;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 3) fail(ErrorCode::io, "decay CSV row has wrong column count");
    p.layers.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
  }
  return p;
}

std::vector<double> single_mode_trace(const GridSpec& slab, int mode) {
  const int ax = slab.d - 1;
  const double W = slab.side(ax);
  std::vector<double> t(layer_size(slab, 0));
  for_each_cell(slab, [&](const Index& c, std::size_t) {
    if (c[0] != 0) return;
    t[layer_index(slab, 0, c)] =
        std::cos(2 * std::numbers::pi * mode * cell_center(slab, c[ax]) / W);
  });
  return t;
}

ModalControl modal_decay_control(const GridSpec& slab, double epsilon, double T, int mode,
                                 const SolverOptions& opts) {
  const CoefficientField a =
      CoefficientField::isotropic(slab, std::vector<double>(slab.cells(), 1.0), 1.0, epsilon);
  const BoundaryLayerField bl =
      boundary_layer_corrector(a, single_mode_trace(slab, mode), T, opts);
  const double H = slab.side(0);
  std::vector<double> x, y;
  for (int l = 0; l < slab.n[0]; ++l) {
    const double xc = cell_center(slab, l);
    if (xc >= 2 * epsilon && xc <= H / 4) {
      x.push_back(xc);
      y.push_back(std::sqrt(bl.energy_profile[l]));
    }
  }
  ModalControl m;
  m.fitted_rate = -fit_log_linear(x, y).slope;
  const double k = 2 * std::numbers::pi * mode / slab.side(slab.d - 1);
  m.analytic_rate = std::sqrt(k * k + 1.0 / T);
  m.relative_error = std::abs(m.fitted_rate - m.analytic_rate) / m.analytic_rate;
  return m;
}

// ---------------------------------------------------------------------------
// Localization

namespace {

double weight(const GridSpec& g, const std::array<double, 3>& x, double gamma, double T) {
  double r2 = x[0] * x[0];
  for (int k = 1; k < g.d; ++k) {
    const double W = g.side(k);
    double dx = std::abs(x[k] - 0.5 * W);
    dx = std::min(dx, W - dx);
    r2 += dx * dx;
  }
  return std::exp(-gamma * std::sqrt(r2) / std::sqrt(T));
}

double weighted_energy(const ScalarField& u, const BoundaryCondition& bc, double gamma,
                       double T) {
  const GridSpec& g = u.grid;
  const VectorField grad = gradient(u, bc);
  const double vol = g.cell_volume();
  double e = 0.0;
  for (int k = 0; k < g.d; ++k)
    for_each_face(g, k, [&](const Index& f, std::size_t idx) {
      std::array<double, 3> x{};
      for (int j = 0; j < g.d; ++j) x[j] = j == k ? f[j] * g.h : cell_center(g, f[j]);
      e += grad.comp[k][idx] * grad.comp[k][idx] * weight(g, x, gamma, T) * vol;
    });
  for_each_cell(g, [&](const Index& c, std::size_t idx) {
    std::array<double, 3> x{};
    for (int j = 0; j < g.d; ++j) x[j] = cell_center(g, c[j]);
    e += u.values[idx] * u.values[idx] / T * weight(g, x, gamma, T) * vol;
  });
  return e;
}

} // namespace

LocalizationReport localization_check(const CoefficientField& slab,
                                      const std::vector<double>& trace,
                                      std::span<const double> T_list,
                                      std::span<const double> gammas, const SolverOptions& opts) {
  const GridSpec& g = slab.grid;
  require(g.topology == Topology::slab, ErrorCode::invalid_argument,
          "localization check runs on a slab");
  require(!T_list.empty() && !gammas.empty(), ErrorCode::invalid_argument,
          "localization check needs T and gamma values");
  for (double gm : gammas)
    require(gm > 0.0, ErrorCode::invalid_argument, "gamma must be positive");

  // g = cutoff * trace, cutoff = max(0, 1 - x_perp / eps)
  ScalarField ext(g);
  for_each_cell(g, [&](const Index& c, std::size_t idx) {
    const double zeta = std::max(0.0, 1.0 - cell_center(g, c[0]) / slab.epsilon);
    ext.values[idx] = zeta * trace[layer_index(g, 0, c)];
  });

  LocalizationReport rep;
  for (double T : T_list) {
    const BoundaryLayerField bl = boundary_layer_corrector(slab, trace, T, opts);
    BoundaryCondition bc = BoundaryCondition::homogeneous(1.0 / T);
    bc.lower[0] = trace;
    std::vector<LocalizationEntry> row;
    for (double gm : gammas) {
      LocalizationEntry e;
      e.T = T;
      e.gamma = gm;
      e.lhs = weighted_energy(bl.theta, bc, gm, T);
      e.rhs = weighted_energy(ext, bc, gm, T);
      e.ratio = e.rhs > 0 ? e.lhs / e.rhs : 0.0;
      rep.max_ratio = std::max(rep.max_ratio, e.ratio);
      row.push_back(e);
    }
    for (const auto& a : row)
      for (const auto& b : row)
        if (std::abs(a.gamma - 0.5 * b.gamma) <= 1e-9 * b.gamma && b.ratio > 0)
          rep.max_halving_growth = std::max(rep.max_halving_growth, a.ratio / b.ratio);
    rep.entries.insert(rep.entries.end(), row.begin(), row.end());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Two-scale

void TwoScaleConfig::validate() const {
  require(d == 2 || d == 3, ErrorCode::invalid_argument, "d must be 2 or 3");
  require(!eps_over_L.empty(), ErrorCode::invalid_argument, "need at least one eps/L value");
  require(samples >= 1, ErrorCode::invalid_argument, "samples must be positive");
  for (double r : eps_over_L) {
    require(r > 0.0 && r <= 0.5, ErrorCode::invalid_argument, "eps/L must lie in (0, 1/2]");
    const int n = cells_for(ensemble.epsilon / r, h);
    ensemble.validate(GridSpec::cube(d, n, h, Topology::torus));
  }
}

VectorField smooth_forcing(const GridSpec& g) {
  VectorField f(g);
  const double two_pi = 2 * std::numbers::pi;
  for (int k = 0; k < g.d; ++k) {
    const int j = (k + 1) % g.d;
    for_each_face(g, k, [&](const Index& fi, std::size_t idx) {
      const double xk = fi[k] * g.h, xj = cell_center(g, fi[j]);
      f.comp[k][idx] = std::sin(two_pi * xj / g.side(j)) + 0.5 * std::cos(two_pi * xk / g.side(k));
    });
  }
  return f;
}

TwoScaleSample two_scale_sample(const CoefficientField& a, const SolverOptions& opts) {
  const GridSpec& g = a.grid;
  const CorrectorSet set = compute_correctors(a, opts, true);
  const VectorField forcing = smooth_forcing(g);
  const ScalarField divg = divergence(forcing);

  const SparseSpdOperator op = assemble(a, BoundaryCondition::homogeneous());
  ScalarField rhs = divg;
  for (double& v : rhs.values) v *= g.cell_volume();
  const ScalarField hsol = solve(op, rhs, opts).u;
  const ScalarField hbar = solve_constant_tensor_periodic(set.abar, divg);
  const TwoScaleResidual r = two_scale_residual(a, set, hbar, forcing);

  auto seminorm = [&](const ScalarField& x, const ScalarField& y) {
    ScalarField e(g);
    for (std::size_t c = 0; c < e.size(); ++c) e.values[c] = x.values[c] - y.values[c];
    const VectorField de = gradient(e);
    return std::sqrt(inner_faces(de, de));
  };
  TwoScaleSample s;
  s.violation = r.max_violation;
  // Below solver resolution the ratio is roundoff over roundoff.
  const double den = seminorm(hsol, hbar);
  const double floor = 1e3 * opts.tol * seminorm(hbar, ScalarField(g));
  s.ratio = den > floor ? seminorm(hsol, r.htilde) / den : 0.0;
  return s;
}

TwoScaleReport two_scale_residual_experiment(const TwoScaleConfig& cfg) {
  cfg.validate();
  const std::size_t M = std::size_t(cfg.samples), nl = cfg.eps_over_L.size();
  TwoScaleReport rep;
  rep.tolerance = 10.0 * cfg.solver.tol;
  rep.samples.resize(nl * M);
  detail::parallel_for(nl * M, cfg.threads, [&](std::size_t t) {
    const std::size_t li = t / M, s = t % M;
    const double r = cfg.eps_over_L[li];
    const GridSpec g =
        GridSpec::cube(cfg.d, cells_for(cfg.ensemble.epsilon / r, cfg.h), cfg.h, Topology::torus);
    const std::uint64_t stream = level_stream(li, s);
    const CoefficientField a = sample_field(cfg.ensemble, g, RngSeed{cfg.seed, stream});
    TwoScaleSample smp = two_scale_sample(a, cfg.solver);
    smp.eps_over_L = r;
    smp.stream = stream;
    rep.samples[t] = smp;
  });

  rep = summarize_two_scale(std::move(rep.samples), rep.tolerance);

  if (!(rep.max_violation <= rep.tolerance))
    fail(ErrorCode::consistency, "two-scale residual identity violated: max relative defect " +
                                     format_double(rep.max_violation) + " > " +
                                     format_double(rep.tolerance));
  return rep;
}

TwoScaleReport summarize_two_scale(std::vector<TwoScaleSample> samples, double tolerance) {
  TwoScaleReport rep;
  rep.tolerance = tolerance;
  rep.samples = std::move(samples);
  std::vector<double> order;
  for (const auto& s : rep.samples)
    if (std::find(order.begin(), order.end(), s.eps_over_L) == order.end())
      order.push_back(s.eps_over_L);
  for (double r : order) {
    TwoScaleLevel lv;
    lv.eps_over_L = r;
    std::vector<double> ratios;
    for (const auto& smp : rep.samples) {
      if (smp.eps_over_L != r) continue;
      ratios.push_back(smp.ratio);
      lv.max_violation = std::max(lv.max_violation, smp.violation);
    }
    lv.samples = int(ratios.size());
    lv.mean_ratio = mean(ratios);
    lv.ratio_se = ratios.size() > 1 ? sample_std(ratios) / std::sqrt(double(ratios.size())) : 0.0;
    rep.max_violation = std::max(rep.max_violation, lv.max_violation);
    rep.levels.push_back(lv);
  }
  std::vector<TwoScaleLevel> sorted = rep.levels;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.eps_over_L > b.eps_over_L; });
  rep.decreasing = sorted.size() >= 2;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    rep.decreasing = rep.decreasing && (sorted[i].mean_ratio < sorted[i - 1].mean_ratio ||
                                         sorted[i - 1].mean_ratio == 0.0);
  return rep;
}

void write_two_scale_csv(std::ostream& os, const TwoScaleReport& r) {
  os << "seed_stream,eps_over_L,identity_violation,h1_ratio\n";
  for (const auto& s : r.samples)
    os << s.stream << ',' << format_double(s.eps_over_L) << ',' << format_double(s.violation)
       << ',' << format_double(s.ratio) << '\n';
}

std::vector<TwoScaleSample> read_two_scale_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) ||
      split_csv(line) != std::vector<std::string>{"seed_stream", "eps_over_L",
                                                  "identity_violation", "h1_ratio"})
    fail(ErrorCode::io, "not a two-scale CSV");
  std::vector<TwoScaleSample> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 4) fail(ErrorCode::io, "two-scale CSV row has wrong column count");
    TwoScaleSample s;
    s.stream = std::stoull(f[0]);
    s.eps_over_L = parse_double(f[1]);
    s.violation = parse_double(f[2]);
    s.ratio = parse_double(f[3]);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

std::string Manifest::text() const {
  std::string body, meta;
  for (const auto& [k, v] : entries_) {
    const std::string line = k + " = " + v + "\n";
    if (k.rfind("manifest.", 0) == 0) meta += line;
    else body += line;
  }
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  return body + meta + "manifest.hash = " + hash + "\n";
}

} // namespace hrve
