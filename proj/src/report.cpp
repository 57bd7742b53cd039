#include "hrve/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace hrve {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

std::string pm(const ErrorStat& e) { return fmt("%.4e +- %.1e", e.value, e.stderr_); }

constexpr EstimatorKind kKinds[] = {EstimatorKind::standard, EstimatorKind::oversampled,
                                    EstimatorKind::new_formula};

bool all_errors_zero(const SweepResult& r) {
  for (const auto& s : r.stats)
    if (s.fluct.value != 0.0 || s.sys.value != 0.0 || s.tot.value != 0.0) return false;
  return !r.stats.empty();
}

const SlopeSet* slopes(const SweepResult& r, EstimatorKind k) {
  const auto it = r.slopes.find(k);
  return it == r.slopes.end() ? nullptr : &it->second;
}

} // namespace

std::string format_slope(const std::optional<SlopeFit>& f) {
  if (!f) return "n/a";
  return fmt("%+.3f +- %.3f", f->slope, f->stderr_);
}

// ---------------------------------------------------------------------------
// Sweep

void write_sweep_summary(std::ostream& os, const SweepResult& r) {
  os << "reference tensor (" << r.reference_samples << " torus samples):\n"
     << r.reference.str() << "\nstandard error:\n" << r.reference_se.str() << '\n'
     << "scalar part trace/d = " << fmt("%.6f +- %.2e", r.reference_scalar, r.reference_scalar_se)
     << "\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %7s %5s %5s %5s  %-21s  %-21s  %-21s\n", "estimator",
                "L/eps", "M", "kept", "excl", "fluctuation", "systematic", "total");
  os << line;
  for (const auto& s : r.stats) {
    std::snprintf(line, sizeof(line), "%-12s %7g %5d %5d %5d  %-21s  %-21s  %-21s\n",
                  to_string(s.kind), s.L_over_eps, s.attempted, s.reported, s.excluded,
                  pm(s.fluct).c_str(), pm(s.sys).c_str(), pm(s.tot).c_str());
    os << line;
  }
  os << "\nlog-log slopes against L/eps (weighted, +- standard error):\n";
  std::snprintf(line, sizeof(line), "%-12s  %-16s  %-16s  %-16s\n", "estimator", "fluctuation",
                "systematic", "total");
  os << line;
  for (auto k : kKinds) {
    const SlopeSet* s = slopes(r, k);
    if (!s) continue;
    std::snprintf(line, sizeof(line), "%-12s  %-16s  %-16s  %-16s\n", to_string(k),
                  format_slope(s->fluctuation).c_str(), format_slope(s->systematic).c_str(),
                  format_slope(s->total).c_str());
    os << line;
  }
  if (const SlopeSet* s = slopes(r, EstimatorKind::standard); s && s->systematic)
    os << "systematic slope shift under +-2 reference standard errors: "
       << fmt("%.3f", s->systematic_band) << '\n';
  const double rate = r.exclusion_rate(EstimatorKind::new_formula);
  os << "new-formula exclusion rate: " << fmt("%.4f", rate)
     << (rate >= 0.05 ? " (FLAGGED, >= 5%)" : "") << '\n';
}

void write_sweep_data(std::ostream& os, const SweepResult& r) {
  os << "# L_over_eps";
  for (auto k : kKinds)
    for (const char* q : {"fluct", "sys", "total"})
      os << ' ' << to_string(k) << '_' << q << ' ' << to_string(k) << '_' << q << "_se";
  os << '\n';
  for (double L : r.scales()) {
    os << format_double(L);
    for (auto k : kKinds) {
      const EstimatorStats* s = r.find(k, L);
      if (!s) {
        os << " nan nan nan nan nan nan";
        continue;
      }
      for (const ErrorStat* e : {&s->fluct, &s->sys, &s->tot})
        os << ' ' << format_double(e->value) << ' ' << format_double(e->stderr_);
    }
    os << '\n';
  }
}

void write_sweep_gnuplot(std::ostream& os, const std::string& data) {
  os << "set logscale xy\n"
        "set xlabel 'L/eps'\n"
        "set ylabel 'error of trace/d'\n"
        "set key top right\n"
        "plot '"
     << data << "' using 1:2:3 with yerrorlines title 'standard fluctuation', \\\n"
     << "     '' using 1:4:5 with yerrorlines title 'standard systematic', \\\n"
     << "     '' using 1:10:11 with yerrorlines title 'oversampled systematic', \\\n"
     << "     '' using 1:18:19 with yerrorlines title 'new-formula total'\n";
}

std::vector<Check> sweep_checks(const SweepResult& r, double bs) {
  std::vector<Check> out;
  const bool zero = all_errors_zero(r);
  const double half_d = 0.5 * r.d;
  const SlopeSet* st = slopes(r, EstimatorKind::standard);
  const SlopeSet* ov = slopes(r, EstimatorKind::oversampled);
  const SlopeSet* nf = slopes(r, EstimatorKind::new_formula);
  auto na = [&](const std::string& name) {
    out.push_back({name, zero, zero ? "not applicable, all errors vanish" : "slope unavailable"});
  };

  {
    const std::string name = "standard fluctuation slope";
    if (!st || !st->fluctuation) na(name);
    else {
      const double s = st->fluctuation->slope, tol = 0.3 * bs;
      out.push_back({name, std::abs(s + half_d) <= tol,
                     fmt("%+.3f, band ", s) + fmt("%+.2f +- %.3f", -half_d, tol)});
    }
  }
  {
    const std::string name = "standard systematic slope";
    if (!st || !st->systematic) na(name);
    else {
      const double s = st->systematic->slope, tol = (0.4 + st->systematic_band) * bs;
      out.push_back({name, std::abs(s + 1.0) <= tol, fmt("%+.3f, band -1 +- %.3f", s, tol)});
    }
  }
  {
    const double rate = r.exclusion_rate(EstimatorKind::new_formula);
    out.push_back({"new-formula exclusion rate", rate < 0.01, fmt("%.4f, limit 0.01", rate)});
  }
  if (r.d == 2) {
    const std::string name = "new-formula total slope vs standard systematic slope";
    if (!st || !nf || !st->systematic || !nf->total) na(name);
    else {
      const double gap = st->systematic->slope - nf->total->slope;
      out.push_back({name, gap >= 0.3, fmt("steeper by %+.3f, needs >= 0.3", gap)});
    }
  } else {
    bool ok = !r.scales().empty();
    std::string detail;
    for (double L : r.scales()) {
      const auto* a = r.find(EstimatorKind::new_formula, L);
      const auto* b = r.find(EstimatorKind::standard, L);
      const bool below = a && b && (a->tot.value < b->tot.value || (zero && a->tot.value == 0));
      ok = ok && below;
      if (a && b) detail += fmt("L/eps %g: ", L) + fmt("%.3e vs %.3e; ", a->tot.value, b->tot.value);
    }
    out.push_back({"new-formula total error below standard total error", ok, detail});
  }
  {
    const std::string name = "oversampled systematic error vs standard";
    bool ok = !r.scales().empty();
    std::string detail;
    for (double L : r.scales()) {
      const auto* a = r.find(EstimatorKind::oversampled, L);
      const auto* b = r.find(EstimatorKind::standard, L);
      ok = ok && a && b && a->sys.value <= b->sys.value;
    }
    if (st && ov && st->systematic && ov->systematic) {
      const double diff = ov->systematic->slope - st->systematic->slope;
      ok = ok && std::abs(diff) <= 0.3 * bs;
      detail = fmt("slope difference %+.3f, limit %.3f", diff, 0.3 * bs);
    } else if (!zero) {
      ok = false;
      detail = "slope unavailable";
    } else {
      detail = "not applicable, all errors vanish";
    }
    out.push_back({name, ok, (ok ? "below at every L, " : "") + detail});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decay

DecayProfile refit_decay(DecayProfile p) {
  if (p.layers.empty()) return p;
  const double H = p.layers.front().x_perp_over_eps + p.layers.back().x_perp_over_eps;
  std::vector<FitPoint> pts;
  bool positive = true;
  for (const auto& l : p.layers)
    if (l.x_perp_over_eps >= 2.0 && l.x_perp_over_eps <= H / 4) {
      pts.push_back({l.x_perp_over_eps, l.rms, l.stderr_});
      positive = positive && l.rms > 0;
    }
  p.fit.reset();
  if (pts.size() >= 3 && positive) p.fit = fit_loglog_slope(pts);
  double total = 0, top = 0;
  for (const auto& l : p.layers) {
    total += l.rms * l.rms;
    if (l.x_perp_over_eps >= 0.75 * H) top += l.rms * l.rms;
  }
  p.top_quarter_fraction = total > 0 ? top / total : 0.0;
  p.valid = p.top_quarter_fraction <= 0.01;
  return p;
}

void write_decay_summary(std::ostream& os, const DecayProfile& p) {
  os << "layers: " << p.layers.size();
  if (p.samples > 0) os << ", samples: " << p.samples << ", T = " << format_double(p.T);
  os << '\n'
     << "fitted exponent of the gradient RMS over [2 eps, H/4]: " << format_slope(p.fit) << '\n'
     << "top-quarter energy fraction: " << fmt("%.3e", p.top_quarter_fraction)
     << (p.valid ? "" : " (INVALID, > 1%)") << '\n';
  char line[128];
  std::snprintf(line, sizeof(line), "%12s  %-12s %-10s\n", "x_perp/eps", "rms", "stderr");
  os << line;
  const std::size_t stride = std::max<std::size_t>(1, p.layers.size() / 16);
  for (std::size_t i = 0; i < p.layers.size(); i += stride) {
    const auto& l = p.layers[i];
    std::snprintf(line, sizeof(line), "%12.4g  %-12.4e %-10.2e\n", l.x_perp_over_eps, l.rms,
                  l.stderr_);
    os << line;
  }
}

void write_decay_gnuplot(std::ostream& os, const std::string& data) {
  const bool csv = data.size() > 4 && data.substr(data.size() - 4) == ".csv";
  if (csv) os << "set datafile separator ','\n";
  os << "set logscale xy\n"
        "set xlabel 'x_perp/eps'\n"
        "set ylabel 'annealed RMS of grad theta'\n"
        "plot '"
     << data << "' using 1:2:3 " << (csv ? "every ::1 " : "")
     << "with yerrorbars title 'boundary layer'\n";
}

std::vector<Check> decay_checks(const DecayProfile& p, int d, double bs) {
  std::vector<Check> out;
  out.push_back({"profile validity", p.valid,
                 fmt("top-quarter fraction %.3e, limit 0.01", p.top_quarter_fraction)});
  if (!p.fit) {
    out.push_back({"decay exponent", false, "exponent unavailable"});
    return out;
  }
  const double s = p.fit->slope, c = -0.5 * d, tol = (p.delta + 0.2) * bs;
  out.push_back({"decay exponent band", std::abs(s - c) <= tol,
                 fmt("%+.3f, band ", s) + fmt("%+.2f +- %.2f", c, tol)});
  if (d == 2) out.push_back({"decay exponent ceiling", s <= -0.8, fmt("%+.3f, needs <= -0.8", s)});
  return out;
}

// ---------------------------------------------------------------------------
// Two-scale

void write_two_scale_summary(std::ostream& os, const TwoScaleReport& r) {
  char line[160];
  std::snprintf(line, sizeof(line), "%10s %5s  %-24s %-12s\n", "eps/L", "M", "H1 ratio",
                "max defect");
  os << line;
  for (const auto& l : r.levels) {
    std::snprintf(line, sizeof(line), "%10.5g %5d  %-24s %-12.3e\n", l.eps_over_L, l.samples,
                  fmt("%.4f +- %.4f", l.mean_ratio, l.ratio_se).c_str(), l.max_violation);
    os << line;
  }
  os << "max identity defect: " << fmt("%.3e", r.max_violation);
  if (r.tolerance > 0) os << " (tolerance " << fmt("%.1e", r.tolerance) << ")";
  os << "\nratio decreasing in eps/L: " << (r.decreasing ? "yes" : "no") << '\n';
}

std::vector<Check> two_scale_checks(const TwoScaleReport& r, double bs) {
  std::vector<Check> out;
  out.push_back({"identity defect", r.max_violation <= r.tolerance,
                 fmt("%.3e, tolerance %.1e", r.max_violation, r.tolerance)});
  out.push_back({"ratio decreasing", r.decreasing, r.decreasing ? "yes" : "no"});
  if (r.levels.empty()) return out;
  const auto smallest = *std::min_element(
      r.levels.begin(), r.levels.end(),
      [](const auto& a, const auto& b) { return a.eps_over_L < b.eps_over_L; });
  out.push_back({"ratio at smallest eps/L", smallest.mean_ratio <= 0.5 * bs,
                 fmt("%.4f, limit %.3f", smallest.mean_ratio, 0.5 * bs)});
  return out;
}

// ---------------------------------------------------------------------------
// Localization

void write_localization_csv(std::ostream& os, const LocalizationReport& r) {
  os << "T,gamma,lhs,rhs,ratio\n";
  for (const auto& e : r.entries)
    os << format_double(e.T) << ',' << format_double(e.gamma) << ',' << format_double(e.lhs)
       << ',' << format_double(e.rhs) << ',' << format_double(e.ratio) << '\n';
}

void write_localization_summary(std::ostream& os, const LocalizationReport& r) {
  char line[160];
  std::snprintf(line, sizeof(line), "%10s %8s  %-12s %-12s %-10s\n", "T", "gamma", "lhs", "rhs",
                "ratio");
  os << line;
  for (const auto& e : r.entries) {
    std::snprintf(line, sizeof(line), "%10.4g %8.4g  %-12.4e %-12.4e %-10.4f\n", e.T, e.gamma,
                  e.lhs, e.rhs, e.ratio);
    os << line;
  }
  os << "max ratio: " << fmt("%.4f", r.max_ratio)
     << ", max growth when gamma halves: " << fmt("%.4f", r.max_halving_growth) << '\n';
}

std::vector<Check> localization_checks(const LocalizationReport& r, double bs) {
  return {{"weighted energy ratio", r.max_ratio <= 50 * bs,
           fmt("max %.4f, limit %.1f", r.max_ratio, 50 * bs)},
          {"growth under halving gamma", r.max_halving_growth <= 4 * bs,
           fmt("max %.4f, limit %.1f", r.max_halving_growth, 4 * bs)}};
}

} // namespace hrve
