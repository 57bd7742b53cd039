#include "hrve/config.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "hrve/report.hpp"
#include "hrve/snapshot.hpp"

namespace hrve {

namespace {

namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void key_error(const std::string& key, const std::string& what) {
  fail(ErrorCode::usage, "--" + key + ": " + what);
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

bool parse_real(const std::string& s, double& v) {
  // a or a/b
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    double num = 0, den = 0;
    if (!parse_real(s.substr(0, slash), num) || !parse_real(s.substr(slash + 1), den) ||
        den == 0.0)
      return false;
    v = num / den;
    return true;
  }
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  return r.ec == std::errc() && r.ptr == last && std::isfinite(v);
}

bool parse_int(const std::string& s, long long& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_uint(const std::string& s, std::uint64_t& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_flag(const std::string& s, bool& v) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return v = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return v = false, true;
  return false;
}

struct Range {
  double lo;
  bool lo_open;
  double hi;
  bool hi_open;
  const char* text;

  bool contains(double v) const {
    return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  }
};

const std::map<std::string, Range>& ranges() {
  static const std::map<std::string, Range> r{
      {"threads", {0, false, 4096, false, "[0, 4096]"}},
      {"tol", {0, true, 1, true, "(0, 1)"}},
      {"max_iters", {0, false, kInf, true, ">= 0"}},
      {"verbosity", {0, false, 2, false, "{0, 1, 2}"}},
      {"d", {2, false, 3, false, "{2, 3}"}},
      {"h", {0, true, kInf, true, "> 0"}},
      {"lambda", {0, true, 1, false, "λ ∈ (0, 1]"}},
      {"epsilon", {0, true, kInf, true, "> 0"}},
      {"variance", {0, false, kInf, true, ">= 0"}},
      {"intensity", {0, false, kInf, true, ">= 0"}},
      {"constant", {0, true, 1, false, "(0, 1]"}},
      {"n", {4, false, 4096, false, "[4, 4096]"}},
      {"kappa", {0, true, 0.25, false, "κ ∈ (0, 1/4]"}},
      {"samples", {1, false, kInf, true, ">= 1"}},
      {"reference_cells", {0, false, kInf, true, ">= 0"}},
      {"reference_samples", {1, false, kInf, true, ">= 1"}},
      {"height_over_eps", {8, false, kInf, true, ">= 8"}},
      {"width_over_eps", {8, false, kInf, true, ">= 8"}},
      {"T", {0, true, kInf, true, "> 0"}},
      {"delta", {0, true, kInf, true, "> 0"}},
      {"mode", {0, false, kInf, true, ">= 0"}},
      {"band_scale", {0, true, kInf, true, "> 0"}},
      // list entries
      {"L_over_eps", {8, false, kInf, true, "every entry >= 8"}},
      {"eps_over_L", {0, true, 0.5, false, "every entry in (0, 1/2]"}},
      {"T_list", {0, true, kInf, true, "every entry > 0"}},
      {"gamma", {0, true, kInf, true, "every entry > 0"}},
  };
  return r;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

const KeySpec& key_spec(const std::string& name) {
  const KeySpec* k = find_key(name);
  if (!k) key_error(name, "unknown key");
  return *k;
}

void check_range(const std::string& key, double v, const std::string& raw) {
  const auto it = ranges().find(key);
  if (it != ranges().end() && !it->second.contains(v))
    key_error(key, key + " = " + raw + " violates " + it->second.text);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split(value, ',')) {
    double v = 0;
    if (!parse_real(item, v)) key_error(key, "expected a comma-separated list of numbers, got '" +
                                                 value + "'");
    check_range(key, v, item);
    out.push_back(v);
  }
  if (out.empty()) key_error(key, "empty list");
  return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Schema

const std::vector<KeySpec>& config_schema() {
  using V = ValueType;
  static const std::vector<KeySpec> s{
      {"out", V::text, "hrve-out", "output directory (gen-field: a .hrve path is a file)", {}},
      {"threads", V::integer, "0", "worker threads, 0 = all cores; HRVE_THREADS caps it", {}},
      {"tol", V::real, "1e-10", "relative residual tolerance of the linear solver", {}},
      {"max_iters", V::integer, "0", "solver iteration cap, 0 = 50 x largest extent", {}},
      {"preconditioner", V::choice, "jacobi", "CG preconditioner", {"jacobi", "multigrid"}},
      {"verbosity", V::integer, "1", "0 quiet, 1 stages, 2 detail", {}},
      {"seed", V::unsigned_integer, "1", "base seed of every stochastic output", {}},
      {"d", V::integer, "2", "dimension", {}},
      {"h", V::real, "1", "grid spacing", {}},
      {"kind", V::choice, "gaussian", "coefficient ensemble",
       {"gaussian", "inclusions", "constant", "laminate", "checkerboard"}},
      {"lambda", V::real, "0.25", "ellipticity ratio; values in [lambda, 1]", {}},
      {"epsilon", V::real, "4", "correlation length (inclusion radius)", {}},
      {"covariance", V::choice, "squared-exponential", "gaussian covariance family",
       {"squared-exponential", "exponential", "triangular"}},
      {"variance", V::real, "1", "gaussian pointwise variance", {}},
      {"map_center", V::real, "", "center of the map into [lambda, 1], default (1+lambda)/2", {}},
      {"map_slope", V::real, "", "slope of the map, default (1-lambda)/4", {}},
      {"intensity", V::real, "", "Poisson intensity for inclusions, default 0.1/epsilon^d", {}},
      {"constant", V::real, "1", "value of the constant ensemble", {}},
      {"n", V::integer, "64", "cells per side (gen-field, corrector)", {}},
      {"topology", V::choice, "torus", "grid topology (gen-field)", {"torus", "box", "slab"}},
      {"stream", V::unsigned_integer, "0", "sample stream (gen-field, corrector)", {}},
      {"field", V::text, "", "input field snapshot (corrector)", {}},
      {"sigma", V::flag, "false", "also compute the flux corrector (corrector)", {}},
      {"L_over_eps", V::list, "8,16,32", "box sizes in units of epsilon (rve-sweep)", {}},
      {"kappa", V::real, "0.25", "oversampling margin, in (0, 1/4]", {}},
      {"samples", V::integer, "", "samples per level; default 200 / 100 / 50 / 1", {}},
      {"reference_cells", V::integer, "0", "reference torus cells per side, 0 = 4 x largest box", {}},
      {"reference_samples", V::integer, "100", "reference torus samples", {}},
      {"small_reference", V::flag, "false", "allow a reference torus below 4x the largest box", {}},
      {"height_over_eps", V::real, "64", "slab height H in units of epsilon", {}},
      {"width_over_eps", V::real, "64", "slab width in units of epsilon", {}},
      {"T", V::real, "", "massive term of the boundary layer, default (H/4)^2", {}},
      {"delta", V::real, "0.5", "slack of the decay acceptance band", {}},
      {"eps_over_L", V::list, "1/8,1/16,1/32", "scale ratios (two-scale)", {}},
      {"T_list", V::list, "16,64,256", "massive terms in units of epsilon^2 (localize)", {}},
      {"gamma", V::list, "0.05,0.1", "weight rates (localize)", {}},
      {"trace", V::choice, "mode", "boundary data (localize)", {"mode", "corrector"}},
      {"mode", V::integer, "1", "tangential Fourier mode of the trace (localize)", {}},
      {"input", V::text, "", "comma-separated CSV paths (report)", {}},
      {"assert", V::flag, "false", "check acceptance thresholds, exit 3 on failure", {}},
      {"band_scale", V::real, "1", "multiplier of the --assert tolerance bands", {}},
  };
  return s;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"gen-field", "corrector", "rve-sweep", "bl-decay",
                                          "two-scale", "localize",  "report"};
  return s;
}

// ---------------------------------------------------------------------------
// RunConfig

RunConfig::RunConfig(std::string command) {
  if (!command.empty()) set_command(command);
  for (const auto& k : config_schema())
    if (!k.fallback.empty()) values_[k.name] = k.fallback;
}

void RunConfig::set_command(const std::string& name) {
  if (std::find(subcommands().begin(), subcommands().end(), name) == subcommands().end())
    fail(ErrorCode::usage, "unknown subcommand '" + name + "'");
  command_ = name;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = normalize_key(raw_key);
  const KeySpec& spec = key_spec(key);
  const std::string value = trim(raw_value);
  if (value.empty()) {
    if (!spec.fallback.empty()) key_error(key, "a value is required");
    values_.erase(key);
    explicit_[key] = true;
    return;
  }
  switch (spec.type) {
  case ValueType::integer: {
    long long v = 0;
    if (!parse_int(value, v)) key_error(key, "expected an integer, got '" + value + "'");
    check_range(key, double(v), value);
    break;
  }
  case ValueType::unsigned_integer: {
    std::uint64_t v = 0;
    if (!parse_uint(value, v))
      key_error(key, "expected a non-negative integer, got '" + value + "'");
    break;
  }
  case ValueType::real: {
    double v = 0;
    if (!parse_real(value, v)) key_error(key, "expected a number, got '" + value + "'");
    check_range(key, v, value);
    break;
  }
  case ValueType::list: parse_list(key, value); break;
  case ValueType::flag: {
    bool b = false;
    if (!parse_flag(value, b)) key_error(key, "expected true or false, got '" + value + "'");
    break;
  }
  case ValueType::choice:
    if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
      std::string opts;
      for (const auto& c : spec.choices) opts += (opts.empty() ? "" : ", ") + c;
      key_error(key, "'" + value + "' is not one of " + opts);
    }
    break;
  case ValueType::text: break;
  }
  values_[key] = value;
  explicit_[key] = true;
}

bool RunConfig::has(const std::string& key) const { return values_.count(normalize_key(key)) > 0; }

bool RunConfig::is_explicit(const std::string& key) const {
  return explicit_.count(normalize_key(key)) > 0;
}

std::string RunConfig::text(const std::string& raw_key) const {
  const std::string key = normalize_key(raw_key);
  key_spec(key);
  const auto it = values_.find(key);
  if (it == values_.end()) key_error(key, "no value set");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  double v = 0;
  parse_real(text(key), v);
  return v;
}

long long RunConfig::integer(const std::string& key) const {
  long long v = 0;
  parse_int(text(key), v);
  return v;
}

std::uint64_t RunConfig::unsigned_integer(const std::string& key) const {
  std::uint64_t v = 0;
  parse_uint(text(key), v);
  return v;
}

bool RunConfig::flag(const std::string& key) const {
  bool v = false;
  parse_flag(text(key), v);
  return v;
}

std::vector<double> RunConfig::list(const std::string& key) const {
  return parse_list(normalize_key(key), text(key));
}

std::vector<std::pair<std::string, std::string>> RunConfig::effective() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_schema()) {
    const auto it = values_.find(k.name);
    if (it != values_.end()) out.emplace_back(k.name, it->second);
  }
  return out;
}

EnsembleSpec RunConfig::ensemble() const {
  EnsembleSpec e;
  e.kind = ensemble_kind_from_string(text("kind"));
  e.lambda = real("lambda");
  e.epsilon = real("epsilon");
  e.covariance = covariance_from_string(text("covariance"));
  e.variance = real("variance");
  if (has("map_center")) e.map_center = real("map_center");
  if (has("map_slope")) e.map_slope = real("map_slope");
  e.intensity = has("intensity") ? real("intensity")
                                 : 0.1 / std::pow(e.epsilon, double(integer("d")));
  e.constant = real("constant");
  if (e.kind == EnsembleKind::constant && e.constant < e.lambda)
    key_error("constant", "constant = " + text("constant") + " lies below lambda = " +
                              text("lambda"));
  return e;
}

SolverOptions RunConfig::solver() const {
  SolverOptions o;
  o.tol = real("tol");
  o.max_iters = int(integer("max_iters"));
  o.preconditioner =
      text("preconditioner") == "multigrid" ? Preconditioner::multigrid : Preconditioner::jacobi;
  return o;
}

int RunConfig::threads() const {
  int t = int(integer("threads"));
  if (t == 0) t = int(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("HRVE_THREADS")) {
    long long cap = 0;
    if (parse_int(env, cap) && cap >= 1) t = int(std::min<long long>(t, cap));
  }
  return t;
}

namespace {

int samples_or(const RunConfig& c, int fallback) {
  return c.has("samples") ? int(c.integer("samples")) : fallback;
}

// Re-raise experiment-level validation failures as usage errors naming the
// closest key.
template <class F> void validate_as_usage(const std::string& key, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::usage) throw;
    key_error(key, e.what());
  }
}

} // namespace

SweepConfig RunConfig::sweep() const {
  SweepConfig s;
  s.ensemble = ensemble();
  s.d = int(integer("d"));
  s.h = real("h");
  s.L_over_eps = list("L_over_eps");
  s.kappa = real("kappa");
  s.samples = samples_or(*this, 200);
  s.reference_cells = int(integer("reference_cells"));
  s.reference_samples = int(integer("reference_samples"));
  s.small_reference = flag("small_reference");
  s.seed = unsigned_integer("seed");
  s.solver = solver();
  s.threads = threads();
  validate_as_usage("L_over_eps", [&] { s.validate(); });
  return s;
}

DecayConfig RunConfig::decay() const {
  DecayConfig c;
  c.ensemble = ensemble();
  c.d = int(integer("d"));
  c.h = real("h");
  c.height_over_eps = real("height_over_eps");
  c.width_over_eps = real("width_over_eps");
  if (has("T")) c.T = real("T");
  c.samples = samples_or(*this, 100);
  c.seed = unsigned_integer("seed");
  c.solver = solver();
  c.threads = threads();
  c.delta = real("delta");
  validate_as_usage(c.T ? "T" : "height_over_eps", [&] { c.validate(); });
  return c;
}

TwoScaleConfig RunConfig::two_scale() const {
  TwoScaleConfig c;
  c.ensemble = ensemble();
  c.d = int(integer("d"));
  c.h = real("h");
  c.eps_over_L = list("eps_over_L");
  c.samples = samples_or(*this, 50);
  c.seed = unsigned_integer("seed");
  c.solver = solver();
  c.threads = threads();
  validate_as_usage("eps_over_L", [&] { c.validate(); });
  return c;
}

// ---------------------------------------------------------------------------
// Parsing

void load_config_text(RunConfig& cfg, std::istream& is, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::usage, origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = normalize_key(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("manifest.", 0) == 0) continue;
    if (key == "command") {
      if (cfg.command().empty()) cfg.set_command(value);
      else if (cfg.command() != value)
        fail(ErrorCode::usage, origin + ": written for '" + value + "', not '" + cfg.command() +
                                   "'");
      continue;
    }
    cfg.set(key, value);
  }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::usage, "--config: cannot open '" + path + "'");
  load_config_text(cfg, f, path);
}

RunConfig parse_config(std::span<const std::string> args) {
  std::size_t i = 0;
  std::string command;
  if (!args.empty() && args[0].rfind("--", 0) != 0) command = args[i++];

  std::vector<std::pair<std::string, std::string>> flags;
  std::string config_path;
  for (; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2)
      fail(ErrorCode::usage, "unexpected argument '" + a + "'");
    std::string body = a.substr(2), key, value;
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      key = normalize_key(body.substr(0, eq));
      value = body.substr(eq + 1);
    } else {
      key = normalize_key(body);
      if (key != "config") {
        const KeySpec& spec = key_spec(key);
        bool b = false;
        if (spec.type == ValueType::flag) {
          value = "true";
          if (i + 1 < args.size() && parse_flag(args[i + 1], b)) value = args[++i];
          flags.emplace_back(key, value);
          continue;
        }
      }
      if (i + 1 >= args.size()) key_error(key, "missing value");
      value = args[++i];
    }
    if (key == "config") config_path = value;
    else flags.emplace_back(key, value);
  }

  RunConfig cfg;
  if (!command.empty()) cfg.set_command(command);
  if (!config_path.empty()) load_config_file(cfg, config_path);
  for (const auto& [k, v] : flags) cfg.set(k, v);
  if (cfg.command().empty()) fail(ErrorCode::usage, "no subcommand given");
  return cfg;
}

std::string usage_text() {
  std::ostringstream os;
  os << "usage: homogenize-rve <subcommand> [--config file] [--key value ...]\n\n"
     << "subcommands:\n"
     << "  gen-field   sample a coefficient field and write a snapshot\n"
     << "  corrector   periodic or Dirichlet correctors of one field\n"
     << "  rve-sweep   Monte Carlo sweep of the three RVE estimators\n"
     << "  bl-decay    annealed decay profile of the boundary-layer corrector\n"
     << "  two-scale   two-scale residual identity and H1 error ratios\n"
     << "  localize    exponentially weighted energy ratios on a slab\n"
     << "  report      summary tables and gnuplot data from CSVs\n\n"
     << "keys (defaults in brackets):\n";
  for (const auto& k : config_schema()) {
    std::string name = k.name;
    std::replace(name.begin(), name.end(), '_', '-');
    os << "  --" << name;
    if (!k.fallback.empty()) os << " [" << k.fallback << "]";
    os << "\n      " << k.help << '\n';
  }
  os << "\nexit status: 0 ok, 1 usage error, 2 numerical failure, 3 --assert failure\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

enum class Phase { validating, running };

struct Context {
  Context(const RunConfig& c, std::ostream& o, std::ostream& e) : cfg(c), out(o), err(e) {}

  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  int verbosity = 1;
  Phase phase = Phase::validating;
  fs::path dir;
  Manifest manifest;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  long long solver_iters = 0;
  std::string manifest_name = "manifest.txt";

  void log(const std::string& msg, int level = 1) const {
    if (verbosity >= level) err << cfg.command() << ": " << msg << '\n';
  }

  // Creates the output directory and fixes the manifest's config echo. The
  // run phase starts here: later errors are numerical failures.
  void begin(const fs::path& out_dir) {
    dir = out_dir.empty() ? fs::path(".") : out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
      key_error("out", "cannot create directory '" + dir.string() + "'");
    manifest.set("command", cfg.command());
    for (const auto& [k, v] : cfg.effective()) manifest.set(k, v);
    manifest.set("manifest.version", kVersion);
    manifest.set("manifest.threads_used", std::to_string(cfg.threads()));
    phase = Phase::running;
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    f.close();
    if (!f) fail(ErrorCode::io, "cannot write '" + p.string() + "'");
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a(content)));
    manifest.set("manifest.output." + name, hash);
  }

  void finish(const std::string& status) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", secs);
    manifest.set("manifest.status", status);
    manifest.set("manifest.wall_clock_s", buf);
    manifest.set("manifest.solver_iters", std::to_string(solver_iters));
    const fs::path p = dir / manifest_name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << manifest.text();
    if (!f) fail(ErrorCode::io, "cannot write '" + p.string() + "'");
  }
};

template <class W> std::string render(W&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

ExitStatus report_checks(Context& ctx, const std::vector<Check>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    ctx.out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? ExitStatus::ok : ExitStatus::assertion;
}

std::string seeds_note(std::uint64_t seed) {
  return "base " + std::to_string(seed) + ", counter-based streams";
}

// gen-field -----------------------------------------------------------------

ExitStatus run_gen_field(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const EnsembleSpec spec = c.ensemble();
  const GridSpec g = GridSpec::cube(int(c.integer("d")), int(c.integer("n")), c.real("h"),
                                    topology_from_string(c.text("topology")));
  validate_as_usage("epsilon", [&] { spec.validate(g); });
  const fs::path out = c.text("out");
  fs::path dir = out, name = "field.hrve";
  if (out.extension() == ".hrve") {
    dir = out.parent_path();
    name = out.filename();
    ctx.manifest_name = name.string() + ".manifest";
  }
  ctx.begin(dir);
  const RngSeed seed{c.unsigned_integer("seed"), c.unsigned_integer("stream")};
  const CoefficientField a = sample_field(spec, g, seed);
  ctx.write(name.string(), render([&](std::ostream& os) { write_snapshot(os, a); }));
  const auto b = ellipticity_bounds(a);
  ctx.manifest.set("manifest.seeds", seeds_note(seed.base) + ", stream " +
                                         std::to_string(seed.stream));
  ctx.out << "wrote " << (ctx.dir / name).string() << " (" << g.cells() << " cells, eigenvalues in ["
          << format_double(b.min_eigenvalue) << ", " << format_double(b.max_eigenvalue) << "])\n";
  ctx.finish("ok");
  return ExitStatus::ok;
}

// corrector ------------------------------------------------------------------

ExitStatus run_corrector(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const SolverOptions opts = c.solver();
  CoefficientField a;
  const bool from_file = c.has("field");
  if (from_file) {
    try {
      a = load_field(c.text("field"));
    } catch (const Error& e) {
      key_error("field", e.what());
    }
  } else {
    const EnsembleSpec spec = c.ensemble();
    const GridSpec g =
        GridSpec::cube(int(c.integer("d")), int(c.integer("n")), c.real("h"),
                       topology_from_string(c.text("topology")));
    validate_as_usage("epsilon", [&] { spec.validate(g); });
    a = sample_field(spec, g, RngSeed{c.unsigned_integer("seed"), c.unsigned_integer("stream")});
  }
  if (a.grid.topology == Topology::slab)
    key_error("topology", "corrector needs a torus or box field");
  ctx.begin(c.text("out"));
  const int d = a.grid.d;
  std::ostringstream summary;
  if (a.grid.topology == Topology::torus) {
    ctx.log("periodic correctors on " + std::to_string(a.grid.cells()) + " cells");
    const CorrectorSet set = compute_correctors(a, opts, c.flag("sigma"));
    for (int i = 0; i < d; ++i) {
      ctx.solver_iters += set.correctors[i].iterations;
      ctx.write("phi_" + std::to_string(i + 1) + ".hrve", render([&](std::ostream& os) {
                  write_snapshot(os, set.phi(i), SnapshotRole::corrector, a.lambda, a.epsilon);
                }));
    }
    summary << "abar (torus average of corrected fluxes):\n" << set.abar.str() << '\n';
    if (set.sigma) {
      double err = 0;
      for (int i = 0; i < d; ++i) {
        const VectorField q = oscillating_flux(set, i);
        const VectorField s = sigma_divergence(*set.sigma, a.grid, i);
        for (int k = 0; k < d; ++k)
          for (std::size_t f = 0; f < q.comp[k].size(); ++f)
            err = std::max(err, std::abs(q.comp[k][f] - s.comp[k][f]));
      }
      summary << "max |div sigma - q| = " << format_double(err) << '\n';
    }
  } else {
    const double kappa = c.real("kappa");
    ctx.log("Dirichlet correctors on " + std::to_string(a.grid.cells()) + " cells");
    const BoxProblem box = solve_box_problem(a, kappa, opts);
    for (int i = 0; i < d; ++i) {
      ctx.solver_iters += box.iterations[i];
      ctx.write("phiL_" + std::to_string(i + 1) + ".hrve", render([&](std::ostream& os) {
                  write_snapshot(os, box.phiL[i], SnapshotRole::box_corrector, a.lambda,
                                 a.epsilon);
                }));
    }
    const EffectiveTensor st = standard_rve(box, a);
    const EffectiveTensor ov = oversampled_rve(box, a, kappa);
    const EffectiveTensor nf = new_formula_rve(box, a, kappa);
    summary << "standard:\n" << st.matrix.str() << "\noversampled (kappa " << format_double(kappa)
            << "):\n" << ov.matrix.str() << "\nnew-formula (cond " << format_double(nf.condition)
            << (nf.singular ? ", singular" : "") << "):\n" << nf.matrix.str() << '\n';
  }
  const std::string s = summary.str();
  ctx.write("summary.txt", s);
  ctx.out << s;
  ctx.finish("ok");
  return ExitStatus::ok;
}

// rve-sweep ------------------------------------------------------------------

ExitStatus run_rve_sweep(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const SweepConfig sc = c.sweep();
  ctx.begin(c.text("out"));
  std::string levels;
  for (double L : sc.L_over_eps)
    levels += (levels.empty() ? "" : ",") + std::to_string(sc.box_cells(L));
  ctx.log("d=" + std::to_string(sc.d) + ", box cells " + levels + ", " +
          std::to_string(sc.samples) + " samples per box, reference " +
          std::to_string(sc.reference_samples) + " x " + std::to_string(sc.reference_extent()) +
          " cells, " + std::to_string(sc.threads) + " threads");
  ctx.manifest.set("manifest.seeds",
                   seeds_note(sc.seed) + ", box stream (L index << 32) | sample, reference "
                                         "streams 0..reference_samples-1 of a derived base");
  std::vector<SampleRow> rows;
  const SweepResult res = rve_sweep(sc, &rows);
  for (const auto& r : rows) ctx.solver_iters += r.solver_iters;
  ctx.write("rve_sweep.csv", render([&](std::ostream& os) { write_sweep_csv(os, rows, sc.d); }));
  const std::string summary = render([&](std::ostream& os) { write_sweep_summary(os, res); });
  ctx.write("rve_sweep_summary.txt", summary);
  ctx.write("rve_sweep.dat", render([&](std::ostream& os) { write_sweep_data(os, res); }));
  ctx.write("rve_sweep.gp",
            render([&](std::ostream& os) { write_sweep_gnuplot(os, "rve_sweep.dat"); }));
  ctx.out << summary;
  const bool flagged = res.exclusion_rate(EstimatorKind::new_formula) >= 0.05;
  ctx.finish(flagged ? "flagged" : "ok");
  if (flagged) ctx.log("new-formula exclusion rate is 5% or more; sweep flagged", 0);
  if (c.flag("assert")) return report_checks(ctx, sweep_checks(res, c.real("band_scale")));
  return ExitStatus::ok;
}

// bl-decay -------------------------------------------------------------------

ExitStatus run_bl_decay(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const DecayConfig dc = c.decay();
  ctx.begin(c.text("out"));
  const GridSpec slab = dc.slab();
  ctx.log("slab " + std::to_string(slab.n[0]) + " x " + std::to_string(slab.n[1]) +
          (dc.d == 3 ? " x " + std::to_string(slab.n[2]) : "") + " cells, T = " +
          format_double(dc.massive_T()) + ", " + std::to_string(dc.samples) + " samples, " +
          std::to_string(dc.threads) + " threads");
  ctx.manifest.set("manifest.seeds", seeds_note(dc.seed) + ", streams 0..samples-1");
  const DecayProfile p = boundary_layer_decay(dc);
  ctx.solver_iters = p.solver_iters;
  ctx.write("decay.csv", render([&](std::ostream& os) { write_decay_csv(os, p); }));
  const std::string summary = render([&](std::ostream& os) { write_decay_summary(os, p); });
  ctx.write("decay_summary.txt", summary);
  ctx.write("decay.gp", render([&](std::ostream& os) { write_decay_gnuplot(os, "decay.csv"); }));
  ctx.out << summary;
  ctx.finish(p.valid ? "ok" : "invalid-profile");
  if (!p.valid) {
    ctx.err << "bl-decay: invalid profile, top-quarter energy fraction "
            << format_double(p.top_quarter_fraction) << " exceeds 1%\n";
    return ExitStatus::numerical;
  }
  if (c.flag("assert")) return report_checks(ctx, decay_checks(p, dc.d, c.real("band_scale")));
  return ExitStatus::ok;
}

// two-scale ------------------------------------------------------------------

ExitStatus run_two_scale(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const TwoScaleConfig tc = c.two_scale();
  ctx.begin(c.text("out"));
  ctx.log(std::to_string(tc.eps_over_L.size()) + " levels x " + std::to_string(tc.samples) +
          " samples, " + std::to_string(tc.threads) + " threads");
  ctx.manifest.set("manifest.seeds", seeds_note(tc.seed) + ", stream (level << 32) | sample");
  const TwoScaleReport rep = two_scale_residual_experiment(tc);
  ctx.write("two_scale.csv", render([&](std::ostream& os) { write_two_scale_csv(os, rep); }));
  const std::string summary = render([&](std::ostream& os) { write_two_scale_summary(os, rep); });
  ctx.write("two_scale_summary.txt", summary);
  ctx.out << summary;
  ctx.finish("ok");
  if (c.flag("assert")) return report_checks(ctx, two_scale_checks(rep, c.real("band_scale")));
  return ExitStatus::ok;
}

// localize -------------------------------------------------------------------

ExitStatus run_localize(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const EnsembleSpec spec = c.ensemble();
  const int d = int(c.integer("d"));
  const double h = c.real("h"), eps = spec.epsilon;
  GridSpec slab;
  slab.d = d;
  slab.h = h;
  slab.topology = Topology::slab;
  auto cells = [&](double len, const char* key) {
    const double r = len / h;
    if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
      key_error(key, "length " + format_double(len) + " is not a multiple of h");
    return int(std::lround(r));
  };
  slab.n[0] = cells(c.real("height_over_eps") * eps, "height_over_eps");
  for (int k = 1; k < d; ++k) slab.n[k] = cells(c.real("width_over_eps") * eps, "width_over_eps");
  validate_as_usage("height_over_eps", [&] { slab.validate(); });
  validate_as_usage("epsilon", [&] { spec.validate(slab); });
  const double H = slab.side(0);
  std::vector<double> Ts;
  for (double t : c.list("T_list")) {
    const double T = t * eps * eps;
    if (T > (H / 4) * (H / 4) * (1 + 1e-12))
      key_error("T_list", "T = " + format_double(t) + " eps^2 exceeds (H/4)^2");
    Ts.push_back(T);
  }
  const std::vector<double> gammas = c.list("gamma");
  ctx.begin(c.text("out"));
  const SolverOptions opts = c.solver();
  const RngSeed seed{c.unsigned_integer("seed"), c.unsigned_integer("stream")};
  ctx.manifest.set("manifest.seeds", seeds_note(seed.base) + ", stream " +
                                         std::to_string(seed.stream));
  GridSpec torus = slab;
  torus.topology = Topology::torus;
  const CoefficientField a = sample_field(spec, torus, seed);
  std::vector<double> trace;
  if (c.text("trace") == "mode") {
    trace = single_mode_trace(slab, int(c.integer("mode")));
  } else {
    const CorrectorSet set = compute_correctors(a, opts, false);
    trace = torus_face_trace(set.phi(0));
  }
  ctx.log("slab " + std::to_string(slab.n[0]) + " cells high, " + std::to_string(Ts.size()) +
          " T values, " + std::to_string(gammas.size()) + " gamma values");
  const LocalizationReport rep =
      localization_check(a.with_topology(Topology::slab), trace, Ts, gammas, opts);
  ctx.write("localization.csv", render([&](std::ostream& os) { write_localization_csv(os, rep); }));
  const std::string summary =
      render([&](std::ostream& os) { write_localization_summary(os, rep); });
  ctx.write("localization_summary.txt", summary);
  ctx.out << summary;
  ctx.finish("ok");
  if (c.flag("assert"))
    return report_checks(ctx, localization_checks(rep, c.real("band_scale")));
  return ExitStatus::ok;
}

// report ---------------------------------------------------------------------

std::string first_line(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  if (!f || !std::getline(f, line)) key_error("input", "cannot read '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

ExitStatus run_report(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  if (!c.has("input")) key_error("input", "report needs at least one CSV");
  std::vector<std::string> inputs = split(c.text("input"), ',');
  std::vector<std::string> kinds;
  for (const auto& in : inputs) {
    const std::string head = first_line(in);
    if (head.rfind("seed_stream,L_over_eps", 0) == 0) kinds.push_back("sweep");
    else if (head == "x_perp_over_eps,rms,stderr") kinds.push_back("decay");
    else if (head.rfind("seed_stream,eps_over_L", 0) == 0) kinds.push_back("two-scale");
    else if (head.rfind("T,gamma", 0) == 0) kinds.push_back("localization");
    else key_error("input", "'" + in + "' is not a recognized CSV");
  }
  ctx.begin(c.text("out"));
  std::ostringstream all;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::ifstream f(inputs[i], std::ios::binary);
    const std::string stem = "report_" + std::to_string(i + 1);
    all << "== " << fs::path(inputs[i]).filename().string() << " (" << kinds[i] << ")\n";
    if (kinds[i] == "sweep") {
      int d = 2;
      const auto rows = read_sweep_csv(f, &d);
      const SweepResult r = aggregate_sweep(rows, d);
      write_sweep_summary(all, r);
      ctx.write(stem + ".dat", render([&](std::ostream& os) { write_sweep_data(os, r); }));
      ctx.write(stem + ".gp",
                render([&](std::ostream& os) { write_sweep_gnuplot(os, stem + ".dat"); }));
    } else if (kinds[i] == "decay") {
      const DecayProfile p = refit_decay(read_decay_csv(f));
      write_decay_summary(all, p);
      ctx.write(stem + ".dat", render([&](std::ostream& os) {
                  os << "# x_perp_over_eps rms stderr\n";
                  for (const auto& l : p.layers)
                    os << format_double(l.x_perp_over_eps) << ' ' << format_double(l.rms) << ' '
                       << format_double(l.stderr_) << '\n';
                }));
      ctx.write(stem + ".gp",
                render([&](std::ostream& os) { write_decay_gnuplot(os, stem + ".dat"); }));
    } else if (kinds[i] == "two-scale") {
      const TwoScaleReport r = summarize_two_scale(read_two_scale_csv(f), 0.0);
      write_two_scale_summary(all, r);
    } else {
      std::string line;
      std::getline(f, line);
      LocalizationReport r;
      while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) {
          double x = 0;
          if (!parse_real(trim(cell), x) && trim(cell) != "nan")
            fail(ErrorCode::io, "malformed localization row '" + line + "'");
          v.push_back(x);
        }
        if (v.size() != 5) fail(ErrorCode::io, "localization CSV row has wrong column count");
        r.entries.push_back({v[0], v[1], v[2], v[3], v[4]});
        r.max_ratio = std::max(r.max_ratio, v[4]);
      }
      for (const auto& e : r.entries)
        for (const auto& o : r.entries)
          if (o.T == e.T && std::abs(o.gamma * 2 - e.gamma) < 1e-12 * e.gamma && e.ratio > 0)
            r.max_halving_growth = std::max(r.max_halving_growth, o.ratio / e.ratio);
      write_localization_summary(all, r);
    }
    all << '\n';
  }
  const std::string s = all.str();
  ctx.write("report.txt", s);
  ctx.out << s;
  ctx.finish("ok");
  return ExitStatus::ok;
}

} // namespace

ExitStatus dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Context ctx(cfg, out, err);
  try {
    ctx.verbosity = int(cfg.integer("verbosity"));
    const std::string& cmd = cfg.command();
    if (cmd == "gen-field") return run_gen_field(ctx);
    if (cmd == "corrector") return run_corrector(ctx);
    if (cmd == "rve-sweep") return run_rve_sweep(ctx);
    if (cmd == "bl-decay") return run_bl_decay(ctx);
    if (cmd == "two-scale") return run_two_scale(ctx);
    if (cmd == "localize") return run_localize(ctx);
    if (cmd == "report") return run_report(ctx);
    fail(ErrorCode::usage, "unknown subcommand '" + cmd + "'");
  } catch (const std::exception& e) {
    const Error* he = dynamic_cast<const Error*>(&e);
    const bool usage = ctx.phase == Phase::validating ||
                       (he && he->code() == ErrorCode::usage);
    err << cfg.command() << ": " << (usage ? "usage error: " : "error: ") << e.what() << '\n';
    if (ctx.phase == Phase::running) {
      try {
        ctx.manifest.set("manifest.error", e.what());
        ctx.finish("failed");
      } catch (const std::exception&) {
      }
    }
    return usage ? ExitStatus::usage : ExitStatus::numerical;
  }
}

} // namespace hrve
