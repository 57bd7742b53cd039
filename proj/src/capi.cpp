#include "hrve/hrve.h"

#include <cstring>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "hrve/config.hpp"
#include "hrve/snapshot.hpp"

struct hrve_config {
  hrve::RunConfig cfg;
};

struct hrve_field {
  hrve::CoefficientField field;
};

namespace {

thread_local std::string g_last_error;

hrve_status status_of(hrve::ErrorCode c) { return static_cast<hrve_status>(int(c)); }

template <class F> hrve_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return HRVE_OK;
  } catch (const hrve::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HRVE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HRVE_ERR_INTERNAL;
  }
}

hrve_status null_handle(const char* what) {
  g_last_error = std::string(what) + " is NULL";
  return HRVE_ERR_NULL_HANDLE;
}

hrve::GridSpec to_grid(const hrve_grid& g) {
  hrve::GridSpec s;
  s.d = g.d;
  s.n = {g.n[0], g.n[1], g.d == 3 ? g.n[2] : 1};
  s.h = g.h;
  if (g.topology < HRVE_TORUS || g.topology > HRVE_SLAB)
    hrve::fail(hrve::ErrorCode::invalid_argument, "unknown topology code");
  s.topology = static_cast<hrve::Topology>(g.topology);
  s.validate();
  return s;
}

} // namespace

extern "C" {

HRVE_API const char* hrve_version(void) { return hrve::kVersion; }

HRVE_API const char* hrve_status_name(hrve_status s) {
  switch (s) {
  case HRVE_OK: return "ok";
  case HRVE_ERR_NULL_HANDLE: return "null-handle";
  case HRVE_ERR_BUFFER_TOO_SMALL: return "buffer-too-small";
  case HRVE_ERR_INTERNAL: return "internal";
  default:
    if (s >= HRVE_ERR_INVALID_ARGUMENT && s <= HRVE_ERR_IO)
      return hrve::to_string(static_cast<hrve::ErrorCode>(int(s)));
    return "unknown";
  }
}

HRVE_API const char* hrve_last_error(void) { return g_last_error.c_str(); }

HRVE_API const char* hrve_usage(void) {
  static const std::string text = hrve::usage_text();
  return text.c_str();
}

HRVE_API hrve_status hrve_config_create(const char* command, hrve_config** out) {
  if (!out) return null_handle("out");
  *out = nullptr;
  return guarded([&] {
    auto* c = new hrve_config{hrve::RunConfig(command ? command : "")};
    *out = c;
  });
}

HRVE_API hrve_status hrve_config_parse(int argc, const char* const* argv, hrve_config** out) {
  if (!out) return null_handle("out");
  *out = nullptr;
  if (argc > 0 && !argv) return null_handle("argv");
  return guarded([&] {
    std::vector<std::string> args(argv, argv + argc);
    auto* c = new hrve_config{hrve::parse_config(args)};
    *out = c;
  });
}

HRVE_API hrve_status hrve_config_set(hrve_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_handle("config");
  if (!key || !value) return null_handle("key or value");
  return guarded([&] { cfg->cfg.set(key, value); });
}

HRVE_API hrve_status hrve_config_load(hrve_config* cfg, const char* path) {
  if (!cfg) return null_handle("config");
  if (!path) return null_handle("path");
  return guarded([&] { hrve::load_config_file(cfg->cfg, path); });
}

HRVE_API hrve_status hrve_config_get(const hrve_config* cfg, const char* key, char* buf,
                                     size_t cap, size_t* needed) {
  if (!cfg) return null_handle("config");
  if (!key) return null_handle("key");
  std::string value;
  const hrve_status s = guarded([&] { value = cfg->cfg.text(key); });
  if (s != HRVE_OK) return s;
  if (needed) *needed = value.size() + 1;
  if (!buf || cap < value.size() + 1) {
    g_last_error = "buffer too small for the value of '" + std::string(key) + "'";
    return HRVE_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return HRVE_OK;
}

HRVE_API void hrve_config_free(hrve_config* cfg) { delete cfg; }

HRVE_API int hrve_run(const hrve_config* cfg) {
  if (!cfg) {
    null_handle("config");
    return int(hrve::ExitStatus::usage);
  }
  try {
    return int(hrve::dispatch(cfg->cfg, std::cout, std::cerr));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return int(hrve::ExitStatus::numerical);
  }
}

HRVE_API hrve_status hrve_field_sample(const hrve_config* cfg, const hrve_grid* grid,
                                       uint64_t seed, uint64_t stream, hrve_field** out) {
  if (!out) return null_handle("out");
  *out = nullptr;
  if (!cfg) return null_handle("config");
  if (!grid) return null_handle("grid");
  return guarded([&] {
    const hrve::GridSpec g = to_grid(*grid);
    auto* f = new hrve_field{hrve::sample_field(cfg->cfg.ensemble(), g, {seed, stream})};
    *out = f;
  });
}

HRVE_API hrve_status hrve_field_load(const char* path, hrve_field** out) {
  if (!out) return null_handle("out");
  *out = nullptr;
  if (!path) return null_handle("path");
  return guarded([&] { *out = new hrve_field{hrve::load_field(path)}; });
}

HRVE_API hrve_status hrve_field_save(const hrve_field* f, const char* path) {
  if (!f) return null_handle("field");
  if (!path) return null_handle("path");
  return guarded([&] { hrve::save_field(path, f->field); });
}

HRVE_API hrve_status hrve_field_grid(const hrve_field* f, hrve_grid* out) {
  if (!f) return null_handle("field");
  if (!out) return null_handle("out");
  const hrve::GridSpec& g = f->field.grid;
  out->d = g.d;
  for (int k = 0; k < 3; ++k) out->n[k] = g.n[k];
  out->h = g.h;
  out->topology = static_cast<hrve_topology>(g.topology);
  g_last_error.clear();
  return HRVE_OK;
}

HRVE_API hrve_status hrve_field_entries(const hrve_field* f, const double** data, size_t* count) {
  if (!f) return null_handle("field");
  if (!data || !count) return null_handle("data or count");
  *data = f->field.entries.data();
  *count = f->field.entries.size();
  g_last_error.clear();
  return HRVE_OK;
}

HRVE_API void hrve_field_free(hrve_field* f) { delete f; }

HRVE_API hrve_status hrve_effective_tensor(const hrve_field* f, hrve_estimator kind,
                                           double kappa, const hrve_config* solver_cfg,
                                           hrve_tensor* out) {
  if (!f) return null_handle("field");
  if (!out) return null_handle("out");
  return guarded([&] {
    const hrve::SolverOptions opts = solver_cfg ? solver_cfg->cfg.solver() : hrve::SolverOptions{};
    const hrve::CoefficientField& a = f->field;
    hrve::EffectiveTensor t;
    if (kind == HRVE_REFERENCE) {
      hrve::require(a.grid.topology == hrve::Topology::torus, hrve::ErrorCode::invalid_argument,
                    "the reference tensor needs a torus field");
      t = hrve::torus_effective(a, opts);
    } else {
      hrve::require(a.grid.topology == hrve::Topology::box, hrve::ErrorCode::invalid_argument,
                    "RVE estimators need a box field");
      hrve::require(kind >= HRVE_STANDARD && kind <= HRVE_NEW_FORMULA,
                    hrve::ErrorCode::invalid_argument, "unknown estimator code");
      const hrve::BoxProblem box = hrve::solve_box_problem(a, kappa, opts);
      if (kind == HRVE_STANDARD) t = hrve::standard_rve(box, a);
      else if (kind == HRVE_OVERSAMPLED) t = hrve::oversampled_rve(box, a, kappa);
      else t = hrve::new_formula_rve(box, a, kappa);
    }
    out->d = t.matrix.d;
    for (int i = 0; i < 9; ++i) out->a[i] = t.matrix.a[i];
    out->condition = t.condition;
    out->singular = t.singular ? 1 : 0;
    out->solver_iterations = t.solver_iterations;
  });
}

} // extern "C"
