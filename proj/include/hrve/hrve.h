/* C interface of the homogenization RVE library. */
#ifndef HRVE_H
#define HRVE_H

#include <stddef.h>
#include <stdint.h>

#if defined(HRVE_BUILDING_LIBRARY)
#define HRVE_API __attribute__((visibility("default")))
#else
#define HRVE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hrve_status {
  HRVE_OK = 0,
  HRVE_ERR_INVALID_ARGUMENT = 1,
  HRVE_ERR_RESOLUTION = 2,
  HRVE_ERR_INVALID_COVARIANCE = 3,
  HRVE_ERR_UNSUPPORTED = 4,
  HRVE_ERR_GRID_MISMATCH = 5,
  HRVE_ERR_SINGULAR_SYSTEM = 6,
  HRVE_ERR_SOLVER_FAILURE = 7,
  HRVE_ERR_CONSISTENCY = 8,
  HRVE_ERR_CONFIGURATION = 9,
  HRVE_ERR_USAGE = 10,
  HRVE_ERR_IO = 11,
  HRVE_ERR_NULL_HANDLE = 12,
  HRVE_ERR_BUFFER_TOO_SMALL = 13,
  HRVE_ERR_INTERNAL = 99
} hrve_status;

typedef enum hrve_topology { HRVE_TORUS = 0, HRVE_BOX = 1, HRVE_SLAB = 2 } hrve_topology;

typedef enum hrve_estimator {
  HRVE_STANDARD = 0,
  HRVE_OVERSAMPLED = 1,
  HRVE_NEW_FORMULA = 2,
  HRVE_REFERENCE = 3
} hrve_estimator;

typedef struct hrve_config hrve_config;
typedef struct hrve_field hrve_field;

typedef struct hrve_grid {
  int d;
  int n[3];
  double h;
  hrve_topology topology;
} hrve_grid;

typedef struct hrve_tensor {
  int d;
  double a[9]; /* row-major, stride 3 */
  double condition;
  int singular;
  int solver_iterations;
} hrve_tensor;

HRVE_API const char* hrve_version(void);
HRVE_API const char* hrve_status_name(hrve_status s);
/* Message of the last failed call on this thread; empty after success. */
HRVE_API const char* hrve_last_error(void);
HRVE_API const char* hrve_usage(void);

/* Configuration. The command may be NULL when a --config file names it. */
HRVE_API hrve_status hrve_config_create(const char* command, hrve_config** out);
/* argv[0] is the subcommand, then --key value pairs. */
HRVE_API hrve_status hrve_config_parse(int argc, const char* const* argv, hrve_config** out);
HRVE_API hrve_status hrve_config_set(hrve_config* cfg, const char* key, const char* value);
HRVE_API hrve_status hrve_config_load(hrve_config* cfg, const char* path);
/* Copies the value into buf (NUL-terminated). *needed receives the length
   including the terminator. */
HRVE_API hrve_status hrve_config_get(const hrve_config* cfg, const char* key, char* buf,
                                     size_t cap, size_t* needed);
HRVE_API void hrve_config_free(hrve_config* cfg);

/* Runs the configured subcommand; returns the process exit status
   (0 ok, 1 usage, 2 numerical failure, 3 assertion failure). */
HRVE_API int hrve_run(const hrve_config* cfg);

/* Fields. Sampling reads the ensemble keys of cfg. */
HRVE_API hrve_status hrve_field_sample(const hrve_config* cfg, const hrve_grid* grid,
                                       uint64_t seed, uint64_t stream, hrve_field** out);
HRVE_API hrve_status hrve_field_load(const char* path, hrve_field** out);
HRVE_API hrve_status hrve_field_save(const hrve_field* f, const char* path);
HRVE_API hrve_status hrve_field_grid(const hrve_field* f, hrve_grid* out);
/* Upper-triangle entries per cell, row-major cells; valid until free. */
HRVE_API hrve_status hrve_field_entries(const hrve_field* f, const double** data, size_t* count);
HRVE_API void hrve_field_free(hrve_field* f);

/* Estimators on a box field (standard, oversampled, new formula) or the
   single-sample torus average (reference) on a torus field. */
HRVE_API hrve_status hrve_effective_tensor(const hrve_field* f, hrve_estimator kind,
                                           double kappa, const hrve_config* solver_cfg,
                                           hrve_tensor* out);

#ifdef __cplusplus
}
#endif

#endif
