#ifndef FRI_FRI_H
#define FRI_FRI_H

/*
 * C interface to the finitary random interlacement library.
 *
 * Every call returns an fri_status. Handles are opaque; the message of the
 * last failure on a context is available from fri_last_error. Strings
 * returned through out-parameters are owned by the caller and released with
 * fri_string_free.
 *
 * Kill parameters: T > 0 selects the walk killed at rate 1/(T+1); T = INFINITY
 * selects the free walk.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fri_status {
  FRI_OK = 0,
  FRI_ERR_INVALID = 1,          /* bad argument or configuration */
  FRI_ERR_DIMENSION = 2,
  FRI_ERR_CACHE_MISSING = 3,    /* green table or constants not found */
  FRI_ERR_SOLVE = 4,            /* linear solve failed or exceeded the cap */
  FRI_ERR_BUDGET = 5,           /* step or sample budget exhausted */
  FRI_ERR_NO_BRACKET = 6,       /* bisection scan never reached theta */
  FRI_ERR_IO = 7,
  FRI_ERR_FORMAT = 8,           /* malformed file */
  FRI_ERR_PADDING = 9,          /* explicit padding below the calibrated floor */
  FRI_ERR_UNKNOWN_COMMAND = 10,
  FRI_ERR_INTERNAL = 11
} fri_status;

typedef struct fri_context fri_context;
typedef struct fri_sample fri_sample;

typedef struct fri_context_options {
  const char* cache_dir; /* NULL: "green-cache" */
  int workers;           /* <= 0 means 1 */
  int mc_fallback;       /* build missing green tables in memory */
} fri_context_options;

const char* fri_version(void);
const char* fri_status_name(fri_status s);

fri_status fri_context_new(const fri_context_options* opt, fri_context** out);
void fri_context_free(fri_context* ctx);
const char* fri_last_error(const fri_context* ctx);

void fri_string_free(char* s);

/* F_d(a). */
fri_status fri_scaling(fri_context* ctx, int d, double a, double* out);

/* Green's function g(0, x) from the context's table cache. */
fri_status fri_green(fri_context* ctx, int d, double T, const int32_t* x, double* value);

/* Equilibrium measure of A = pts[0..n) (n points of d coordinates, row major).
 * out receives n values in the order of the input points. */
fri_status fri_escape(fri_context* ctx, int d, double T, const int32_t* pts, size_t n, double* out);

/* Exact capacity, with the Monte-Carlo fallback when the context allows it. */
fri_status fri_capacity(fri_context* ctx, int d, double T, const int32_t* pts, size_t n, uint64_t seed,
                        double* value, double* stderr_out);

typedef struct fri_window_config {
  int d;
  double u;
  double T;
  int32_t window_lo;   /* the window is [lo, lo + side)^d */
  int32_t window_side;
  int padding;         /* -1: calibrated default */
  double report_tol;   /* <= 0: 1e-3 */
  double u_top;
  uint64_t seed;
} fri_window_config;

fri_status fri_sample_window(fri_context* ctx, const fri_window_config* cfg, fri_sample** out);
void fri_sample_free(fri_sample* s);
fri_status fri_sample_count(const fri_sample* s, size_t* n);
/* start must hold d coordinates. */
fri_status fri_sample_trajectory(const fri_sample* s, size_t i, int32_t* start, double* label, uint64_t* length);
fri_status fri_sample_padding(const fri_sample* s, int* padding, double* bound);
/* 1 when the cluster of 0 meets the inner boundary of [-N, N)^d. */
fri_status fri_sample_crossing(fri_context* ctx, const fri_sample* s, int32_t N, int* out);
fri_status fri_sample_save(fri_context* ctx, const fri_sample* s, const char* path);
fri_status fri_sample_load(fri_context* ctx, const char* path, fri_sample** out);
int fri_sample_equal(const fri_sample* a, const fri_sample* b);

/* Coupled crossing frequency of the rooted cluster growth. */
fri_status fri_crossing_probability(fri_context* ctx, int d, double u, double T, int32_t N, uint64_t reps,
                                    uint64_t seed, double* p, double* stderr_out);

/*
 * Runs a named experiment (sample, capacity, range-cap, crossing, bisect,
 * scaling, layers, explore, calibrate). params_json is a flat JSON object of
 * string values; out_dir receives the output files. On success *result_json
 * holds {"command", "run_id", "params", "outputs", "summary"}.
 */
fri_status fri_run_command(fri_context* ctx, const char* command, const char* params_json, const char* out_dir,
                           char** result_json);

/* NUL-separated list of command names, terminated by an empty string. */
const char* fri_command_names(void);

#ifdef __cplusplus
}
#endif

#endif
