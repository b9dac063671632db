/* C interface to the PEPS ground-state engine. All functions return a
 * pepsmc_status; on failure pepsmc_last_error() describes the problem
 * (thread-local). Objects returned through out-parameters are owned by the
 * caller and released with the matching *_free function; strings with
 * pepsmc_string_free. */
#ifndef PEPSMC_CAPI_H
#define PEPSMC_CAPI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pepsmc_status {
  PEPSMC_OK = 0,
  PEPSMC_ERR_NULL = 1,       /* required pointer was NULL */
  PEPSMC_ERR_INVALID = 2,    /* bad argument, config, or constraint */
  PEPSMC_ERR_IO = 3,         /* file missing, unreadable, or corrupt */
  PEPSMC_ERR_RUNTIME = 4     /* numerical failure or internal error */
} pepsmc_status;

typedef struct pepsmc_config pepsmc_config;
typedef struct pepsmc_state pepsmc_state;

const char* pepsmc_version(void);
/* Message from the last failing call on this thread; empty if none. */
const char* pepsmc_last_error(void);
void pepsmc_string_free(char* s);

/* -- configuration ----------------------------------------------------- */
pepsmc_status pepsmc_config_parse(const char* text, pepsmc_config** out);
pepsmc_status pepsmc_config_read(const char* path, pepsmc_config** out);
/* Canonical key=value form. */
pepsmc_status pepsmc_config_serialize(const pepsmc_config* config,
                                      char** out);
/* Override the worker-thread count (0 = all cores). */
pepsmc_status pepsmc_config_set_threads(pepsmc_config* config, int threads);
void pepsmc_config_free(pepsmc_config* config);

/* -- states ------------------------------------------------------------ */
pepsmc_status pepsmc_state_random(const pepsmc_config* config,
                                  pepsmc_state** out);
pepsmc_status pepsmc_state_load(const char* path, pepsmc_state** out);
pepsmc_status pepsmc_state_save(const pepsmc_state* state, const char* path);
pepsmc_status pepsmc_state_shape(const pepsmc_state* state, long* rows,
                                 long* cols, long* bond_dim);
void pepsmc_state_free(pepsmc_state* state);

/* -- pipelines ---------------------------------------------------------- */
/* Exact ground energy in the config's Sz sector. */
pepsmc_status pepsmc_run_ed(const pepsmc_config* config,
                            double* energy_per_site, long* basis_dim,
                            long* iterations);

/* Simple-update evolution from a random start, ramping the bond dimension
 * up to the config's D. log_csv (optional) receives the sweep log. */
pepsmc_status pepsmc_run_simple_update(const pepsmc_config* config,
                                       pepsmc_state** out, char** log_csv);

/* Stochastic sign-gradient optimization from `initial`. trace_csv
 * (optional) receives the per-step trace; checkpoint_prefix (optional)
 * enables best-state checkpoint files. */
pepsmc_status pepsmc_run_gradient_opt(const pepsmc_config* config,
                                      const pepsmc_state* initial,
                                      const char* checkpoint_prefix,
                                      pepsmc_state** out, char** trace_csv,
                                      double* best_energy);

/* -- measurements -------------------------------------------------------- */
pepsmc_status pepsmc_measure_energy(const pepsmc_config* config,
                                    const pepsmc_state* state, double* mean,
                                    double* std_error);

/* All pair correlations of the bulk window trimmed by `margin`, as CSV
 * (i_row,i_col,j_row,j_col,value,stderr). */
pepsmc_status pepsmc_measure_correlations(const pepsmc_config* config,
                                          const pepsmc_state* state,
                                          long margin, char** csv);

/* Staggered magnetization m^2_s over the same window. */
pepsmc_status pepsmc_measure_staggered(const pepsmc_config* config,
                                       const pepsmc_state* state, long margin,
                                       double* value, double* std_error);

/* W(S) for the +-1 spin assignment `spins` (row-major, rows*cols entries),
 * in log form: |W| = exp(log_magnitude) * (sign != 0), sign in {-1,0,1}. */
pepsmc_status pepsmc_amplitude(const pepsmc_config* config,
                               const pepsmc_state* state, const int* spins,
                               double* log_magnitude, int* sign);

/* Mean seconds per amplitude evaluation at the config's (D, Dc). */
pepsmc_status pepsmc_bench_amplitude(const pepsmc_config* config,
                                     long repetitions,
                                     double* seconds_per_call);

#ifdef __cplusplus
}
#endif

#endif /* PEPSMC_CAPI_H */
