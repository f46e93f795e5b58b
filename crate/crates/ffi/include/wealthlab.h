#ifndef WEALTHLAB_H
#define WEALTHLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_UTF8 = 2,
  WL_STATUS_VALIDATION = 3,
  WL_STATUS_PARAMETER = 4,
  WL_STATUS_DOMAIN = 5,
  WL_STATUS_INSUFFICIENT_DATA = 6,
  WL_STATUS_STATE = 7,
  WL_STATUS_IO = 8,
  WL_STATUS_BUFFER_TOO_SMALL = 9,
  WL_STATUS_PANIC = 10,
} WlStatus;

// Opaque multiplicative-growth engine.
typedef struct WlKesten WlKesten;

// Opaque weighted network.
typedef struct WlNetwork WlNetwork;

typedef struct WlParetoFit {
  double alpha_hat;
  double x_min;
  double std_error;
  double ks_distance;
  size_t n_tail;
} WlParetoFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t wl_last_error_message(char *buf, size_t len);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library, not yet freed.
void wl_string_free(char *s);

// Library version as a static NUL-terminated string.
const char *wl_version(void);

// Maximum-likelihood Pareto fit above a fixed `x_min`.
//
// # Safety
// `data` must point to `len` doubles; `fit` must be writable.
enum WlStatus wl_pareto_mle(const double *data, size_t len, double x_min, struct WlParetoFit *fit);

// Pareto fit with `x_min` chosen by minimum KS distance.
//
// # Safety
// `data` must point to `len` doubles; `fit` must be writable.
enum WlStatus wl_fit_tail(const double *data, size_t len, struct WlParetoFit *fit);

// Hill estimator on the `k` largest values.
//
// # Safety
// `data` must point to `len` doubles; `alpha` must be writable.
enum WlStatus wl_hill(const double *data, size_t len, size_t k, double *alpha);

// Gini coefficient of non-negative values.
//
// # Safety
// `data` must point to `len` doubles; `gini` must be writable.
enum WlStatus wl_gini(const double *data, size_t len, double *gini);

// Scale-free network by preferential attachment.
//
// # Safety
// `net` must be writable; the handle it receives must be freed with
// [`wl_network_free`].
enum WlStatus wl_network_scale_free(size_t n_nodes,
                                    size_t m,
                                    uint64_t seed,
                                    struct WlNetwork **net);

// # Safety
// `net` must be null or a live handle.
void wl_network_free(struct WlNetwork *net);

// # Safety
// `net` must be null or a live handle.
size_t wl_network_n_nodes(const struct WlNetwork *net);

// # Safety
// `net` must be null or a live handle.
size_t wl_network_n_edges(const struct WlNetwork *net);

// Writes the degree of every node into `out` (length `n_nodes`).
//
// # Safety
// `net` must be a live handle; `degrees` must point to `len` writable slots.
enum WlStatus wl_network_degrees(const struct WlNetwork *net, size_t *degrees, size_t len);

// Engine of `n_agents` agents whose stationary tail exponent is `alpha`.
//
// # Safety
// `engine` must be writable; free the handle with [`wl_kesten_free`].
enum WlStatus wl_kesten_new(size_t n_agents,
                            double alpha,
                            double sigma,
                            double x_min,
                            uint64_t seed,
                            struct WlKesten **engine);

// # Safety
// `engine` must be null or a live handle.
void wl_kesten_free(struct WlKesten *engine);

// Advances the engine by `steps` sweeps.
//
// # Safety
// `engine` must be a live handle.
enum WlStatus wl_kesten_run(struct WlKesten *engine, uint64_t steps);

// # Safety
// `engine` must be null or a live handle.
size_t wl_kesten_n_agents(const struct WlKesten *engine);

// Copies current wealths into `out`.
//
// # Safety
// `engine` must be a live handle; `wealths` must point to `len` writable doubles.
enum WlStatus wl_kesten_wealths(const struct WlKesten *engine, double *wealths, size_t len);

// Gross product and total wealth of the engine.
//
// # Safety
// `engine` must be a live handle; `omega` and `lambda` must be writable.
enum WlStatus wl_kesten_accounts(const struct WlKesten *engine, double *omega, double *lambda);

// Runs the experiment described by a JSON config and returns the summary
// JSON (without wall-clock metadata) in `summary`. Nothing is written to
// disk.
//
// # Safety
// `config_json` must be a NUL-terminated string; `summary` must be
// writable and the string it receives freed with [`wl_string_free`].
enum WlStatus wl_run_config(const char *config_json, char **summary);

// Validates a JSON config without running it.
//
// # Safety
// `config_json` must be a NUL-terminated string.
enum WlStatus wl_validate_config(const char *config_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEALTHLAB_H */
