#ifndef SUPERHEAT_H
#define SUPERHEAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShRegime {
  SH_REGIME_SUBCRITICAL_EXISTS = 0,
  SH_REGIME_CRITICAL_EXISTS = 1,
  SH_REGIME_NONEXISTENCE_WITNESS = 2,
  SH_REGIME_RAPID_GROWTH_NONEXISTENCE = 3,
  SH_REGIME_INDETERMINATE = 4,
} ShRegime;

typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  SH_STATUS_INVALID_ARGUMENT = 2,
  SH_STATUS_NUMERIC = 3,
  SH_STATUS_BUFFER_TOO_SMALL = 4,
  SH_STATUS_PANIC = 5,
} ShStatus;

typedef struct ShGrid ShGrid;

typedef struct ShNonlinearity ShNonlinearity;

/*
 Flat view of a classification verdict.
 */
typedef struct ShVerdict {
  enum ShRegime regime;
  /*
   Growth constant `A`.
   */
  double a;
  /*
   Classification integral at the finest level.
   */
  double integral;
  /*
   1 when the integral trend reads as finite.
   */
  int32_t integral_finite;
  /*
   Existence-time lower bound, NaN when none applies.
   */
  double t_lower;
} ShVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated)
 and returns the full message length in bytes, excluding the NUL.
 */
size_t sh_last_error(char *buf, size_t len);

/*
 Parses a nonlinearity such as `power(2)`, `powersum(4,2)`, `exp`, `expsq`.
 */
enum ShStatus sh_nonlinearity_new(const char *spec, struct ShNonlinearity **handle);

void sh_nonlinearity_free(struct ShNonlinearity *handle);

/*
 `F(s)`.
 */
enum ShStatus sh_structure(const struct ShNonlinearity *nl, double s, double *value);

/*
 `F⁻¹(y)`.
 */
enum ShStatus sh_structure_inv(const struct ShNonlinearity *nl, double y, double *value);

/*
 The growth constant `A = lim f′F`.
 */
enum ShStatus sh_growth_constant(const struct ShNonlinearity *nl, double *value);

/*
 Periodic field on `[-side/2, side/2)^dim` with `n` nodes per axis;
 `values` holds `n^dim` entries, last axis fastest.
 */
enum ShStatus sh_grid_periodic(size_t dim,
                               size_t n,
                               double side,
                               const double *values,
                               size_t len,
                               struct ShGrid **handle);

void sh_grid_free(struct ShGrid *handle);

enum ShStatus sh_grid_len(const struct ShGrid *grid, size_t *len);

/*
 Copies the node values into `buf`; `BufferTooSmall` leaves it untouched.
 */
enum ShStatus sh_grid_values(const struct ShGrid *grid, double *buf, size_t len);

/*
 Uniformly local `Lᵖ` norm over balls of radius `rho`; `p = INFINITY` gives the sup.
 */
enum ShStatus sh_uloc_norm(const struct ShGrid *grid, double p, double rho, double *value);

/*
 Classifies the data with `γ = 1`, using subsampled copies for the trend.
 */
enum ShStatus sh_classify(const struct ShNonlinearity *nl,
                          const struct ShGrid *grid,
                          size_t n,
                          double r,
                          double rho,
                          struct ShVerdict *verdict);

/*
 Runs a CLI command on a scenario file; `exit_code` receives the code the
 `superheat` binary would return.
 */
enum ShStatus sh_run_scenario(const char *command,
                              const char *config,
                              const char *out_dir,
                              size_t jobs,
                              int32_t strict,
                              int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERHEAT_H */
