#ifndef SPINFIBER_H
#define SPINFIBER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of doubles in a phase point.
 */
#define SF_STATE_DIM 14

typedef enum {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_NON_FINITE = 3,
  SF_STATUS_OFF_SURFACE = 4,
  SF_STATUS_DEGENERATE = 5,
  SF_STATUS_SINGULAR_GAUGE = 6,
  SF_STATUS_SUPERLUMINAL = 7,
  SF_STATUS_INTEGRATION_FAILED = 8,
  SF_STATUS_CONFIG_ERROR = 9,
  SF_STATUS_IO_ERROR = 10,
  SF_STATUS_RUNTIME_ERROR = 11,
  SF_STATUS_CHECKS_FAILED = 12,
  SF_STATUS_PANIC = 13,
} SfStatus;

/**
 * Integration sign convention of the spin potential.
 */
typedef enum {
  SF_CONVENTION_HAMILTONIAN = 0,
  SF_CONVENTION_REVERSED = 1,
} SfConvention;

/**
 * Physical parameters, field, gauge function and solver settings.
 */
typedef struct SfModel SfModel;

/**
 * A computed trajectory.
 */
typedef struct SfTrajectory SfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * including the terminator; pass `buf = NULL` to query it.
 */
size_t sf_last_error(char *buf, size_t len);

/**
 * Static NUL-terminated library version.
 */
const char *sf_version(void);

/**
 * Creates a model with `b` chosen so that `S² = 3ħ²/4`, zero field,
 * constant gauge `φ = 1` and default solver settings.
 */
SfStatus sf_model_new(double m,
                      double e,
                      double mu,
                      double c,
                      double a,
                      double hbar,
                      SfModel **out);

void sf_model_free(SfModel *model);

/**
 * Overrides the radius `b` of the `π` sphere.
 */
SfStatus sf_model_set_b(SfModel *model, double b);

SfStatus sf_model_set_convention(SfModel *model, SfConvention convention);

SfStatus sf_model_set_uniform_field(SfModel *model, const double *b);

/**
 * `B(x) = b0 + G x` with `G` given row-major; `G` must be traceless.
 */
SfStatus sf_model_set_linear_gradient_field(SfModel *model,
                                            const double *b0,
                                            const double *gradient);

/**
 * Gauge function `φ(t)` from an expression in `t`, e.g. `"1 + 0.5*sin(t)"`.
 */
SfStatus sf_model_set_gauge(SfModel *model, const char *expr);

/**
 * Tolerances and projection period (0 disables projection); `max_step <= 0`
 * means unbounded.
 */
SfStatus sf_model_set_solver(SfModel *model,
                             double rel_tol,
                             double abs_tol,
                             size_t project_every,
                             double max_step);

/**
 * Time derivative of the phase point `z` at time `t`.
 */
SfStatus sf_model_eom(const SfModel *model, const double *z, double t, double *out);

/**
 * Integrates from `z0` over `[t0, t1]`.
 */
SfStatus sf_integrate(const SfModel *model,
                      const double *z0,
                      double t0,
                      double t1,
                      SfTrajectory **out);

void sf_trajectory_free(SfTrajectory *traj);

/**
 * Number of samples; 0 for a null handle.
 */
size_t sf_trajectory_len(const SfTrajectory *traj);

/**
 * Time, phase point and spin `S = ω × π` of sample `index`. Any of the
 * output pointers may be null.
 */
SfStatus sf_trajectory_sample(const SfTrajectory *traj,
                              size_t index,
                              double *t,
                              double *z,
                              double *spin);

/**
 * Dense output at `t` inside the integrated interval.
 */
SfStatus sf_trajectory_interpolate(const SfTrajectory *traj, double t, double *z);

/**
 * Largest constraint residual over all samples.
 */
SfStatus sf_trajectory_max_drift(const SfTrajectory *traj, double *out);

/**
 * Writes the time-series table as CSV.
 */
SfStatus sf_trajectory_write_csv(const SfTrajectory *traj, const char *path);

/**
 * Poisson bracket `{S_i, S_j}` at `z`.
 */
SfStatus sf_spin_poisson_bracket(const double *z, int i, int j, double *out);

/**
 * Dirac bracket `{S_i, S_j}_D` with respect to `{ω² − a², ωπ}` at `z`.
 */
SfStatus sf_spin_dirac_bracket(const double *z, double a, int i, int j, double *out);

/**
 * Boost matrix for velocity `beta` (units of c), row-major 4×4.
 */
SfStatus sf_boost_matrix(const double *beta, double *out);

/**
 * `J_{μν} J^{μν}` for `J^{μν} = 2(ω^μ π^ν − ω^ν π^μ)`.
 */
SfStatus sf_casimir(const double *omega, const double *pi, double *out);

/**
 * Residuals `(π² − a3, ω² − a4, ωπ, Pω, Pπ)` of the covariant surface.
 */
SfStatus sf_t3_residuals(const double *omega,
                         const double *pi,
                         const double *momentum,
                         double a3,
                         double a4,
                         double *out);

/**
 * Spin four-vector `S^μ = ε^{μναβ} P_ν ω_α π_β / m̃c`.
 */
SfStatus sf_bmt_vector(const double *omega, const double *pi, const double *momentum, double *out);

/**
 * Runs a scenario file (TOML, or JSON by extension). Artifacts go to
 * `out_dir` if non-null, else to the configured directory. `passed` (may be
 * null) receives 1 if every check passed. A completed run with failing
 * checks returns `ChecksFailed`.
 */
SfStatus sf_run_config(const char *path, const char *out_dir, int *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINFIBER_H */
