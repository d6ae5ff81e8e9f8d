/* C interface to the pricepath library. Generated by cbindgen; do not edit. */

#ifndef PRICEPATH_H
#define PRICEPATH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. Matches the CLI process exit codes:
 * bad input 1, model-hypothesis violation 2, non-convergence 3.
 */
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_INVALID_INPUT = 1,
  PP_STATUS_HYPOTHESIS = 2,
  PP_STATUS_NON_CONVERGENCE = 3,
  /**
   * A panic crossed the boundary; state may be inconsistent.
   */
  PP_STATUS_INTERNAL = 4,
} PpStatus;

/**
 * Opaque parsed model handle.
 */
typedef struct PpModel PpModel;

/**
 * Opaque trajectory handle.
 */
typedef struct PpTrajectory PpTrajectory;

/**
 * Convergence summary of a numeric solve, written even when the solve fails
 * so callers can inspect how far it got.
 */
typedef struct PpSolveInfo {
  /**
   * Quadrature objective at the final iterate (no penalty term).
   */
  double objective;
  /**
   * Sup-norm of the projected gradient at the final iterate.
   */
  double grad_norm;
  /**
   * Sup-norm miss of the terminal inventory boundary.
   */
  double constraint_violation;
  /**
   * Worst relative mismatch of the analytic gradient against finite
   * differences at the first iterate; NaN when the check was skipped.
   */
  double gradient_check;
  /**
   * Accepted ascent steps across all penalty rounds.
   */
  size_t iterations;
  bool converged;
} PpSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pp_version(void);

/**
 * Message describing the most recent failure on this thread, or an empty
 * string after a success. The pointer is valid until the next library call
 * on the same thread.
 */
const char *pp_last_error(void);

/**
 * Parse a model document (the same JSON the CLI reads) into a handle.
 */
enum PpStatus pp_model_from_json(const char *json, struct PpModel **out);

/**
 * Number of items in the model, or 0 for a null handle.
 */
size_t pp_model_n_items(const struct PpModel *model);

void pp_model_free(struct PpModel *model);

/**
 * Closed-form markdown trajectory from initial inventories `i0[0..i0_len]`,
 * sampled on `n_points` grid points.
 */
enum PpStatus pp_markdown_closed(const struct PpModel *model,
                                 const double *i0,
                                 size_t i0_len,
                                 size_t n_points,
                                 struct PpTrajectory **out);

/**
 * Closed-form markdown trajectory pinned by inventory magnitude: the path
 * whose geometric-mean initial stock equals `geomean`.
 */
enum PpStatus pp_markdown_closed_scaled(const struct PpModel *model,
                                        double geomean,
                                        size_t n_points,
                                        struct PpTrajectory **out);

/**
 * Numeric markdown solve from initial inventories. The model must carry a
 * seasonality window (the numeric stage needs a finite horizon; add a uniform
 * window to the model document if the problem has no seasonal shape).
 *
 * `config_json` is an optional solver-config document (`NULL` for defaults).
 * `info_out` is optional; when non-null it is written even on failure.
 */
enum PpStatus pp_markdown_numeric(const struct PpModel *model,
                                  const double *i0,
                                  size_t i0_len,
                                  const char *config_json,
                                  struct PpSolveInfo *info_out,
                                  struct PpTrajectory **out);

/**
 * Stationary replenishment equilibrium: constant prices and the inventory
 * mix at overall scale `i_scale`. Writes up to `cap` entries into each
 * non-null buffer; both buffers need room for the model's item count.
 */
enum PpStatus pp_cr_equilibrium(const struct PpModel *model,
                                double i_scale,
                                double *price_out,
                                double *inventory_out,
                                size_t cap);

/**
 * Closed-form replenishment trajectory (the stationary equilibrium held over
 * the model's seasonality window), sampled on `n_points` grid points.
 */
enum PpStatus pp_cr_closed(const struct PpModel *model,
                           double i_scale,
                           size_t n_points,
                           struct PpTrajectory **out);

/**
 * Numeric replenishment solve with cyclical boundary `I(T) = I(0) = i0`.
 * Same conventions as [`pp_markdown_numeric`].
 */
enum PpStatus pp_cr_numeric(const struct PpModel *model,
                            const double *i0,
                            size_t i0_len,
                            const char *config_json,
                            struct PpSolveInfo *info_out,
                            struct PpTrajectory **out);

/**
 * Number of grid points, or 0 for a null handle.
 */
size_t pp_trajectory_len(const struct PpTrajectory *traj);

/**
 * Number of items, or 0 for a null handle.
 */
size_t pp_trajectory_n_items(const struct PpTrajectory *traj);

/**
 * Objective value recorded on the trajectory (revenue for markdown, profit
 * for replenishment). NaN for a null handle.
 */
double pp_trajectory_objective(const struct PpTrajectory *traj);

/**
 * Copy one column into `buf`. `name` is one of `t`, `tau`, `I`, `p`, `S`,
 * `R`, `lambda`, `rho2` (matching the CSV headers); `item` picks the item for
 * the per-item series and is ignored for `t` and `tau`. `cap` must be at
 * least [`pp_trajectory_len`]; exactly that many values are written.
 */
enum PpStatus pp_trajectory_series(const struct PpTrajectory *traj,
                                   const char *name,
                                   size_t item,
                                   double *buf,
                                   size_t cap);

/**
 * Render the trajectory in the CSV format the CLI writes. The returned
 * string is owned by the caller; release it with [`pp_string_free`].
 */
enum PpStatus pp_trajectory_to_csv(const struct PpTrajectory *traj, char **out);

void pp_string_free(char *s);

void pp_trajectory_free(struct PpTrajectory *traj);

/**
 * Evaluate conservation laws on a trajectory and report the worst relative
 * spread across them. `invariants` is a comma-separated list of invariant
 * names, with `all` expanding to every invariant conserved for the model's
 * demand kind. The ends of the window are trimmed by `trim_frac` (0 to 0.5)
 * on each side before evaluating, mirroring the CLI's `verify`.
 */
enum PpStatus pp_invariant_max_rel_dev(const struct PpModel *model,
                                       const struct PpTrajectory *traj,
                                       const char *invariants,
                                       double trim_frac,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICEPATH_H */
