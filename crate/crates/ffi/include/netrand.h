/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef NETRAND_H
#define NETRAND_H

#include <stddef.h>
#include <stdint.h>

#define NETRAND_OK 0

#define NETRAND_NULL_POINTER 1

#define NETRAND_INVALID_ARGUMENT 2

#define NETRAND_DATA_ERROR 3

#define NETRAND_INFEASIBLE 4

/*
 The requested quantity does not exist for this report.
 */
#define NETRAND_NOT_AVAILABLE 5

#define NETRAND_PANIC 6

/*
 Outcomes, treatment and optional covariate.
 */
typedef struct NetrandDataset NetrandDataset;

/*
 Undirected network.
 */
typedef struct NetrandGraph NetrandGraph;

/*
 Result of one test.
 */
typedef struct NetrandReport NetrandReport;

typedef struct NetrandDegreeDiagnostics {
  double third_moment;
  double path3_density;
  size_t max_degree;
  double mean_degree;
  size_t isolated_units;
} NetrandDegreeDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent failure on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *netrand_last_error(void);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void netrand_string_free(char *s);

/*
 Builds a network from `n_edges` pairs stored flat in `edges`
 (`edges[2k], edges[2k+1]`). Duplicate edges are merged.

 # Safety
 `edges` must point to `2 * n_edges` values; `out` must be writable.
 */
int32_t netrand_graph_new(size_t n_units,
                          const size_t *edges,
                          size_t n_edges,
                          struct NetrandGraph **out);

/*
 # Safety
 `g` must be null or a handle from `netrand_graph_new` not yet freed.
 */
void netrand_graph_free(struct NetrandGraph *g);

/*
 # Safety
 `g` must be a live graph handle; `out` must be writable.
 */
int32_t netrand_degree_diagnostics(const struct NetrandGraph *g,
                                   struct NetrandDegreeDiagnostics *out);

/*
 Exposure of every unit under the fraction-of-treated-neighbors rule:
 1 when the fraction exceeds `threshold` (or reaches it, when
 `strict == 0`). Writes `n_units` values to `out`.

 # Safety
 `t` and `out` must each hold `n_units` elements.
 */
int32_t netrand_compute_exposures(const struct NetrandGraph *g,
                                  const uint8_t *t,
                                  size_t n_units,
                                  double threshold,
                                  int32_t strict,
                                  uint32_t *out);

/*
 Dataset from outcomes `y` and 0/1 treatments `t`. `x` may be null; when
 present it holds an integer covariate code per unit.

 # Safety
 `y`, `t` and (if non-null) `x` must each hold `n_units` elements.
 */
int32_t netrand_dataset_new(const double *y,
                            const uint8_t *t,
                            const uint32_t *x,
                            size_t n_units,
                            struct NetrandDataset **out);

/*
 # Safety
 `d` must be null or a handle from `netrand_dataset_new` not yet freed.
 */
void netrand_dataset_free(struct NetrandDataset *d);

/*
 Runs one test. `settings_json` uses the same fields as the command
 line's `--config` file; null means all defaults.

 # Safety
 Handles must be live; `settings_json` must be null or NUL-terminated.
 */
int32_t netrand_run_test(const struct NetrandGraph *g,
                         const struct NetrandDataset *d,
                         const char *settings_json,
                         uint64_t seed,
                         struct NetrandReport **out);

/*
 # Safety
 `r` must be null or a handle from `netrand_run_test` not yet freed.
 */
void netrand_report_free(struct NetrandReport *r);

/*
 Full report as JSON.

 # Safety
 `r` must be a live report; `out` must be writable.
 */
int32_t netrand_report_to_json(const struct NetrandReport *r, char **out);

/*
 Number of per-cell p-values (zero for a combined test or a null handle).

 # Safety
 `r` must be null or a live report.
 */
size_t netrand_report_cell_count(const struct NetrandReport *r);

/*
 The `index`-th per-cell p-value, cells in label order. The label is
 written to `label` when it is non-null.

 # Safety
 `r` must be a live report; `pvalue` must be writable.
 */
int32_t netrand_report_cell_pvalue(const struct NetrandReport *r,
                                   size_t index,
                                   double *pvalue,
                                   char **label);

/*
 p-value of a combined test; `NETRAND_NOT_AVAILABLE` for multiple tests.

 # Safety
 `r` must be a live report; `out` must be writable.
 */
int32_t netrand_report_combined_pvalue(const struct NetrandReport *r, double *out);

/*
 Runs a size/power table (`"1"`..`"6"` or `"fig2"`) and returns it as CSV.
 `overrides_json` may set `reps`, `b`, `sigmas`, `dgps`, `sizes` and
 `techniques`; null keeps the standard plan.

 # Safety
 `table` must be NUL-terminated; `overrides_json` null or NUL-terminated;
 `csv_out` writable.
 */
int32_t netrand_simulate(const char *table,
                         const char *overrides_json,
                         uint64_t seed,
                         char **csv_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETRAND_H */
