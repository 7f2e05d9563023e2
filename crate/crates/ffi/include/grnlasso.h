#ifndef GRNLASSO_H
#define GRNLASSO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GrnStatus {
  GRN_STATUS_OK = 0,
  GRN_STATUS_NULL_POINTER = 1,
  GRN_STATUS_INVALID_ARGUMENT = 2,
  GRN_STATUS_IO = 3,
  GRN_STATUS_PARSE = 4,
  GRN_STATUS_SINGULAR = 5,
  GRN_STATUS_GENE_MISMATCH = 6,
  GRN_STATUS_BUDGET_EXCEEDED = 7,
  GRN_STATUS_PANIC = 8,
} GrnStatus;

/*
 Expression matrix, samples in rows and genes in columns.
 */
typedef struct GrnMatrix GrnMatrix;

/*
 Weighted network; entry `(i, j)` is the coefficient of gene `i` in the
 regression of gene `j`.
 */
typedef struct GrnNetwork GrnNetwork;

typedef struct GrnMetrics {
  uint64_t true_edges;
  uint64_t pred_edges;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  /*
   Zero when MCC is undefined; `mcc` is then NaN.
   */
  bool mcc_defined;
  double mcc;
  double tpr;
  double fpr;
  double acc;
} GrnMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after success.
 The pointer stays valid until the next call on the same thread.
 */
const char *grn_last_error(void);

/*
 Builds a matrix from `n * p` row-major values; genes are named g1..gp.

 # Safety
 `values` must point to `n * p` readable doubles and `out` must be writable.
 */
enum GrnStatus grn_matrix_from_values(const double *values,
                                      size_t n,
                                      size_t p,
                                      struct GrnMatrix **out);

/*
 Reads a TSV expression file; `transpose` means genes are in rows.

 # Safety
 `path` must be a NUL-terminated string and `out` must be writable.
 */
enum GrnStatus grn_matrix_load(const char *path, bool transpose, struct GrnMatrix **out);

/*
 # Safety
 `m` must be null or a handle from this library that has not been freed.
 */
void grn_matrix_free(struct GrnMatrix *m);

/*
 # Safety
 `m` must be a live handle; `n` and `p` must be writable.
 */
enum GrnStatus grn_matrix_dims(const struct GrnMatrix *m, size_t *n, size_t *p);

/*
 Writes a column-standardized copy (mean 0, variance 1) to `out`.

 # Safety
 `m` must be a live handle and `out` writable.
 */
enum GrnStatus grn_matrix_standardize(const struct GrnMatrix *m, struct GrnMatrix **out);

/*
 Lasso regression of gene `response` on the other genes of the
 standardized matrix at penalty `lambda`. Writes `p - 1` coefficients in
 gene order with the response skipped.

 # Safety
 `m` must be a live handle and `coefficients` must hold `len` doubles.
 */
enum GrnStatus grn_solve_lasso(const struct GrnMatrix *m,
                               size_t response,
                               double lambda,
                               double *coefficients,
                               size_t len);

/*
 Node-wise inference with cross-validated penalties. `method` is one of
 lasso, ridge, enet, fused, group, sgroup, paired, hier, labnet,
 ridgeperm, enetperm. `seed` drives fold assignment and permutations.

 # Safety
 `m` must be a live handle, `method` a NUL-terminated string and `out`
 writable.
 */
enum GrnStatus grn_infer_network(const struct GrnMatrix *m,
                                 const char *method,
                                 uint64_t seed,
                                 struct GrnNetwork **out);

/*
 # Safety
 `net` must be null or a handle from this library that has not been freed.
 */
void grn_network_free(struct GrnNetwork *net);

/*
 # Safety
 `net` must be a live handle and `p` writable.
 */
enum GrnStatus grn_network_size(const struct GrnNetwork *net, size_t *p);

/*
 Copies the `p * p` weights in row-major order.

 # Safety
 `net` must be a live handle and `weights` must hold `len` doubles.
 */
enum GrnStatus grn_network_weights(const struct GrnNetwork *net, double *weights, size_t len);

/*
 MCC, TPR, FPR and accuracy from confusion counts.

 # Safety
 `out` must be writable.
 */
enum GrnStatus grn_compute_metrics(uint64_t tp,
                                   uint64_t fp,
                                   uint64_t tn,
                                   uint64_t fn_,
                                   struct GrnMetrics *out);

/*
 Thresholds `net` at edge quantile `quantile` and scores it against the
 gold standard in `gold_path` (`source<TAB>target<TAB>0|1` lines).

 # Safety
 `net` must be a live handle, `gold_path` a NUL-terminated string and
 `out` writable.
 */
enum GrnStatus grn_evaluate(const struct GrnNetwork *net,
                            double quantile,
                            const char *gold_path,
                            struct GrnMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRNLASSO_H */
