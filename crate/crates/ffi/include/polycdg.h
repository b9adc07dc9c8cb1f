#ifndef POLYCDG_H
#define POLYCDG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PCDG_FAMILY_TRIANGLES 0

#define PCDG_FAMILY_POLYGONS 1

#define PCDG_BC_STRONG 0

#define PCDG_BC_WEAK 1

typedef enum PcdgStatus {
  PCDG_STATUS_OK = 0,
  PCDG_STATUS_NULL_POINTER = 1,
  PCDG_STATUS_INVALID_ARGUMENT = 2,
  PCDG_STATUS_PARSE = 3,
  PCDG_STATUS_NUMERICAL = 4,
  PCDG_STATUS_IO = 5,
  PCDG_STATUS_BUFFER_TOO_SMALL = 6,
  PCDG_STATUS_PANIC = 7,
} PcdgStatus;

/**
 * Opaque mesh handle.
 */
typedef struct PcdgMesh PcdgMesh;

/**
 * Opaque handle to a solved test problem.
 */
typedef struct PcdgSolution PcdgSolution;

typedef struct PcdgMeshCounts {
  size_t vertices;
  size_t edges;
  size_t boundary_edges;
  size_t cells;
} PcdgMeshCounts;

typedef struct PcdgErrors {
  /**
   * `‖u_h − Q_0 u‖`
   */
  double l2_error;
  /**
   * `|||u − u_h|||`
   */
  double energy_error;
  /**
   * `‖u_h − Q_0 u‖_{1,h}`
   */
  double h1h_error;
  size_t dim;
  size_t cg_iterations;
  double cg_residual;
} PcdgErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Generates a mesh of the given family (`PCDG_FAMILY_*`) and level.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum PcdgStatus pcdg_mesh_generate(int32_t family, uint32_t level, struct PcdgMesh **out);

/**
 * Reads a mesh in the text format written by [`pcdg_mesh_write`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in [`pcdg_mesh_generate`].
 */
enum PcdgStatus pcdg_mesh_read(const char *path, struct PcdgMesh **out);

/**
 * # Safety
 * `mesh` must be a live handle; `path` a NUL-terminated string.
 */
enum PcdgStatus pcdg_mesh_write(const struct PcdgMesh *mesh, const char *path);

/**
 * Releases a mesh handle. Null is ignored.
 *
 * # Safety
 * `mesh` must be null or a handle not yet freed.
 */
void pcdg_mesh_free(struct PcdgMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle and `out` valid for writing.
 */
enum PcdgStatus pcdg_mesh_counts(const struct PcdgMesh *mesh, struct PcdgMeshCounts *out);

/**
 * Stores the number of validation violations in `n_violations`; the first
 * one, if any, becomes the last-error message.
 *
 * # Safety
 * `mesh` must be a live handle and `n_violations` valid for writing.
 */
enum PcdgStatus pcdg_mesh_validate(const struct PcdgMesh *mesh, size_t *n_violations);

/**
 * Solves the sine test problem on `mesh` with degree `k`, boundary mode
 * `bc` (`PCDG_BC_*`) and weak-gradient degree `j` (negative for the
 * default rule), to relative residual `tol`.
 *
 * # Safety
 * `mesh` must be a live handle; `out` as in [`pcdg_mesh_generate`].
 */
enum PcdgStatus pcdg_solve(const struct PcdgMesh *mesh,
                           uint32_t k,
                           int32_t bc,
                           int32_t j,
                           double tol,
                           struct PcdgSolution **out);

/**
 * Releases a solution handle. Null is ignored.
 *
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void pcdg_solution_free(struct PcdgSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle and `out` valid for writing.
 */
enum PcdgStatus pcdg_solution_errors(const struct PcdgSolution *solution, struct PcdgErrors *out);

/**
 * Copies the per-cell scaled-monomial coefficients of `u_h`, cell after
 * cell (`(k+1)(k+2)/2` values each), into `buf`. `needed` receives the
 * required length; a null `buf` only queries it. A short buffer yields
 * [`PcdgStatus::BufferTooSmall`] and copies nothing.
 *
 * # Safety
 * `buf` must be null or valid for `len` doubles; `needed` null or writable.
 */
enum PcdgStatus pcdg_solution_coefficients(const struct PcdgSolution *solution,
                                           double *buf,
                                           size_t len,
                                           size_t *needed);

/**
 * Evaluates `u_h` restricted to `cell` at `(x, y)`.
 *
 * # Safety
 * `solution` must be a live handle and `value` valid for writing.
 */
enum PcdgStatus pcdg_solution_eval(const struct PcdgSolution *solution,
                                   size_t cell,
                                   double x,
                                   double y,
                                   double *value);

/**
 * Copies the calling thread's last error message (NUL-terminated,
 * truncated to fit) into `buf` and returns the buffer size needed for the
 * full message, including the terminator. A null `buf` only queries.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t pcdg_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pcdg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYCDG_H */
