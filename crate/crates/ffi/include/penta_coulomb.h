#ifndef PENTA_COULOMB_H
#define PENTA_COULOMB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call. Zero is success.
typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_ARGUMENT = 2,
  PC_STATUS_INVALID_LINKAGE = 3,
  PC_STATUS_INVALID_CONFIGURATION = 4,
  PC_STATUS_NOT_REALIZABLE = 5,
  PC_STATUS_NOT_CONVEX = 6,
  PC_STATUS_BOUNDARY_CONFIGURATION = 7,
  PC_STATUS_EMPTY_MODULI = 8,
  PC_STATUS_NON_POSITIVE_CHARGE = 9,
  PC_STATUS_NONGENERIC_LINKAGE = 10,
  PC_STATUS_DEGENERATE_GEOMETRY = 11,
  PC_STATUS_NUMERICAL_CONDITIONING = 12,
  PC_STATUS_NO_CONVERGENCE = 13,
  PC_STATUS_CONTINUATION_BREAK = 14,
  PC_STATUS_INVALID_PATH = 15,
  // A Rust panic was caught at the boundary; a bug.
  PC_STATUS_INTERNAL = 99,
} PcStatus;

// Side lengths of a closed polygonal linkage.
typedef struct PcLinkage PcLinkage;

// A navigated trajectory: one convex minimum per charge step.
typedef struct PcTrajectory PcTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *pc_last_error_message(void);

// Creates a linkage from `n` side lengths.
//
// # Safety
// `sides` points to `n` doubles; `out` is writable.
enum PcStatus pc_linkage_new(const double *sides, size_t n, struct PcLinkage **out);

// Releases a linkage. Null is ignored.
//
// # Safety
// `linkage` came from [`pc_linkage_new`] and is not used afterwards.
void pc_linkage_free(struct PcLinkage *linkage);

// Number of sides.
//
// # Safety
// `linkage` is a live handle or null; `out` is writable.
enum PcStatus pc_linkage_sides(const struct PcLinkage *linkage, size_t *out);

// Global minimum of the Coulomb energy over strictly convex configurations,
// in the canonical frame.
//
// # Safety
// `charges` holds one double per side; `vertices_out` has room for two per
// side; `energy_out` is writable.
enum PcStatus pc_minimize(const struct PcLinkage *linkage,
                          const double *charges,
                          double *vertices_out,
                          double *energy_out);

// Controlling charges `(s, t)` on vertices five and three that make the
// given convex pentagon critical, with `fixed` on vertices one, two, four.
//
// # Safety
// `vertices` holds 10 doubles, `fixed` 3; `s_out` and `t_out` are writable.
enum PcStatus pc_stabilize_pentagon(const double *vertices,
                                    const double *fixed,
                                    double *s_out,
                                    double *t_out);

// Charge `t` that makes the given convex quadrilateral critical.
//
// # Safety
// `vertices` holds 8 doubles; `t_out` is writable.
enum PcStatus pc_stabilize_quad(const double *vertices, double *t_out);

// Steers the convex minimum from `start` to `target` by moving `(s, t)`
// along a straight segment in `steps` increments.
//
// # Safety
// `start` and `target` hold 10 doubles each, `fixed` 3; `out` is writable.
enum PcStatus pc_navigate(const struct PcLinkage *linkage,
                          const double *start,
                          const double *target,
                          const double *fixed,
                          size_t steps,
                          struct PcTrajectory **out);

// Number of stored steps, including the start.
//
// # Safety
// `trajectory` is a live handle or null; `out` is writable.
enum PcStatus pc_trajectory_len(const struct PcTrajectory *trajectory, size_t *out);

// Step `index`: its charges, energy and 10 vertex coordinates.
//
// # Safety
// `trajectory` is a live handle or null; outputs are writable and
// `vertices_out` has room for 10 doubles.
enum PcStatus pc_trajectory_step(const struct PcTrajectory *trajectory,
                                 size_t index,
                                 double *s_out,
                                 double *t_out,
                                 double *energy_out,
                                 double *vertices_out);

// Releases a trajectory. Null is ignored.
//
// # Safety
// `trajectory` came from [`pc_navigate`] and is not used afterwards.
void pc_trajectory_free(struct PcTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENTA_COULOMB_H */
