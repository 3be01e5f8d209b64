#ifndef PERIDYN_H
#define PERIDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_UTF8 = 2,
  /*
   The deck could not be read, parsed or validated.
   */
  PD_STATUS_DECK = 3,
  /*
   Geometry, horizon or parameters are inconsistent.
   */
  PD_STATUS_INPUT = 4,
  /*
   Solver, Newton or time stepping failed.
   */
  PD_STATUS_NUMERICAL = 5,
  PD_STATUS_BUFFER_TOO_SMALL = 6,
  /*
   Results were requested before [`pd_simulation_run`] succeeded.
   */
  PD_STATUS_NOT_RUN = 7,
  PD_STATUS_PANIC = 8,
} PdStatus;

/*
 Snapshot file format.
 */
typedef enum PdFormat {
  PD_FORMAT_CSV = 0,
  PD_FORMAT_VTK = 1,
} PdFormat;

/*
 Opaque simulation handle.
 */
typedef struct PdSimulation PdSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *pd_version(void);

/*
 Message of the last failure on this thread, or NULL. The pointer stays
 valid until the next call into the library from the same thread.
 */
const char *pd_last_error(void);

/*
 Static description of a status code.
 */
const char *pd_status_message(enum PdStatus status);

/*
 Loads a deck file and builds a simulation on `threads` workers (0 uses
 the default). On success `*out` receives a handle owned by the caller.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PdStatus pd_simulation_from_file(const char *path, size_t threads, struct PdSimulation **out);

/*
 As [`pd_simulation_from_file`], from YAML text.

 # Safety
 `yaml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PdStatus pd_simulation_from_yaml(const char *yaml, size_t threads, struct PdSimulation **out);

/*
 Releases a handle. NULL is ignored.

 # Safety
 `sim` must come from a constructor of this library and not be used
 afterwards.
 */
void pd_simulation_free(struct PdSimulation *sim);

/*
 # Safety
 `sim` must be a live handle and `out` a valid pointer.
 */
enum PdStatus pd_simulation_node_count(const struct PdSimulation *sim, size_t *out);

/*
 # Safety
 `sim` must be a live handle and `out` a valid pointer.
 */
enum PdStatus pd_simulation_dim(const struct PdSimulation *sim, size_t *out);

/*
 Runs the integrator configured by the deck, replacing earlier results.

 # Safety
 `sim` must be a live handle.
 */
enum PdStatus pd_simulation_run(struct PdSimulation *sim);

/*
 Number of snapshots produced by the last run.

 # Safety
 `sim` must be a live handle and `out` a valid pointer.
 */
enum PdStatus pd_simulation_snapshot_count(const struct PdSimulation *sim, size_t *out);

/*
 Reference positions, three values per node.

 # Safety
 `sim` must be a live handle and `buf` must hold `len` doubles.
 */
enum PdStatus pd_simulation_positions(const struct PdSimulation *sim, double *buf, size_t len);

/*
 Final displacement of the last run, `dim` values per node.

 # Safety
 `sim` must be a live handle and `buf` must hold `len` doubles.
 */
enum PdStatus pd_simulation_displacement(const struct PdSimulation *sim, double *buf, size_t len);

/*
 Writes the snapshots of the last run into `dir`.

 # Safety
 `sim` must be a live handle and `dir` a NUL-terminated string.
 */
enum PdStatus pd_simulation_write_outputs(const struct PdSimulation *sim,
                                          const char *dir,
                                          enum PdFormat format);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERIDYN_H */
