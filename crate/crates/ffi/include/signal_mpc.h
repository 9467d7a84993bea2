#ifndef SIGNAL_MPC_H
#define SIGNAL_MPC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Controller selector for [`smpc_controller_new`].
typedef enum SmpcControllerKind {
  SMPC_CONTROLLER_KIND_ONE_STEP_MPC = 0,
  SMPC_CONTROLLER_KIND_MAX_PRESSURE = 1,
  SMPC_CONTROLLER_KIND_PROP_FAIR = 2,
  SMPC_CONTROLLER_KIND_FIXED_TIME = 3,
} SmpcControllerKind;

// Result code of every exported function.
typedef enum SmpcStatus {
  SMPC_STATUS_OK = 0,
  SMPC_STATUS_NULL_POINTER = 1,
  SMPC_STATUS_INVALID_ARGUMENT = 2,
  SMPC_STATUS_DIMENSION_MISMATCH = 3,
  SMPC_STATUS_INVALID_NETWORK = 4,
  SMPC_STATUS_INVALID_CONFIG = 5,
  SMPC_STATUS_IDENTIFICATION_ABORTED = 6,
  SMPC_STATUS_NUMERICAL = 7,
  SMPC_STATUS_IO = 8,
  SMPC_STATUS_PANIC = 9,
} SmpcStatus;

// A feedback controller bound to the network it was created for.
typedef struct SmpcController SmpcController;

// An immutable traffic network.
typedef struct SmpcNetwork SmpcNetwork;

// Outcome of [`smpc_identify`].
typedef struct SmpcIdentifyReport {
  // Plant steps taken.
  size_t steps;
  // Nonzero when every target was identified.
  int32_t completed;
} SmpcIdentifyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on this thread.
const char *smpc_last_error(void);

// Library version as a static NUL-terminated string.
const char *smpc_version(void);

// The 2×2 experiment grid.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SmpcStatus smpc_network_grid(struct SmpcNetwork **out);

// Builds a network from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SmpcStatus smpc_network_from_json(const char *json, struct SmpcNetwork **out);

// Releases a network. Null is ignored.
//
// # Safety
// `net` must come from this library and not be used afterwards.
void smpc_network_free(struct SmpcNetwork *net);

// Sizes of the network's vectors: nodes, movements, flat controls, entry
// links and exit links. Any output pointer may be null.
//
// # Safety
// `net` must be a live handle; non-null outputs must be writable.
enum SmpcStatus smpc_network_dims(const struct SmpcNetwork *net,
                                  size_t *nodes,
                                  size_t *movements,
                                  size_t *controls,
                                  size_t *entry_links,
                                  size_t *exit_links);

// Number of phases at node `node`.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum SmpcStatus smpc_network_num_phases(const struct SmpcNetwork *net, size_t node, size_t *out);

// True saturation rates and turn ratios, one per movement. Either output
// may be null.
//
// # Safety
// `net` must be a live handle; non-null outputs must hold `len` values.
enum SmpcStatus smpc_network_parameters(const struct SmpcNetwork *net,
                                        double *saturation,
                                        double *turn_ratio,
                                        size_t len);

// One step of the queue dynamics. `exit_volume` may be null.
//
// # Safety
// `net` must be a live handle and every non-null buffer must hold the
// stated number of values.
enum SmpcStatus smpc_step(const struct SmpcNetwork *net,
                          const double *queues,
                          size_t num_movements,
                          const double *control,
                          size_t num_controls,
                          const double *demand,
                          size_t num_entries,
                          double *next_queues,
                          double *exit_volume);

// Whether `demand` lies strictly inside the stabilizable region. `margin`
// receives the smallest slack and `witness`, when non-null, a control
// achieving it (left untouched when infeasible).
//
// # Safety
// `net` must be a live handle; buffers must hold the stated lengths.
enum SmpcStatus smpc_check_feasible(const struct SmpcNetwork *net,
                                    const double *demand,
                                    size_t num_entries,
                                    int32_t *feasible,
                                    double *margin,
                                    double *witness,
                                    size_t num_controls);

// Creates a controller for `net`. `seed` drives the restarts of the
// one-step MPC solver and is ignored by the other controllers.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum SmpcStatus smpc_controller_new(const struct SmpcNetwork *net,
                                    enum SmpcControllerKind kind,
                                    uint64_t seed,
                                    struct SmpcController **out);

// Releases a controller. Null is ignored.
//
// # Safety
// `ctrl` must come from this library and not be used afterwards.
void smpc_controller_free(struct SmpcController *ctrl);

// The control the controller applies at step `t` from `queues`.
//
// # Safety
// `ctrl` must be a live handle; buffers must hold the stated lengths.
enum SmpcStatus smpc_controller_control(struct SmpcController *ctrl,
                                        uint64_t t,
                                        const double *queues,
                                        size_t num_movements,
                                        double *control,
                                        size_t num_controls);

// Identifies saturation rates and internal turn ratios of a simulated
// plant built on `net`, starting from bounds at `margin` around the truth.
// The midpoints of the final bounds are written to `saturation` and
// `turn_ratio` even when the run aborts, in which case the status is
// `IdentificationAborted` and `report.completed` is zero.
//
// # Safety
// `net` must be a live handle; buffers must hold the stated lengths.
enum SmpcStatus smpc_identify(const struct SmpcNetwork *net,
                              const double *demand,
                              size_t num_entries,
                              const double *initial_queues,
                              size_t num_movements,
                              double margin,
                              double *saturation,
                              double *turn_ratio,
                              struct SmpcIdentifyReport *report);

// Runs a scenario given as JSON text and writes its outputs to `out_dir`.
// Relative paths inside the scenario resolve against the working directory.
//
// # Safety
// Both arguments must be NUL-terminated strings.
enum SmpcStatus smpc_run_scenario(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGNAL_MPC_H */
