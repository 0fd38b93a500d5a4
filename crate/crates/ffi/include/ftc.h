#ifndef FTC_H
#define FTC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FtcStatus {
  FTC_STATUS_OK = 0,
  FTC_STATUS_NULL_POINTER = 1,
  FTC_STATUS_INVALID_ARGUMENT = 2,
  // Rejected scenario or configuration.
  FTC_STATUS_CONFIG = 3,
  FTC_STATUS_IO = 4,
  // The simulation or solver failed hard (model validity, singular system).
  FTC_STATUS_SIMULATION = 5,
  // Results were requested before `ftc_sim_run` succeeded.
  FTC_STATUS_NOT_RUN = 6,
  FTC_STATUS_PANIC = 7,
} FtcStatus;

typedef enum FtcController {
  FTC_CONTROLLER_PID = 0,
  FTC_CONTROLLER_NMPC_THROTTLE = 1,
  FTC_CONTROLLER_NMPC_THRUST_FTC = 2,
} FtcController;

typedef enum FtcEffort {
  // Throttle fraction in [0, 1].
  FTC_EFFORT_THROTTLE = 0,
  // Commanded thrust [N].
  FTC_EFFORT_THRUST = 1,
} FtcEffort;

// Opaque scenario handle.
typedef struct FtcSim FtcSim;

// One logged plant step. Angles in rad, speeds in m/s, forces in N.
typedef struct FtcRecord {
  double t;
  double altitude;
  double altitude_ref;
  double airspeed;
  double airspeed_ref;
  double v_d;
  double theta;
  double effort_cmd;
  double elevator_cmd;
  double thrust_true;
  double thrust_hat;
  double var_thrust;
  // NaN when the controller has no thrust bound.
  double applied_bound;
  uint8_t fault_flag;
  // 0 converged, 1 iteration limit, 2 infeasible, -1 no solver.
  int8_t solver_status;
} FtcRecord;

// Run metrics. Values that do not apply are NaN.
typedef struct FtcSummary {
  uint64_t samples;
  double detection_latency;
  bool false_alarm;
  double min_airspeed;
  double cruise_max_altitude;
  double cruise_rms;
  double descent_end_error;
  uint64_t v_d_excursions_post_fault;
  uint64_t v_d_touches_post_fault;
  uint64_t control_violations;
  uint64_t bound_exceedances;
  uint64_t solves;
  uint64_t solver_max_iter;
  uint64_t solver_infeasible;
} FtcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` as a C string,
// truncated to `len` bytes including the terminator. Returns the full
// message length, so a short buffer can be retried.
//
// # Safety
// `buf` is null or points to `len` writable bytes.
uintptr_t ftc_last_error(char *buf, uintptr_t len);

// Create a handle for a preset scenario (1, 2 or 3).
//
// # Safety
// `out` points to writable storage for a handle pointer.
enum FtcStatus ftc_sim_new_preset(uint32_t scenario,
                                  enum FtcController controller,
                                  uint64_t seed,
                                  struct FtcSim **out);

// Create a handle from a scenario file given as TOML text.
//
// # Safety
// `toml` is a NUL-terminated string; `out` points to writable storage for a
// handle pointer.
enum FtcStatus ftc_sim_new_from_toml(const char *toml, struct FtcSim **out);

// Release a handle. Null is ignored.
//
// # Safety
// `sim` is null or a handle from this library that has not been freed.
void ftc_sim_free(struct FtcSim *sim);

// Run the whole scenario. A later run replaces the previous results.
//
// # Safety
// `sim` is a live handle not used concurrently from another thread.
enum FtcStatus ftc_sim_run(struct FtcSim *sim);

// Number of logged steps of the last run.
//
// # Safety
// `sim` is a live handle; `count` points to writable storage.
enum FtcStatus ftc_sim_record_count(const struct FtcSim *sim, uintptr_t *count);

// Copy logged step `index` of the last run.
//
// # Safety
// `sim` is a live handle; `record` points to writable storage.
enum FtcStatus ftc_sim_record(const struct FtcSim *sim, uintptr_t index, struct FtcRecord *record);

// Metrics of the last run.
//
// # Safety
// `sim` is a live handle; `summary` points to writable storage.
enum FtcStatus ftc_sim_summary(const struct FtcSim *sim, struct FtcSummary *summary);

// Write the full log of the last run as CSV.
//
// # Safety
// `sim` is a live handle; `path` is a NUL-terminated string.
enum FtcStatus ftc_sim_write_csv(const struct FtcSim *sim, const char *path);

// State derivative of the nominal aircraft. States are ordered
// `[x_D, V_N, V_D, theta, q]`.
//
// # Safety
// `state` points to 5 readable and `rates` to 5 writable doubles.
enum FtcStatus ftc_dynamics(const double *state,
                            enum FtcEffort kind,
                            double effort,
                            double elevator,
                            double wind_north,
                            double wind_down,
                            double *rates);

// One RK4 step of `dt` seconds with inputs and wind held. `next` may alias
// `state`.
//
// # Safety
// `state` points to 5 readable and `next` to 5 writable doubles.
enum FtcStatus ftc_plant_step(const double *state,
                              enum FtcEffort kind,
                              double effort,
                              double elevator,
                              double wind_north,
                              double wind_down,
                              double dt,
                              double *next);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FTC_H */
