//! C interface: scenario runs behind an opaque handle, plus the plant model.
//!
//! Every call returns an `FtcStatus`. On failure the message is kept per
//! thread and can be read with `ftc_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ftc_core::flight_model::{
    dynamics::dynamics, integrate_step, AircraftParams, ControlInput, EffortKind, LongitudinalState, WindVelocity,
};
use ftc_core::harness::{run_scenario, write_csv, ControllerKind, ScenarioConfig, SimOutput, SimRecord};
use ftc_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Rejected scenario or configuration.
    Config = 3,
    Io = 4,
    /// The simulation or solver failed hard (model validity, singular system).
    Simulation = 5,
    /// Results were requested before `ftc_sim_run` succeeded.
    NotRun = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtcController {
    Pid = 0,
    NmpcThrottle = 1,
    NmpcThrustFtc = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtcEffort {
    /// Throttle fraction in [0, 1].
    Throttle = 0,
    /// Commanded thrust [N].
    Thrust = 1,
}

/// One logged plant step. Angles in rad, speeds in m/s, forces in N.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FtcRecord {
    pub t: f64,
    pub altitude: f64,
    pub altitude_ref: f64,
    pub airspeed: f64,
    pub airspeed_ref: f64,
    pub v_d: f64,
    pub theta: f64,
    pub effort_cmd: f64,
    pub elevator_cmd: f64,
    pub thrust_true: f64,
    pub thrust_hat: f64,
    pub var_thrust: f64,
    /// NaN when the controller has no thrust bound.
    pub applied_bound: f64,
    pub fault_flag: u8,
    /// 0 converged, 1 iteration limit, 2 infeasible, -1 no solver.
    pub solver_status: i8,
}

/// Run metrics. Values that do not apply are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FtcSummary {
    pub samples: u64,
    pub detection_latency: f64,
    pub false_alarm: bool,
    pub min_airspeed: f64,
    pub cruise_max_altitude: f64,
    pub cruise_rms: f64,
    pub descent_end_error: f64,
    pub v_d_excursions_post_fault: u64,
    pub v_d_touches_post_fault: u64,
    pub control_violations: u64,
    pub bound_exceedances: u64,
    pub solves: u64,
    pub solver_max_iter: u64,
    pub solver_infeasible: u64,
}

/// Opaque scenario handle.
pub struct FtcSim {
    config: ScenarioConfig,
    output: Option<SimOutput>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: FtcStatus, msg: impl Into<String>) -> FtcStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> FtcStatus {
    let status = match e {
        Error::Config(_) => FtcStatus::Config,
        Error::Io { .. } | Error::Csv { .. } => FtcStatus::Io,
        _ => FtcStatus::Simulation,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> FtcStatus) -> FtcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == FtcStatus::Ok {
                set_error("");
            }
            status
        }
        Err(_) => fail(FtcStatus::Panic, "internal panic"),
    }
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, FtcStatus> {
    if s.is_null() {
        return Err(fail(FtcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(FtcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

impl From<FtcController> for ControllerKind {
    fn from(c: FtcController) -> Self {
        match c {
            FtcController::Pid => ControllerKind::Pid,
            FtcController::NmpcThrottle => ControllerKind::NmpcThrottle,
            FtcController::NmpcThrustFtc => ControllerKind::NmpcThrustFtc,
        }
    }
}

impl From<FtcEffort> for EffortKind {
    fn from(e: FtcEffort) -> Self {
        match e {
            FtcEffort::Throttle => EffortKind::Throttle,
            FtcEffort::Thrust => EffortKind::Thrust,
        }
    }
}

impl From<&SimRecord> for FtcRecord {
    fn from(r: &SimRecord) -> Self {
        FtcRecord {
            t: r.t,
            altitude: r.altitude,
            altitude_ref: r.altitude_ref,
            airspeed: r.airspeed,
            airspeed_ref: r.airspeed_ref,
            v_d: r.v_d,
            theta: r.theta,
            effort_cmd: r.effort_cmd,
            elevator_cmd: r.elevator_cmd,
            thrust_true: r.thrust_true,
            thrust_hat: r.thrust_hat,
            var_thrust: r.var_thrust,
            applied_bound: r.applied_bound,
            fault_flag: r.fault_flag,
            solver_status: r.solver_status,
        }
    }
}

/// Copy the last error message of this thread into `buf` as a C string,
/// truncated to `len` bytes including the terminator. Returns the full
/// message length, so a short buffer can be retried.
///
/// # Safety
/// `buf` is null or points to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ftc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

fn new_handle(config: ScenarioConfig, out: *mut *mut FtcSim) -> FtcStatus {
    if let Err(e) = config.validate() {
        return from_error(&e);
    }
    let sim = Box::new(FtcSim { config, output: None });
    // SAFETY: checked non-null by the callers.
    unsafe { *out = Box::into_raw(sim) };
    FtcStatus::Ok
}

/// Create a handle for a preset scenario (1, 2 or 3).
///
/// # Safety
/// `out` points to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_new_preset(
    scenario: u32,
    controller: FtcController,
    seed: u64,
    out: *mut *mut FtcSim,
) -> FtcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FtcStatus::NullPointer, "out is null");
        }
        match ScenarioConfig::preset(scenario, controller.into()) {
            Ok(config) => new_handle(ScenarioConfig { seed, ..config }, out),
            Err(e) => from_error(&e),
        }
    })
}

/// Create a handle from a scenario file given as TOML text.
///
/// # Safety
/// `toml` is a NUL-terminated string; `out` points to writable storage for a
/// handle pointer.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_new_from_toml(toml: *const c_char, out: *mut *mut FtcSim) -> FtcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FtcStatus::NullPointer, "out is null");
        }
        let text = match c_str(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_toml_str(text) {
            Ok(config) => new_handle(config, out),
            Err(e) => from_error(&e),
        }
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `sim` is null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_free(sim: *mut FtcSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut FtcSim) -> Result<&'a mut FtcSim, FtcStatus> {
    sim.as_mut().ok_or_else(|| fail(FtcStatus::NullPointer, "sim is null"))
}

unsafe fn output<'a>(sim: *const FtcSim) -> Result<&'a SimOutput, FtcStatus> {
    let sim = sim
        .as_ref()
        .ok_or_else(|| fail(FtcStatus::NullPointer, "sim is null"))?;
    sim.output
        .as_ref()
        .ok_or_else(|| fail(FtcStatus::NotRun, "scenario has not been run"))
}

/// Run the whole scenario. A later run replaces the previous results.
///
/// # Safety
/// `sim` is a live handle not used concurrently from another thread.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_run(sim: *mut FtcSim) -> FtcStatus {
    guard(|| {
        let sim = match handle(sim) {
            Ok(s) => s,
            Err(s) => return s,
        };
        sim.output = None;
        match run_scenario(&sim.config) {
            Ok(out) => {
                sim.output = Some(out);
                FtcStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of logged steps of the last run.
///
/// # Safety
/// `sim` is a live handle; `count` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_record_count(sim: *const FtcSim, count: *mut usize) -> FtcStatus {
    guard(|| {
        if count.is_null() {
            return fail(FtcStatus::NullPointer, "count is null");
        }
        match output(sim) {
            Ok(o) => {
                *count = o.records.len();
                FtcStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Copy logged step `index` of the last run.
///
/// # Safety
/// `sim` is a live handle; `record` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_record(sim: *const FtcSim, index: usize, record: *mut FtcRecord) -> FtcStatus {
    guard(|| {
        if record.is_null() {
            return fail(FtcStatus::NullPointer, "record is null");
        }
        let o = match output(sim) {
            Ok(o) => o,
            Err(s) => return s,
        };
        match o.records.get(index) {
            Some(r) => {
                *record = r.into();
                FtcStatus::Ok
            }
            None => fail(
                FtcStatus::InvalidArgument,
                format!("index {index} out of range for {} records", o.records.len()),
            ),
        }
    })
}

/// Metrics of the last run.
///
/// # Safety
/// `sim` is a live handle; `summary` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_summary(sim: *const FtcSim, summary: *mut FtcSummary) -> FtcStatus {
    guard(|| {
        if summary.is_null() {
            return fail(FtcStatus::NullPointer, "summary is null");
        }
        let s = match output(sim) {
            Ok(o) => &o.summary,
            Err(s) => return s,
        };
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *summary = FtcSummary {
            samples: s.samples as u64,
            detection_latency: nan(s.detection_latency),
            false_alarm: s.false_alarm,
            min_airspeed: s.min_airspeed,
            cruise_max_altitude: nan(s.cruise_max_altitude),
            cruise_rms: nan(s.cruise_rms),
            descent_end_error: nan(s.descent_end_error),
            v_d_excursions_post_fault: s.v_d_excursions_post_fault as u64,
            v_d_touches_post_fault: s.v_d_touches_post_fault as u64,
            control_violations: s.control_violations as u64,
            bound_exceedances: s.bound_exceedances as u64,
            solves: s.solves as u64,
            solver_max_iter: s.solver_max_iter as u64,
            solver_infeasible: s.solver_infeasible as u64,
        };
        FtcStatus::Ok
    })
}

/// Write the full log of the last run as CSV.
///
/// # Safety
/// `sim` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ftc_sim_write_csv(sim: *const FtcSim, path: *const c_char) -> FtcStatus {
    guard(|| {
        let path = match c_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match output(sim) {
            Ok(o) => match write_csv(&o.records, Path::new(path)) {
                Ok(()) => FtcStatus::Ok,
                Err(e) => from_error(&e),
            },
            Err(s) => s,
        }
    })
}

unsafe fn plant_inputs(
    state: *const f64,
    effort: f64,
    elevator: f64,
    kind: FtcEffort,
) -> Result<(LongitudinalState, ControlInput), FtcStatus> {
    if state.is_null() {
        return Err(fail(FtcStatus::NullPointer, "state is null"));
    }
    let mut a = [0.0; 5];
    std::ptr::copy_nonoverlapping(state, a.as_mut_ptr(), 5);
    Ok((
        LongitudinalState::from_array(a),
        ControlInput::new(kind.into(), effort, elevator),
    ))
}

/// State derivative of the nominal aircraft. States are ordered
/// `[x_D, V_N, V_D, theta, q]`.
///
/// # Safety
/// `state` points to 5 readable and `rates` to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ftc_dynamics(
    state: *const f64,
    kind: FtcEffort,
    effort: f64,
    elevator: f64,
    wind_north: f64,
    wind_down: f64,
    rates: *mut f64,
) -> FtcStatus {
    guard(|| {
        if rates.is_null() {
            return fail(FtcStatus::NullPointer, "rates is null");
        }
        let (s, u) = match plant_inputs(state, effort, elevator, kind) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let wind = WindVelocity {
            north: wind_north,
            down: wind_down,
        };
        match dynamics(&s, &u, wind, &AircraftParams::default()) {
            Ok(d) => {
                std::ptr::copy_nonoverlapping(d.to_array().as_ptr(), rates, 5);
                FtcStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// One RK4 step of `dt` seconds with inputs and wind held. `next` may alias
/// `state`.
///
/// # Safety
/// `state` points to 5 readable and `next` to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ftc_plant_step(
    state: *const f64,
    kind: FtcEffort,
    effort: f64,
    elevator: f64,
    wind_north: f64,
    wind_down: f64,
    dt: f64,
    next: *mut f64,
) -> FtcStatus {
    guard(|| {
        if next.is_null() {
            return fail(FtcStatus::NullPointer, "next is null");
        }
        let (s, u) = match plant_inputs(state, effort, elevator, kind) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let wind = WindVelocity {
            north: wind_north,
            down: wind_down,
        };
        match integrate_step(&s, &u, wind, &AircraftParams::default(), dt) {
            Ok(n) => {
                std::ptr::copy_nonoverlapping(n.to_array().as_ptr(), next, 5);
                FtcStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
