//! Closed-loop scenarios: plant, sensors, filter, controller and fault
//! injection stepped at 100 Hz, with CSV logging and summaries.

pub mod config;
pub mod plot;
pub mod record;
pub mod reference;
pub mod summary;
pub mod validate;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use config::{ControllerKind, FaultSchedule, FdiConfig, ScenarioConfig, Waypoint, SCHEMA_VERSION};
pub use record::{read_csv, write_csv, SimRecord, CSV_COLUMNS};
pub use reference::{Phase, PhaseKind, Reference};
pub use summary::{summarize, write_summary, ScenarioSummary};

use crate::error::{Error, Result};
use crate::fdi::{fault_logic, ukf_predict, ukf_update, FilterNoise, FilterState, FILTER_DT};
use crate::flight_model::dynamics::delivered_thrust;
use crate::flight_model::trim::solve_trim;
use crate::flight_model::{integrate_step, max_thrust, AircraftParams, ControlInput, EffortKind, LongitudinalState};
use crate::nmpc::{FaultInfo, InitialCondition, NmpcConfig, NmpcController, SolveStatus};
use crate::pid::{pid_step, PidGains, PidReference, PidState};
use crate::wind::{wind_sample, WindState};

/// Plant, sensor and filter step [s].
pub const PLANT_DT: f64 = FILTER_DT;

/// Thrust the plant delivers for `commanded` thrust once the fault schedule
/// is applied. Only the plant sees this value.
pub fn inject_fault(commanded: f64, schedule: Option<FaultSchedule>, t: f64) -> f64 {
    match schedule {
        Some(f) if t >= f.time => commanded * f.multiplier,
        _ => commanded,
    }
}

/// What a controller may see: sensor values and the filter output.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub t: f64,
    /// Measured down position [m].
    pub x_d: f64,
    /// Measured pitch rate [rad/s].
    pub q: f64,
    pub filter: FilterState,
    /// Command currently held by the actuators.
    pub current: ControlInput,
}

impl Observation {
    /// Estimated flight state: filtered velocities and attitude, measured
    /// position and pitch rate.
    pub fn state(&self) -> LongitudinalState {
        LongitudinalState {
            x_d: self.x_d,
            v_n: self.filter.mean[0],
            v_d: self.filter.mean[1],
            theta: self.filter.mean[2],
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub input: ControlInput,
    /// Thrust limit the command was computed under.
    pub applied_bound: Option<f64>,
    pub solver: Option<(SolveStatus, usize)>,
}

pub trait ControlLaw {
    /// Time between updates [s]; a multiple of the plant step.
    fn period(&self) -> f64;
    fn update(&mut self, obs: &Observation, reference: &Reference) -> Result<Command>;
}

pub struct PidLaw {
    pub gains: PidGains,
    state: PidState,
}

impl PidLaw {
    pub fn new(gains: PidGains) -> Self {
        PidLaw {
            gains,
            state: PidState::default(),
        }
    }
}

impl ControlLaw for PidLaw {
    fn period(&self) -> f64 {
        PLANT_DT
    }

    fn update(&mut self, obs: &Observation, reference: &Reference) -> Result<Command> {
        let r = reference.at(obs.t);
        let demand = PidReference {
            altitude: r.altitude,
            airspeed: r.airspeed,
        };
        let (input, state) = pid_step(&obs.state(), demand, &self.gains, self.state, PLANT_DT)?;
        self.state = state;
        Ok(Command {
            input,
            applied_bound: None,
            solver: None,
        })
    }
}

pub struct NmpcLaw {
    pub controller: NmpcController,
    /// Feed the fault flag and thrust bound to the solver.
    pub reconfigure: bool,
    params: AircraftParams,
}

impl NmpcLaw {
    pub fn new(config: NmpcConfig, reconfigure: bool, params: AircraftParams) -> Result<Self> {
        Ok(NmpcLaw {
            controller: NmpcController::new(config)?,
            reconfigure,
            params,
        })
    }
}

impl ControlLaw for NmpcLaw {
    fn period(&self) -> f64 {
        self.controller.config.control_period
    }

    fn update(&mut self, obs: &Observation, reference: &Reference) -> Result<Command> {
        let initial = InitialCondition {
            state: obs.state(),
            effort: obs.current.effort(),
            elevator: obs.current.elevator(),
        };
        let fault = self.reconfigure.then(|| FaultInfo {
            flag: obs.filter.fault_flag,
            bound: obs.filter.thrust_bound.unwrap_or(f64::INFINITY),
        });
        let applied_bound = match self.controller.config.variant {
            EffortKind::Thrust => Some(crate::nmpc::thrust_upper_bound(
                initial.state.airspeed(),
                fault,
                &self.params,
            )),
            EffortKind::Throttle => None,
        };
        let params = self.params.clone();
        let (input, sol) = self
            .controller
            .step(obs.t, initial, &|t| reference.at(t), fault, &params)?;
        if sol.status != SolveStatus::Converged {
            // Iteration-cap solves are routine under faults; infeasible ones are not.
            let level = if sol.status == SolveStatus::Infeasible {
                log::Level::Warn
            } else {
                log::Level::Debug
            };
            log::log!(
                level,
                "t={:.2}: NMPC {:?} after {} iterations (defect {:.2e}); applying best effort",
                obs.t,
                sol.status,
                sol.iterations,
                sol.constraint_violation
            );
        }
        Ok(Command {
            input,
            applied_bound,
            solver: Some((sol.status, sol.iterations)),
        })
    }
}

/// The control law a configuration asks for.
pub fn build_law(config: &ScenarioConfig, params: &AircraftParams) -> Result<Box<dyn ControlLaw>> {
    Ok(match config.controller {
        ControllerKind::Pid => Box::new(PidLaw::new(config.pid.clone())),
        ControllerKind::NmpcThrottle => Box::new(NmpcLaw::new(config.nmpc_config(), false, params.clone())?),
        ControllerKind::NmpcThrustFtc => Box::new(NmpcLaw::new(config.nmpc_config(), true, params.clone())?),
    })
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub records: Vec<SimRecord>,
    pub summary: ScenarioSummary,
}

/// Run a configured scenario with its own controller.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimOutput> {
    config.validate()?;
    let params = AircraftParams::default();
    let mut law = build_law(config, &params)?;
    run_with_law(config, law.as_mut(), &params)
}

fn steps_per(period: f64) -> Result<usize> {
    let n = (period / PLANT_DT).round();
    if n < 1.0 || (n * PLANT_DT - period).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "control period {period} s is not a multiple of the {PLANT_DT} s plant step"
        )));
    }
    Ok(n as usize)
}

/// Commanded thrust at `airspeed`, limited to what the engines can give.
fn commanded_thrust(input: &ControlInput, airspeed: f64, params: &AircraftParams) -> f64 {
    match *input {
        ControlInput::Thrust { thrust, .. } => thrust.clamp(0.0, max_thrust(airspeed, params)),
        ControlInput::Throttle { throttle, elevator } => {
            let clamped = ControlInput::Throttle {
                throttle: throttle.clamp(0.0, 1.0),
                elevator,
            };
            delivered_thrust(&clamped, airspeed, params)
        }
    }
}

/// Closed loop with a caller-supplied controller. Each plant step: wind,
/// plant integration with the faulty thrust, noisy measurement, filter
/// predict and update, fault logic, and a controller update every period.
pub fn run_with_law(config: &ScenarioConfig, law: &mut dyn ControlLaw, params: &AircraftParams) -> Result<SimOutput> {
    let reference = Reference::new(config.reference.clone());
    let every = steps_per(law.period())?;
    let steps = (config.duration / PLANT_DT).round() as usize;
    let kind = match config.controller {
        ControllerKind::NmpcThrustFtc => EffortKind::Thrust,
        _ => EffortKind::Throttle,
    };
    let start = reference.at(0.0);
    let trim = solve_trim(start.airspeed, 0.0, kind, -start.altitude, params)?;

    let mut wind_cfg = config.wind.clone();
    wind_cfg.rng_seed = config.seed;
    let mut wind_state = WindState::new(&wind_cfg);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(1);
    let noise = FilterNoise::default();
    let sensor_std = noise.measurement_std();
    let fdi = config.fdi;

    let mut x = trim.state;
    let mut filter = FilterState::default();
    let mut obs = Observation {
        t: 0.0,
        x_d: x.x_d,
        q: x.q,
        filter,
        current: trim.input(),
    };
    let mut cmd = law.update(&obs, &reference)?;
    let mut records = Vec::with_capacity(steps + 1);
    let mut last_wind = crate::flight_model::WindVelocity::CALM;

    for k in 0..=steps {
        let t = k as f64 * PLANT_DT;
        let r = reference.at(t);
        let airspeed_hat = filter.mean[0].hypot(filter.mean[1]);
        let thrust_cmd = commanded_thrust(&cmd.input, airspeed_hat, params);
        let thrust_true = inject_fault(commanded_thrust(&cmd.input, x.airspeed(), params), config.fault, t);
        records.push(SimRecord {
            t,
            x_d: x.x_d,
            altitude: x.altitude(),
            v_n: x.v_n,
            v_d: x.v_d,
            airspeed: x.airspeed(),
            theta: x.theta,
            q: x.q,
            altitude_ref: r.altitude,
            airspeed_ref: r.airspeed,
            v_d_ref: r.v_d,
            effort_cmd: cmd.input.effort(),
            elevator_cmd: cmd.input.elevator(),
            thrust_cmd,
            thrust_true,
            wind_north: last_wind.north,
            wind_down: last_wind.down,
            vn_hat: filter.mean[0],
            vd_hat: filter.mean[1],
            theta_hat: filter.mean[2],
            thrust_hat: filter.mean[3],
            var_vn: filter.cov[(0, 0)],
            var_vd: filter.cov[(1, 1)],
            var_theta: filter.cov[(2, 2)],
            var_thrust: filter.cov[(3, 3)],
            innov_vn: filter.innovation[0],
            innov_vd: filter.innovation[1],
            innov_theta: filter.innovation[2],
            fault_flag: u8::from(filter.fault_flag),
            filter_bound: filter.thrust_bound.unwrap_or(f64::NAN),
            applied_bound: cmd.applied_bound.unwrap_or(f64::NAN),
            solver_status: cmd.solver.map_or(-1, |(s, _)| s.code() as i8),
            solver_iterations: cmd.solver.map_or(0, |(_, n)| n as u32),
        });
        if k == steps {
            break;
        }

        let (wind, ws) = wind_sample(t, x.airspeed(), &wind_cfg, wind_state);
        wind_state = ws;
        last_wind = wind;
        let plant_input = ControlInput::Thrust {
            thrust: thrust_true,
            elevator: cmd.input.elevator(),
        };
        let q_held = x.q;
        x = integrate_step(&x, &plant_input, wind, params, PLANT_DT)?;

        let mut z = Vector3::new(x.v_n, x.v_d, x.theta);
        if config.measurement_noise {
            for (i, s) in sensor_std.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                z[i] += s * e;
            }
        }
        filter = ukf_predict(&filter, &cmd.input, q_held, &noise, fdi.scaling, params, PLANT_DT)?;
        filter = ukf_update(&filter, &z, &noise, fdi.scaling)?;
        filter = fault_logic(&filter, thrust_cmd, fdi.thresholds);

        if (k + 1) % every == 0 {
            obs = Observation {
                t: t + PLANT_DT,
                x_d: x.x_d,
                q: x.q,
                filter,
                current: cmd.input,
            };
            cmd = law.update(&obs, &reference)?;
        }
    }
    let nmpc = matches!(
        config.controller,
        ControllerKind::NmpcThrottle | ControllerKind::NmpcThrustFtc
    )
    .then(|| config.nmpc_config());
    let summary = summarize(config, &reference, nmpc.as_ref(), &records, params);
    Ok(SimOutput { records, summary })
}
