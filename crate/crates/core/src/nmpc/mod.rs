//! Receding-horizon NMPC on an LGL collocation grid.

pub mod config;
pub mod ocp;
pub mod sqp;

use std::sync::Arc;

pub use config::{Bounds, HessianMode, NmpcConfig, Weights};
pub use ocp::{build_ocp, InitialCondition, OcpProblem, RefPoint, Transcription};
pub use sqp::{solve_ocp, OcpSolution, SolveStatus};

use crate::error::Result;
use crate::flight_model::{max_thrust, AircraftParams, ControlInput, EffortKind};

/// Fault-detection output consumed by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultInfo {
    pub flag: bool,
    /// Thrust limit to impose while the flag is set [N].
    pub bound: f64,
}

/// Upper thrust limit for the next solve: the reconfigured bound after a
/// detected fault, otherwise what full throttle delivers at this airspeed.
pub fn thrust_upper_bound(airspeed: f64, fault: Option<FaultInfo>, params: &AircraftParams) -> f64 {
    match fault {
        Some(f) if f.flag => f.bound.max(0.0),
        _ => max_thrust(airspeed, params),
    }
}

/// One control update: build the problem at `t0`, solve it warm-started from
/// `warm_start`, and return the control to hold until the next update.
#[allow(clippy::too_many_arguments)]
pub fn nmpc_step(
    tr: &Arc<Transcription>,
    t0: f64,
    initial: InitialCondition,
    reference: &dyn Fn(f64) -> RefPoint,
    config: &NmpcConfig,
    fault: Option<FaultInfo>,
    warm_start: Option<&OcpSolution>,
    params: &AircraftParams,
) -> Result<(ControlInput, OcpSolution)> {
    let horizon = tr.grid.map_to_horizon(t0, t0 + config.horizon)?;
    let refs = horizon.times.iter().map(|&t| reference(t)).collect();
    let bound = match config.variant {
        EffortKind::Thrust => Some(thrust_upper_bound(initial.state.airspeed(), fault, params)),
        EffortKind::Throttle => None,
    };
    let problem = build_ocp(tr.clone(), t0, initial, refs, config, bound, params)?;
    let solution = solve_ocp(&problem, warm_start)?;
    log::debug!(
        "nmpc t={t0:.2} status={:?} iter={} kkt={:.3e} defect={:.3e} cost={:.4e}",
        solution.status,
        solution.iterations,
        solution.kkt_residual,
        solution.constraint_violation,
        solution.cost
    );
    Ok((solution.first_input, solution))
}

/// Controller that keeps its grid and last solution between updates.
#[derive(Debug, Clone)]
pub struct NmpcController {
    pub config: NmpcConfig,
    tr: Arc<Transcription>,
    last: Option<OcpSolution>,
}

impl NmpcController {
    pub fn new(config: NmpcConfig) -> Result<Self> {
        config.validate()?;
        let tr = Transcription::new(config.degree)?;
        Ok(NmpcController { config, tr, last: None })
    }

    pub fn transcription(&self) -> &Arc<Transcription> {
        &self.tr
    }

    pub fn last_solution(&self) -> Option<&OcpSolution> {
        self.last.as_ref()
    }

    pub fn step(
        &mut self,
        t0: f64,
        initial: InitialCondition,
        reference: &dyn Fn(f64) -> RefPoint,
        fault: Option<FaultInfo>,
        params: &AircraftParams,
    ) -> Result<(ControlInput, &OcpSolution)> {
        let (u, sol) = nmpc_step(
            &self.tr,
            t0,
            initial,
            reference,
            &self.config,
            fault,
            self.last.as_ref(),
            params,
        )?;
        self.last = Some(sol);
        Ok((u, self.last.as_ref().expect("just stored")))
    }
}
