use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdi::{FaultThresholds, UtScaling};
use crate::nmpc::{HessianMode, NmpcConfig};
use crate::pid::PidGains;
use crate::wind::WindConfig;

/// Version of the scenario file layout understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Collocation degree used by the scenario presets.
pub const PRESET_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    /// Cascaded PID on throttle and elevator.
    Pid,
    /// NMPC commanding throttle, without reconfiguration.
    NmpcThrottle,
    /// NMPC commanding thrust, with the fault-reconfigured thrust bound.
    NmpcThrustFtc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::NmpcThrottle => "nmpc-throttle",
            ControllerKind::NmpcThrustFtc => "nmpc-thrust-ftc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pid" => Ok(ControllerKind::Pid),
            "nmpc-throttle" => Ok(ControllerKind::NmpcThrottle),
            "nmpc-thrust-ftc" => Ok(ControllerKind::NmpcThrustFtc),
            other => Err(Error::Config(format!(
                "unknown controller {other:?}; expected pid, nmpc-throttle or nmpc-thrust-ftc"
            ))),
        }
    }
}

/// Reference waypoint; altitude and airspeed are linear between waypoints and
/// held after the last one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub altitude: f64,
    pub airspeed: f64,
}

/// Engine fault: plant thrust is multiplied by `multiplier` from `time` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSchedule {
    pub time: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdiConfig {
    pub scaling: UtScaling,
    pub thresholds: FaultThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Preset number this configuration was derived from, 0 for custom runs.
    #[serde(default)]
    pub scenario: u32,
    pub controller: ControllerKind,
    /// Simulated time [s].
    pub duration: f64,
    /// Seeds the wind and the measurement noise; overrides `wind.rng_seed`.
    #[serde(default)]
    pub seed: u64,
    pub reference: Vec<Waypoint>,
    #[serde(default)]
    pub fault: Option<FaultSchedule>,
    #[serde(default)]
    pub wind: WindConfig,
    /// Add measurement noise drawn from the filter's `R` diagonal.
    #[serde(default = "yes")]
    pub measurement_noise: bool,
    /// Controller settings; defaults follow the controller kind.
    #[serde(default)]
    pub nmpc: Option<NmpcConfig>,
    #[serde(default)]
    pub pid: PidGains,
    #[serde(default)]
    pub fdi: FdiConfig,
    /// Directory for the CSV and summary, when written.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

/// Hold 50 m for 10 s, climb at 2 m/s to 150 m, cruise for 60 s, descend at
/// 2 m/s to 50 m and hold, all at 20 m/s.
pub fn default_reference() -> Vec<Waypoint> {
    let wp = |time, altitude| Waypoint {
        time,
        altitude,
        airspeed: 20.0,
    };
    vec![
        wp(0.0, 50.0),
        wp(10.0, 50.0),
        wp(60.0, 150.0),
        wp(120.0, 150.0),
        wp(170.0, 50.0),
        wp(180.0, 50.0),
    ]
}

impl ScenarioConfig {
    /// Preset 1 (no fault), 2 (half thrust from 20 s) or 3 (30 % thrust from 30 s).
    pub fn preset(id: u32, controller: ControllerKind) -> Result<Self> {
        let fault = match id {
            1 => None,
            2 => Some(FaultSchedule {
                time: 20.0,
                multiplier: 0.5,
            }),
            3 => Some(FaultSchedule {
                time: 30.0,
                multiplier: 0.3,
            }),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario preset {other}; expected 1, 2 or 3"
                )))
            }
        };
        Ok(ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            scenario: id,
            controller,
            duration: 180.0,
            seed: 0,
            reference: default_reference(),
            fault,
            wind: WindConfig::default(),
            measurement_noise: true,
            nmpc: None,
            pid: PidGains::default(),
            fdi: FdiConfig::default(),
            output: None,
        })
    }

    /// NMPC settings in effect for this run.
    pub fn nmpc_config(&self) -> NmpcConfig {
        self.nmpc.clone().unwrap_or_else(|| {
            let base = match self.controller {
                ControllerKind::NmpcThrottle => NmpcConfig::throttle(),
                _ => NmpcConfig::thrust(),
            };
            NmpcConfig {
                degree: PRESET_DEGREE,
                hessian: HessianMode::GaussNewton,
                ..base
            }
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.reference.is_empty() {
            return Err(Error::Config("reference needs at least one waypoint".into()));
        }
        for pair in self.reference.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(Error::Config("reference waypoint times must increase".into()));
            }
        }
        for w in &self.reference {
            let ok = [w.time, w.altitude, w.airspeed].iter().all(|v| v.is_finite()) && w.airspeed > 0.0;
            if !ok {
                return Err(Error::Config(format!("invalid waypoint {w:?}")));
            }
        }
        if let Some(f) = self.fault {
            if !(0.0..=1.0).contains(&f.multiplier) || !f.time.is_finite() {
                return Err(Error::Config(format!(
                    "fault multiplier must lie in [0, 1] at a finite time, got {} at {}",
                    f.multiplier, f.time
                )));
            }
        }
        self.wind.validate()?;
        self.pid.validate()?;
        self.fdi.scaling.validate()?;
        let nmpc = self.nmpc_config();
        nmpc.validate()?;
        let expected = match self.controller {
            ControllerKind::NmpcThrottle => Some(crate::flight_model::EffortKind::Throttle),
            ControllerKind::NmpcThrustFtc => Some(crate::flight_model::EffortKind::Thrust),
            ControllerKind::Pid => None,
        };
        if let Some(kind) = expected {
            if nmpc.variant != kind {
                return Err(Error::Config(format!(
                    "controller {} needs an NMPC variant of {kind:?}",
                    self.controller.name()
                )));
            }
        }
        Ok(())
    }
}
