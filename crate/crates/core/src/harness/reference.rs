use serde::{Deserialize, Serialize};

use super::config::Waypoint;
use crate::nmpc::RefPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Level,
    Climb,
    Descent,
}

/// One reference segment between consecutive waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    pub kind: PhaseKind,
    pub altitude_start: f64,
    pub altitude_end: f64,
}

/// Piecewise-linear altitude and airspeed demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    waypoints: Vec<Waypoint>,
}

impl Reference {
    /// `waypoints` must be non-empty with increasing times.
    pub fn new(waypoints: Vec<Waypoint>) -> Self {
        assert!(!waypoints.is_empty(), "reference needs a waypoint");
        Reference { waypoints }
    }

    pub fn at(&self, t: f64) -> RefPoint {
        let w = &self.waypoints;
        let first = w[0];
        let last = w[w.len() - 1];
        if t <= first.time {
            return RefPoint {
                altitude: first.altitude,
                airspeed: first.airspeed,
                v_d: 0.0,
            };
        }
        if t >= last.time {
            return RefPoint {
                altitude: last.altitude,
                airspeed: last.airspeed,
                v_d: 0.0,
            };
        }
        let i = w.partition_point(|p| p.time <= t) - 1;
        let (a, b) = (w[i], w[i + 1]);
        let s = (t - a.time) / (b.time - a.time);
        let climb_rate = (b.altitude - a.altitude) / (b.time - a.time);
        RefPoint {
            altitude: a.altitude + s * (b.altitude - a.altitude),
            airspeed: a.airspeed + s * (b.airspeed - a.airspeed),
            v_d: -climb_rate,
        }
    }

    pub fn phases(&self) -> Vec<Phase> {
        self.waypoints
            .windows(2)
            .map(|p| {
                let kind = if p[1].altitude > p[0].altitude {
                    PhaseKind::Climb
                } else if p[1].altitude < p[0].altitude {
                    PhaseKind::Descent
                } else {
                    PhaseKind::Level
                };
                Phase {
                    start: p[0].time,
                    end: p[1].time,
                    kind,
                    altitude_start: p[0].altitude,
                    altitude_end: p[1].altitude,
                }
            })
            .collect()
    }

    /// The longest level segment at the highest demanded altitude.
    pub fn cruise(&self) -> Option<Phase> {
        let top = self
            .waypoints
            .iter()
            .map(|w| w.altitude)
            .fold(f64::NEG_INFINITY, f64::max);
        self.phases()
            .into_iter()
            .filter(|p| p.kind == PhaseKind::Level && p.altitude_start == top)
            .max_by(|a, b| (a.end - a.start).total_cmp(&(b.end - b.start)))
    }

    /// The last descending segment.
    pub fn final_descent(&self) -> Option<Phase> {
        self.phases().into_iter().rev().find(|p| p.kind == PhaseKind::Descent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::default_reference;

    #[test]
    fn default_profile() {
        let r = Reference::new(default_reference());
        assert_eq!(r.at(-1.0).altitude, 50.0);
        assert_eq!(r.at(5.0).v_d, 0.0);
        let climb = r.at(35.0);
        assert!((climb.altitude - 100.0).abs() < 1e-12);
        assert!((climb.v_d + 2.0).abs() < 1e-12);
        assert!((r.at(145.0).v_d - 2.0).abs() < 1e-12);
        assert_eq!(r.at(500.0).altitude, 50.0);
        let cruise = r.cruise().unwrap();
        assert_eq!((cruise.start, cruise.end), (60.0, 120.0));
        let descent = r.final_descent().unwrap();
        assert_eq!((descent.start, descent.end), (120.0, 170.0));
        assert_eq!(r.phases().len(), 5);
    }
}
