use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertical offset of both propeller hubs from the centre of gravity, body z
/// axis (positive down). The hubs sit above the c.g.; the value closes the
/// pitching-moment balance at the published 20 m/s trim point
/// (θ = -0.0040 rad, δe = -0.0603 rad, T = 27.7426 N). See
/// `trim::engine_offset_for_trim`, which recomputes it.
pub const ENGINE_Z_OFFSET: f64 = -0.312_236_767_239_418;

/// Physical constants of the twin-engine UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AircraftParams {
    pub wingspan: f64,
    pub chord: f64,
    pub wing_area: f64,
    pub mass: f64,
    pub prop_diameter: f64,
    pub stall_speed: f64,
    pub inertia_yy: f64,
    pub gravity: f64,
    pub air_density: f64,
    pub cl_q: f64,
    pub cl_de: f64,
    pub cm_q: f64,
    pub cm_de: f64,
    /// Engine hub positions relative to the c.g. in body axes [m].
    pub engine_positions: [[f64; 3]; 2],
}

impl Default for AircraftParams {
    fn default() -> Self {
        AircraftParams {
            wingspan: 5.5,
            chord: 0.55,
            wing_area: 3.0,
            mass: 36.8,
            prop_diameter: 0.4572,
            stall_speed: 12.0,
            inertia_yy: 18.0,
            gravity: 9.81,
            air_density: 1.225,
            cl_q: 7.8415,
            cl_de: 0.3099,
            cm_q: -14.3808,
            cm_de: -0.8143,
            engine_positions: [[0.0, -0.85, ENGINE_Z_OFFSET], [0.0, 0.85, ENGINE_Z_OFFSET]],
        }
    }
}

impl AircraftParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wingspan", self.wingspan),
            ("chord", self.chord),
            ("wing_area", self.wing_area),
            ("mass", self.mass),
            ("prop_diameter", self.prop_diameter),
            ("stall_speed", self.stall_speed),
            ("inertia_yy", self.inertia_yy),
            ("gravity", self.gravity),
            ("air_density", self.air_density),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        let derivs = [self.cl_q, self.cl_de, self.cm_q, self.cm_de];
        let coords = self.engine_positions.iter().flatten();
        if derivs.iter().chain(coords).any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "non-finite aerodynamic derivative or engine position".into(),
            ));
        }
        Ok(())
    }

    /// Combined pitching-moment arm of the two engines: the y-component of
    /// `Σ rᵢ × [F/2, 0, 0]` is `F · mean(rᵢ,z)`.
    pub fn engine_pitch_arm(&self) -> f64 {
        0.5 * (self.engine_positions[0][2] + self.engine_positions[1][2])
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_table() {
        let p = AircraftParams::default();
        assert_eq!(p.wingspan, 5.5);
        assert_eq!(p.chord, 0.55);
        assert_eq!(p.wing_area, 3.0);
        assert_eq!(p.mass, 36.8);
        assert_eq!(p.prop_diameter, 0.4572);
        assert_eq!(p.stall_speed, 12.0);
        assert_eq!(p.inertia_yy, 18.0);
        assert_eq!((p.cl_q, p.cl_de, p.cm_q, p.cm_de), (7.8415, 0.3099, -14.3808, -0.8143));
        p.validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_mass() {
        let p = AircraftParams {
            mass: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
