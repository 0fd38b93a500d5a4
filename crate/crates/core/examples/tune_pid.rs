//! Grid search for the PID defaults: +50 m step from trim, wind off.
//! Scores each candidate by settling time into ±2 m and altitude RMS.

use ftc_core::flight_model::trim::solve_trim;
use ftc_core::flight_model::{integrate_step, AircraftParams, EffortKind, WindVelocity};
use ftc_core::pid::{pid_step, PidGains, PidReference, PidState};

fn step_response(g: &PidGains, p: &AircraftParams) -> Option<(f64, f64)> {
    let trim = solve_trim(20.0, 0.0, EffortKind::Throttle, -100.0, p).ok()?;
    let mut x = trim.state;
    let mut s = PidState::default();
    let r = PidReference {
        altitude: 150.0,
        airspeed: 20.0,
    };
    let dt = 0.01;
    let mut last_outside = 0.0;
    let mut sq = 0.0;
    let n = 9000;
    for k in 0..n {
        let t = k as f64 * dt;
        let (u, next) = pid_step(&x, r, g, s, dt).ok()?;
        s = next;
        x = integrate_step(&x, &u, WindVelocity::CALM, p, dt).ok()?;
        let e = x.altitude() - r.altitude;
        sq += e * e;
        if e.abs() > 2.0 {
            last_outside = t;
        }
    }
    Some((last_outside, (sq / n as f64).sqrt()))
}

fn main() {
    let p = AircraftParams::default();
    let base = PidGains::default();
    let mut best: Option<(f64, PidGains)> = None;
    for kp_h in [0.01, 0.02, 0.04] {
        for kd_h in [0.0, 0.02, 0.04, 0.08] {
            for kp_t in [1.0, 2.0, 4.0] {
                for kd_t in [0.2, 0.6, 1.0] {
                    let mut g = base.clone();
                    g.height.kp = kp_h;
                    g.height.kd = kd_h;
                    g.pitch.kp = kp_t;
                    g.pitch.kd = kd_t;
                    if let Some((settle, rms)) = step_response(&g, &p) {
                        let score = settle + rms;
                        println!(
                            "h.kp={kp_h} h.kd={kd_h} th.kp={kp_t} th.kd={kd_t}: settle {settle:.2} s, rms {rms:.2} m"
                        );
                        if best.as_ref().map_or(true, |(b, _)| score < *b) {
                            best = Some((score, g));
                        }
                    }
                }
            }
        }
    }
    if let Some((score, g)) = best {
        println!("best score {score:.2}: {:?}", g);
        println!("defaults: {:?}", step_response(&base, &p));
    }
}
