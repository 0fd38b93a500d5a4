//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the full closed-loop batches, so it takes a while on one core.
//! `FTC_ACCEPTANCE_SEEDS=n` shortens the seeded batches for a quick look;
//! `FTC_ACCEPTANCE_STRICT=1` turns any FAIL into a non-zero exit.

use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use ftc_core::fdi::{measurement_matrix, ukf_predict_with, ukf_update, FilterNoise, FilterState, UtScaling};
use ftc_core::flight_model::trim::{published, published_trim, solve_trim};
use ftc_core::flight_model::{dynamics, engine_force_moment, AircraftParams, ControlInput, EffortKind, WindVelocity};
use ftc_core::harness::record::write_csv_to;
use ftc_core::harness::{run_scenario, ControllerKind, ScenarioConfig, SimOutput};
use ftc_core::nmpc::{build_ocp, solve_ocp, InitialCondition, NmpcConfig, RefPoint, SolveStatus, Transcription};
use ftc_core::pseudospectral::lgl_grid;

const FULL_SEEDS: u64 = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn trim_thrust() -> Verdict {
    let p = AircraftParams::default();
    let (loads, dt) = timed(|| engine_force_moment(published::THROTTLE, published::AIRSPEED, &p));
    match loads {
        Ok(l) => {
            let rel = (l.force[0] - published::THRUST).abs() / published::THRUST;
            verdict(
                rel < 0.01 && dt < Duration::from_millis(1),
                format!("thrust {:.4} N, relative error {rel:.2e}, {dt:?}", l.force[0]),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn equilibrium() -> Verdict {
    let p = AircraftParams::default();
    let inputs = [
        ControlInput::Thrust {
            thrust: published::THRUST,
            elevator: published::ELEVATOR,
        },
        ControlInput::Throttle {
            throttle: published::THROTTLE,
            elevator: published::ELEVATOR,
        },
    ];
    let (worst, dt) = timed(|| {
        let s = published_trim(&p);
        inputs
            .iter()
            .map(|u| dynamics(&s, u, WindVelocity::CALM, &p).map(|d| d.max_abs()))
            .collect::<Result<Vec<_>, _>>()
    });
    match worst {
        Ok(w) => verdict(
            w.iter().all(|&v| v < 0.05) && dt < Duration::from_millis(1),
            format!("max |xdot| thrust {:.2e}, throttle {:.2e}, {dt:?}", w[0], w[1]),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn spectral() -> Verdict {
    let n = 50;
    let (errs, dt) = timed(|| {
        let g = lgl_grid(n)?;
        let x = g.nodes();
        let d = g.diff_matrix();
        let mut diff: f64 = 0.0;
        for k in 1..=n {
            let f = nalgebra::DVector::from_iterator(n + 1, x.iter().map(|&xi| xi.powi(k as i32)));
            let df = d * f;
            let exact: Vec<f64> = x.iter().map(|&xi| k as f64 * xi.powi(k as i32 - 1)).collect();
            let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in df.iter().zip(&exact) {
                diff = diff.max((a - b).abs() / scale);
            }
        }
        let h = g.map_to_horizon(0.0, 5.0)?;
        let mut quad: f64 = 0.0;
        for k in 0..=(2 * n - 1) {
            let samples: Vec<f64> = h.times.iter().map(|t| (t / 5.0).powi(k as i32)).collect();
            let exact = 5.0 / (k as f64 + 1.0);
            quad = quad.max(((h.integrate(&g, &samples) - exact) / exact).abs());
        }
        Ok::<_, ftc_core::Error>((diff, quad))
    });
    match errs {
        Ok((diff, quad)) => verdict(
            diff < 1e-8 && quad < 1e-10 && dt < Duration::from_secs(1),
            format!("N={n}: derivative {diff:.1e}, quadrature {quad:.1e}, {dt:?}"),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn fixed_point() -> Verdict {
    let p = AircraftParams::default();
    let degree = 50;
    let (out, dt) = timed(|| {
        let trim = solve_trim(20.0, 0.0, EffortKind::Thrust, -100.0, &p)?;
        let config = NmpcConfig {
            degree,
            ..NmpcConfig::thrust()
        };
        let reference = vec![
            RefPoint {
                altitude: 100.0,
                airspeed: 20.0,
                v_d: 0.0,
            };
            degree + 1
        ];
        let ic = InitialCondition {
            state: trim.state,
            effort: trim.effort,
            elevator: trim.elevator,
        };
        let ocp = build_ocp(Transcription::new(degree)?, 0.0, ic, reference, &config, None, &p)?;
        let s = solve_ocp(&ocp, None)?;
        Ok::<_, ftc_core::Error>((s, trim))
    });
    match out {
        Ok((s, trim)) => {
            let du = (s.first_input.effort() - trim.effort)
                .abs()
                .max((s.first_input.elevator() - trim.elevator).abs());
            verdict(
                s.status == SolveStatus::Converged && s.iterations <= 2 && du < 1e-3,
                format!(
                    "N={degree}: {:?} after {} iterations, first input off trim by {du:.1e}, {dt:?}",
                    s.status, s.iterations
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn ukf_oracle() -> Verdict {
    let a = Matrix4::new(
        0.99, 0.01, 0.0, 0.002, //
        -0.01, 0.98, 0.05, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let (worst, dt) = timed(|| {
        let h = measurement_matrix();
        let noise = FilterNoise::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ukf = FilterState::default();
        let (mut m, mut p) = (ukf.mean, ukf.cov);
        let mut truth = Vector4::new(20.5, 0.3, 0.01, 22.0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            truth = a * truth;
            let z = h * truth
                + Vector3::from_fn(|i, _| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    noise.r[(i, i)].sqrt() * e
                });
            ukf = ukf_predict_with(&ukf, &noise, UtScaling::default(), |x| a * x)?;
            ukf = ukf_update(&ukf, &z, &noise, UtScaling::default())?;
            m = a * m;
            p = a * p * a.transpose() + noise.q;
            let s = h * p * h.transpose() + noise.r;
            let k = p * h.transpose() * s.try_inverse().ok_or(ftc_core::Error::Singular("innovation"))?;
            m += k * (z - h * m);
            p = (Matrix4::identity() - k * h) * p;
            p = (p + p.transpose()) * 0.5;
            worst = worst.max((ukf.mean - m).amax()).max((ukf.cov - p).amax());
        }
        Ok::<_, ftc_core::Error>(worst)
    });
    match worst {
        Ok(w) => verdict(
            w < 1e-8 && dt < Duration::from_secs(1),
            format!("100 steps, largest mean/covariance gap {w:.1e}, {dt:?}"),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn batch(scenario: u32, seeds: u64) -> Vec<Result<SimOutput, String>> {
    (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig {
                seed,
                ..ScenarioConfig::preset(scenario, ControllerKind::NmpcThrustFtc).map_err(|e| e.to_string())?
            };
            run_scenario(&cfg).map_err(|e| format!("seed {seed}: {e}"))
        })
        .collect()
}

fn split(runs: &[Result<SimOutput, String>]) -> (Vec<&SimOutput>, Vec<&String>) {
    let ok = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let err = runs.iter().filter_map(|r| r.as_ref().err()).collect();
    (ok, err)
}

fn seeds_note(seeds: u64) -> String {
    if seeds < FULL_SEEDS {
        format!(" [only {seeds} of {FULL_SEEDS} seeds]")
    } else {
        String::new()
    }
}

fn scenario1(runs: &[Result<SimOutput, String>], seeds: u64) -> Verdict {
    let (ok, err) = split(runs);
    let flagged = ok.iter().filter(|o| o.summary.detection_time.is_some()).count();
    let worst_rms = ok.iter().filter_map(|o| o.summary.cruise_rms).fold(0.0f64, f64::max);
    let violations: usize = ok.iter().map(|o| o.summary.control_violations).sum();
    verdict(
        err.is_empty() && flagged == 0 && worst_rms < 5.0 && violations == 0 && seeds >= FULL_SEEDS,
        format!(
            "{} runs, {} failed, {flagged} flagged, worst cruise RMS {worst_rms:.2} m, {violations} control violations{}",
            ok.len(),
            err.len(),
            seeds_note(seeds)
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn scenario2(runs: &[Result<SimOutput, String>], seeds: u64) -> Verdict {
    let (ok, err) = split(runs);
    let latencies: Vec<f64> = ok.iter().filter_map(|o| o.summary.detection_latency).collect();
    let med = median(latencies.clone());
    let exceed: usize = ok.iter().map(|o| o.summary.bound_exceedances).sum();
    let min_vt = ok.iter().map(|o| o.summary.min_airspeed).fold(f64::INFINITY, f64::min);
    let all_flagged = latencies.len() == ok.len();
    verdict(
        err.is_empty() && all_flagged && med <= 5.0 && exceed == 0 && min_vt > 12.0 && seeds >= FULL_SEEDS,
        format!(
            "{}/{} runs flagged, median latency {med:.2} s, {exceed} bound exceedances, min V_T {min_vt:.2} m/s{}",
            latencies.len(),
            runs.len(),
            seeds_note(seeds)
        ),
    )
}

fn scenario3(run: &Result<SimOutput, String>) -> Verdict {
    match run {
        Ok(o) => {
            let s = &o.summary;
            let cruise = s.cruise_max_altitude.unwrap_or(f64::NAN);
            let reference = s.reference_cruise_altitude.unwrap_or(f64::NAN);
            let end = s.descent_end_error.unwrap_or(f64::NAN);
            verdict(
                cruise < reference && end < 5.0 && s.min_airspeed > 12.0,
                format!(
                    "max cruise altitude {cruise:.1} m (reference {reference:.0} m), descent-end error {end:.1} m, min V_T {:.2} m/s",
                    s.min_airspeed
                ),
            )
        }
        Err(e) => verdict(false, e.clone()),
    }
}

fn v_d_saturation(s2: &[Result<SimOutput, String>], s3: &Result<SimOutput, String>) -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, runs) in [("scenario 2", s2), ("scenario 3", std::slice::from_ref(s3))] {
        let (ok, err) = split(runs);
        let excursions: usize = ok.iter().map(|o| o.summary.v_d_excursions_post_fault).sum();
        let runs_out = ok.iter().filter(|o| o.summary.v_d_excursions_post_fault > 0).count();
        let touching = ok.iter().filter(|o| o.summary.v_d_touches_post_fault > 0).count();
        let lo = ok
            .iter()
            .filter_map(|o| o.summary.v_d_min_post_fault)
            .fold(f64::INFINITY, f64::min);
        let hi = ok
            .iter()
            .filter_map(|o| o.summary.v_d_max_post_fault)
            .fold(f64::NEG_INFINITY, f64::max);
        pass &= err.is_empty() && excursions == 0 && touching == ok.len();
        detail.push(format!(
            "{name}: V_D in [{lo:.2}, {hi:.2}], {excursions} samples outside in {runs_out}/{} runs, touching in {touching}/{}",
            ok.len(),
            ok.len()
        ));
    }
    verdict(pass, detail.join("; "))
}

fn csv_bytes(o: &SimOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_to(&o.records, &mut buf).expect("in-memory CSV");
    buf
}

fn determinism(first: Option<&SimOutput>) -> Verdict {
    let Some(first) = first else {
        return verdict(false, "no reference run".into());
    };
    let cfg = ScenarioConfig::preset(2, ControllerKind::NmpcThrustFtc).expect("preset");
    match run_scenario(&cfg) {
        Ok(second) => {
            let (a, b) = (csv_bytes(first), csv_bytes(&second));
            verdict(
                a == b,
                format!(
                    "scenario 2 seed 0 twice: {} vs {} bytes, identical {}",
                    a.len(),
                    b.len(),
                    a == b
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn main() {
    let seeds: u64 = std::env::var("FTC_ACCEPTANCE_SEEDS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(FULL_SEEDS)
        .max(1);
    let strict = std::env::var_os("FTC_ACCEPTANCE_STRICT").is_some();
    let start = Instant::now();

    let mut verdicts = vec![trim_thrust(), equilibrium(), spectral(), fixed_point(), ukf_oracle()];
    let s1 = batch(1, seeds);
    verdicts.push(scenario1(&s1, seeds));
    let s2 = batch(2, seeds);
    verdicts.push(scenario2(&s2, seeds));
    let s3 = batch(3, 1).pop().expect("one run");
    verdicts.push(scenario3(&s3));
    verdicts.push(v_d_saturation(&s2, &s3));
    verdicts.push(determinism(s2.first().and_then(|r| r.as_ref().ok())));

    let mut failed = 0;
    for (i, v) in verdicts.iter().enumerate() {
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2}: {}  {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria pass ({:.0} s)",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
