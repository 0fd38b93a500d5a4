use ftc_core::flight_model::AircraftParams;
use ftc_core::harness::record::write_csv_to;
use ftc_core::harness::{
    read_csv, run_scenario, run_with_law, write_csv, Command, ControlLaw, ControllerKind, FaultSchedule, Observation,
    PidLaw, Reference, ScenarioConfig, PLANT_DT,
};
use ftc_core::Result;

fn short(id: u32, controller: ControllerKind, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        duration,
        ..ScenarioConfig::preset(id, controller).unwrap()
    }
}

fn csv_bytes(cfg: &ScenarioConfig) -> Vec<u8> {
    let out = run_scenario(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv_to(&out.records, &mut buf).unwrap();
    buf
}

#[test]
fn same_seed_same_bytes() {
    let cfg = short(2, ControllerKind::Pid, 30.0);
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
    let other = ScenarioConfig { seed: 1, ..cfg.clone() };
    assert_ne!(csv_bytes(&cfg), csv_bytes(&other));
}

#[test]
fn nmpc_run_is_deterministic() {
    let cfg = short(2, ControllerKind::NmpcThrustFtc, 3.0);
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
}

#[test]
fn csv_file_round_trip() {
    let out = run_scenario(&short(1, ControllerKind::Pid, 2.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_csv(&out.records, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), 201);
    assert!(out.records.iter().zip(&back).all(|(a, b)| a.bit_eq(b)));
    // One row per plant step.
    for (k, r) in back.iter().enumerate() {
        assert!((r.t - k as f64 * PLANT_DT).abs() < 1e-9);
    }
}

/// Controller stub that holds a constant command and logs what it is shown.
struct Recorder {
    hold: Option<Command>,
    seen: Vec<Observation>,
}

impl ControlLaw for Recorder {
    fn period(&self) -> f64 {
        PLANT_DT
    }

    fn update(&mut self, obs: &Observation, _: &Reference) -> Result<Command> {
        // Everything a controller can see. A new field (such as the plant's
        // fault multiplier) breaks this pattern and must be justified here.
        let Observation {
            t: _,
            x_d: _,
            q: _,
            filter: _,
            current,
        } = *obs;
        self.seen.push(*obs);
        let cmd = *self.hold.get_or_insert(Command {
            input: current,
            applied_bound: None,
            solver: None,
        });
        Ok(cmd)
    }
}

fn observe(fault: Option<FaultSchedule>) -> Vec<Observation> {
    let cfg = ScenarioConfig {
        fault,
        ..short(1, ControllerKind::Pid, 25.0)
    };
    let mut law = Recorder {
        hold: None,
        seen: Vec::new(),
    };
    run_with_law(&cfg, &mut law, &AircraftParams::default()).unwrap();
    law.seen
}

#[test]
fn controller_never_sees_the_future_or_the_fault() {
    let fault_time = 20.0;
    let nominal = observe(None);
    let faulty = observe(Some(FaultSchedule {
        time: fault_time,
        multiplier: 0.5,
    }));
    assert_eq!(nominal.len(), faulty.len());
    for (k, (a, b)) in nominal.iter().zip(&faulty).enumerate() {
        // Update k sees the measurement taken at step k, no later.
        assert!((a.t - k as f64 * PLANT_DT).abs() < 1e-9);
        if a.t <= fault_time + 1e-9 {
            assert_eq!(a.x_d.to_bits(), b.x_d.to_bits(), "t = {}", a.t);
            assert_eq!(a.q.to_bits(), b.q.to_bits());
            assert_eq!(a.filter, b.filter);
        }
    }
    // The fault reaches the controller only through the plant response.
    let last = (nominal.last().unwrap(), faulty.last().unwrap());
    assert_ne!(last.0.filter.mean, last.1.filter.mean);
}

struct Covariances {
    inner: PidLaw,
    min_eigen: f64,
    asymmetry: f64,
}

impl ControlLaw for Covariances {
    fn period(&self) -> f64 {
        self.inner.period()
    }

    fn update(&mut self, obs: &Observation, reference: &Reference) -> Result<Command> {
        let p = obs.filter.cov;
        self.asymmetry = self.asymmetry.max((p - p.transpose()).amax());
        let eig = p.symmetric_eigen().eigenvalues.min();
        self.min_eigen = self.min_eigen.min(eig);
        self.inner.update(obs, reference)
    }
}

#[test]
fn filter_covariance_stays_positive_definite_and_consistent() {
    // 10^4 predict/update cycles in the fault-free scenario.
    let cfg = short(1, ControllerKind::Pid, 100.0);
    let params = AircraftParams::default();
    let mut law = Covariances {
        inner: PidLaw::new(cfg.pid.clone()),
        min_eigen: f64::INFINITY,
        asymmetry: 0.0,
    };
    let out = run_with_law(&cfg, &mut law, &params).unwrap();
    assert_eq!(out.records.len(), 10_001);
    assert!(law.min_eigen > 0.0, "smallest eigenvalue {}", law.min_eigen);
    assert!(law.asymmetry < 1e-9);

    let inside = out
        .records
        .iter()
        .filter(|r| (r.thrust_true - r.thrust_hat).abs() <= 3.0 * r.var_thrust.sqrt())
        .count();
    let share = inside as f64 / out.records.len() as f64;
    assert!(
        share >= 0.95,
        "true thrust inside 3 sigma for {:.1}% of samples",
        100.0 * share
    );
    assert!(out.records.iter().all(|r| r.fault_flag == 0));
}
