use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the CSV column layout, also written to the summary file.
pub const CSV_SCHEMA_VERSION: u32 = 1;

trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    // 17 significant digits: parses back to the same bits.
    fn cell(&self) -> String {
        format!("{self:.16e}")
    }
}

impl Cell for u8 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for i8 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for u32 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

macro_rules! sim_record {
    ($( $(#[$m:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// One row per plant step. Angles in rad, speeds in m/s, forces in N.
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        pub struct SimRecord {
            $( $(#[$m])* pub $name: $ty, )*
        }

        /// Column order of the CSV file.
        pub const CSV_COLUMNS: &[&str] = &[$(stringify!($name)),*];

        impl SimRecord {
            fn cells(&self) -> Vec<String> {
                vec![$( Cell::cell(&self.$name) ),*]
            }

            /// Bitwise equality, treating identical NaN payloads as equal.
            pub fn bit_eq(&self, other: &SimRecord) -> bool {
                self.cells() == other.cells()
            }
        }
    };
}

sim_record! {
    t: f64,
    x_d: f64,
    altitude: f64,
    v_n: f64,
    v_d: f64,
    airspeed: f64,
    theta: f64,
    q: f64,
    altitude_ref: f64,
    airspeed_ref: f64,
    v_d_ref: f64,
    /// Throttle fraction or thrust command, per the controller.
    effort_cmd: f64,
    elevator_cmd: f64,
    /// Thrust the command asks for at the current airspeed.
    thrust_cmd: f64,
    /// Thrust the faulty plant delivers.
    thrust_true: f64,
    wind_north: f64,
    wind_down: f64,
    vn_hat: f64,
    vd_hat: f64,
    theta_hat: f64,
    thrust_hat: f64,
    var_vn: f64,
    var_vd: f64,
    var_theta: f64,
    var_thrust: f64,
    innov_vn: f64,
    innov_vd: f64,
    innov_theta: f64,
    fault_flag: u8,
    /// Filter output `T̂ + 2σ_T`; NaN before the flag is raised.
    filter_bound: f64,
    /// Thrust upper bound used by the solve behind the current command; NaN
    /// when the controller has no thrust bound.
    applied_bound: f64,
    /// 0 converged, 1 iteration limit, 2 infeasible, -1 no solver.
    solver_status: i8,
    solver_iterations: u32,
}

pub fn write_csv_to(records: &[SimRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv {
        path: "<stream>".into(),
        source: e,
    };
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(r.cells()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<stream>", e))?;
    Ok(())
}

pub fn write_csv(records: &[SimRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(records, BufWriter::new(file)).map_err(|e| with_path(e, path))
}

pub fn read_csv(path: &Path) -> Result<Vec<SimRecord>> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.into(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Config(format!("{}: unexpected CSV columns", path.display())));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.into(),
            source,
        },
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}
