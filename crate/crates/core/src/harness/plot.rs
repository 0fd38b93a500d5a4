//! SVG figures of a run: controls, airspeed, vertical speed, height and the
//! fault flag with the thrust estimate.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::record::SimRecord;
use crate::error::{Error, Result};

type Getter = fn(&SimRecord) -> f64;

struct Figure {
    name: &'static str,
    y_label: &'static str,
    series: &'static [(&'static str, Getter, RGBColor)],
}

const FIGURES: &[Figure] = &[
    Figure {
        name: "controls",
        y_label: "command",
        series: &[
            ("engine command", |r| r.effort_cmd, BLUE),
            ("elevator [deg]", |r| r.elevator_cmd.to_degrees(), RED),
        ],
    },
    Figure {
        name: "airspeed",
        y_label: "V_T [m/s]",
        series: &[("V_T", |r| r.airspeed, BLUE), ("demand", |r| r.airspeed_ref, BLACK)],
    },
    Figure {
        name: "v_d",
        y_label: "V_D [m/s]",
        series: &[("V_D", |r| r.v_d, BLUE), ("demand", |r| r.v_d_ref, BLACK)],
    },
    Figure {
        name: "height",
        y_label: "height [m]",
        series: &[("height", |r| r.altitude, BLUE), ("demand", |r| r.altitude_ref, BLACK)],
    },
    Figure {
        name: "fault",
        y_label: "thrust [N] / flag",
        series: &[
            ("true thrust", |r| r.thrust_true, BLACK),
            ("estimate", |r| r.thrust_hat, BLUE),
            ("flag x10", |r| 10.0 * f64::from(r.fault_flag), RED),
        ],
    },
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn draw(figure: &Figure, records: &[SimRecord], path: &Path) -> Result<()> {
    let t_end = records.last().map_or(1.0, |r| r.t).max(1e-3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, get, _) in figure.series {
        for v in records.iter().map(get).filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-3);
    let root = SVGBackend::new(path, (900, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..t_end, (lo - pad)..(hi + pad))
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("time [s]")
        .y_desc(figure.y_label)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (label, get, color) in figure.series {
        let color = *color;
        chart
            .draw_series(LineSeries::new(
                records.iter().filter(|r| get(r).is_finite()).map(|r| (r.t, get(r))),
                color,
            ))
            .map_err(|e| plot_err(path, e))?
            .label(*label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 15, y)], color));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// Write one SVG per figure into `dir` as `<stem>_<figure>.svg`.
pub fn plot_run(records: &[SimRecord], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    FIGURES
        .iter()
        .map(|f| {
            let path = dir.join(format!("{stem}_{}.svg", f.name));
            draw(f, records, &path).map(|_| path)
        })
        .collect()
}
