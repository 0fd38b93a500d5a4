use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ftc_core::harness::plot::plot_run;
use ftc_core::harness::validate::validate_model;
use ftc_core::harness::{read_csv, run_scenario, write_csv, write_summary, ControllerKind, ScenarioConfig};
use ftc_core::Error;

#[derive(Parser)]
#[command(name = "ftc-sim", version, about = "Fault-tolerant flight control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or a batch of seeds in parallel.
    Run {
        /// Scenario file (TOML). Without it the preset for --scenario is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset id 1, 2 or 3; with --config it replaces the file's fault schedule.
        #[arg(long)]
        scenario: Option<u32>,
        #[arg(long)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV and summary files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run this many consecutive seeds starting at the configured one.
        #[arg(long)]
        batch: Option<u64>,
    },
    /// Write SVG figures for a run CSV.
    Plot {
        csv: PathBuf,
        /// Directory for the figures; defaults to the CSV's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the PID autopilot and the throttle NMPC in calm air.
    Validate {
        /// Flight length [s]; defaults to the full reference.
        #[arg(long)]
        duration: Option<f64>,
        /// Write both runs as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a preset scenario file.
    Preset {
        #[arg(long, default_value_t = 1)]
        scenario: u32,
        #[arg(long, default_value = "nmpc-thrust-ftc")]
        controller: ControllerKind,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io { .. } | Error::Csv { .. } => 1,
        _ => 3,
    }
}

fn scenario_config(
    config: Option<&Path>,
    scenario: Option<u32>,
    controller: Option<ControllerKind>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ScenarioConfig, Error> {
    let mut cfg = match config {
        Some(path) => {
            // An unreadable scenario file is a configuration error too.
            let mut cfg = ScenarioConfig::load(path).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                e => e,
            })?;
            if let Some(id) = scenario {
                let preset = ScenarioConfig::preset(id, cfg.controller)?;
                cfg.scenario = id;
                cfg.fault = preset.fault;
            }
            cfg
        }
        None => ScenarioConfig::preset(
            scenario.unwrap_or(1),
            controller.unwrap_or(ControllerKind::NmpcThrustFtc),
        )?,
    };
    if let Some(c) = controller {
        if c != cfg.controller {
            cfg.controller = c;
            // A config's solver settings belong to its own controller.
            cfg.nmpc = None;
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = out {
        cfg.output = Some(dir.to_path_buf());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &ScenarioConfig) -> Result<(), Error> {
    let out = run_scenario(cfg)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let stem = format!("scenario{}_{}_seed{}", cfg.scenario, cfg.controller.name(), cfg.seed);
    let csv = dir.join(format!("{stem}.csv"));
    write_csv(&out.records, &csv)?;
    write_summary(&out.summary, &dir.join(format!("{stem}.summary.toml")))?;
    let s = &out.summary;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    println!(
        "{stem}: detection {} s, min V_T {:.2} m/s, cruise RMS {} m, descent-end error {} m, \
         V_D excursions {}, control violations {}, solves {} ({} not converged) -> {}",
        opt(s.detection_latency),
        s.min_airspeed,
        opt(s.cruise_rms),
        opt(s.descent_end_error),
        s.v_d_excursions,
        s.control_violations,
        s.solves,
        s.solver_max_iter + s.solver_infeasible,
        csv.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            controller,
            seed,
            out,
            batch,
        } => {
            let cfg = scenario_config(config.as_deref(), scenario, controller, seed, out.as_deref())?;
            match batch {
                None => run_one(&cfg),
                Some(0) => Err(Error::Config("--batch must be at least 1".into())),
                Some(n) => {
                    let results: Vec<(u64, Result<(), Error>)> = (cfg.seed..cfg.seed + n)
                        .into_par_iter()
                        .map(|s| {
                            let c = ScenarioConfig { seed: s, ..cfg.clone() };
                            (s, run_one(&c))
                        })
                        .collect();
                    // Report every failure, return the first.
                    let mut first = None;
                    for (s, r) in results {
                        if let Err(e) = r {
                            eprintln!("seed {s}: {e}");
                            first.get_or_insert(e);
                        }
                    }
                    first.map_or(Ok(()), Err)
                }
            }
        }
        Command::Plot { csv, out } => {
            let records = read_csv(&csv)?;
            let dir = out.unwrap_or_else(|| csv.parent().map(Path::to_path_buf).unwrap_or_default());
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            for path in plot_run(&records, &dir, stem)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { duration, out } => {
            let (report, pid, nmpc) = validate_model(duration)?;
            print!(
                "{}",
                toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                write_csv(&pid.records, &dir.join("validate_pid.csv"))?;
                write_csv(&nmpc.records, &dir.join("validate_nmpc-throttle.csv"))?;
            }
            Ok(())
        }
        Command::Preset { scenario, controller } => {
            let cfg = ScenarioConfig::preset(scenario, controller)?;
            print!("{}", cfg.to_toml_string()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
