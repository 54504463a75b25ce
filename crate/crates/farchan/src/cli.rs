use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use farchan_core::geometry::validate;
use farchan_core::simulator::CellStatus;
use farchan_core::SystemGeometry;

use crate::error::{exit, CliError};
use crate::io::{self, num, parse_times, GeometryFile};
use crate::parallel;
use crate::settings::Settings;
use crate::sweep::{self, evaluate, Axis, Context, ModelChoice, SweepSpec, Table};

/// Ascending list of times parsed from `t1,t2,...` or `start:stop:count[:log]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Times(pub Vec<f64>);

fn times_arg(s: &str) -> Result<Times, String> {
    parse_times(s).map(Times)
}

#[derive(Debug, Parser)]
#[command(
    name = "farchan",
    version,
    about = "Hitting probabilities of 3-D diffusion channels with absorbing spherical receivers"
)]
pub struct Cli {
    #[command(flatten)]
    pub settings: Settings,
    /// Worker threads for simulations and sweeps [default: all cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Write CSV here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a geometry file and print distances, angles and warnings as JSON
    Validate { geometry: PathBuf },
    /// Analytical hitting probabilities as CSV: time,receiver,prob,model
    Hit {
        geometry: PathBuf,
        /// 1-based receiver label (all receivers when absent)
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, value_parser = times_arg, default_value = "0.01:1:50:log")]
        times: Times,
        #[arg(long, value_enum, default_value = "auto")]
        model: ModelChoice,
    },
    /// Particle simulation as CSV: time,receiver,prob_hat,ci_halfwidth
    Sim {
        geometry: PathBuf,
        /// Times at which to report the empirical CDF [default: t-max]
        #[arg(long, value_parser = times_arg)]
        record: Option<Times>,
        /// Also write per-trial absorption records to this CSV file
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Run a sweep file and print one CSV row per axis value, receiver and model
    Sweep { spec: PathBuf },
    /// Analytical model against simulation; a grid-yz sweep file gives an error map
    Compare {
        /// Geometry file or grid-yz sweep file
        input: PathBuf,
        /// 1-based receiver label (all receivers when absent)
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, value_parser = times_arg, default_value = "0.05:1:10")]
        times: Times,
        #[arg(long, value_enum, default_value = "auto")]
        model: ModelChoice,
    },
}

/// Parses `args` and runs the command, writing CSV to `out` unless
/// `--output` is given. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(&cli, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut file_out;
    let out: &mut dyn Write = match &cli.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?;
            file_out = BufWriter::new(f);
            &mut file_out
        }
        None => stdout,
    };
    let pool = parallel::pool(cli.workers)?;
    // Commands run inside the pool and write to a buffer, which is copied out
    // even when the command reports a failure after producing its CSV.
    let mut buf = Vec::new();
    let out_buf = &mut buf;
    let result = pool.install(move || match &cli.command {
        Command::Validate { geometry } => cmd_validate(geometry, &cli.settings, out_buf),
        Command::Hit { geometry, target, times, model } => {
            cmd_hit(geometry, *target, &times.0, *model, &cli.settings, out_buf)
        }
        Command::Sim { geometry, record, raw } => {
            cmd_sim(geometry, record.as_ref().map(|t| t.0.clone()), raw.as_deref(), &cli.settings, out_buf)
        }
        Command::Sweep { spec } => cmd_sweep(spec, &cli.settings, out_buf),
        Command::Compare { input, target, times, model } => {
            cmd_compare(input, *target, &times.0, *model, &cli.settings, out_buf)
        }
    });
    out.write_all(&buf)?;
    out.flush()?;
    result
}

fn load(path: &Path, flags: &Settings) -> Result<(SystemGeometry, Context), CliError> {
    let (geom, file_settings) = io::load_geometry(path)?;
    Ok((geom, Context::new(file_settings.overridden_by(flags))?))
}

fn log_geometry_warnings(geom: &SystemGeometry) -> bool {
    let report = validate(geom);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    report.is_warned()
}

fn receivers(geom: &SystemGeometry, target: Option<usize>) -> Result<Vec<usize>, CliError> {
    match target {
        None => Ok((0..geom.len()).collect()),
        Some(t) if (1..=geom.len()).contains(&t) => Ok(vec![t - 1]),
        Some(t) => Err(CliError::Invariant(format!("target {t} is not a receiver label (1..={})", geom.len()))),
    }
}

fn cmd_validate(path: &Path, flags: &Settings, out: &mut Vec<u8>) -> Result<(), CliError> {
    let (geom, _) = load(path, flags)?;
    writeln!(out, "{}", io::report_json(&geom))?;
    Ok(())
}

fn cmd_hit(
    path: &Path,
    target: Option<usize>,
    times: &[f64],
    choice: ModelChoice,
    flags: &Settings,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let (geom, ctx) = load(path, flags)?;
    if choice == ModelChoice::Simulation {
        return Err(CliError::Invariant("use `farchan sim` for simulations".into()));
    }
    let rows = receivers(&geom, target)?;
    log_geometry_warnings(&geom);
    let eval = evaluate(&geom, times, choice, &ctx)?;
    let mut table = Table { header: vec!["time", "receiver", "prob", "model"], rows: Vec::new() };
    for (k, &t) in times.iter().enumerate() {
        for &i in &rows {
            table.rows.push(vec![num(t), (i + 1).to_string(), num(eval.probs[i][k]), eval.model.to_string()]);
        }
    }
    table.write(out)
}

fn cmd_sim(
    path: &Path,
    record: Option<Vec<f64>>,
    raw: Option<&Path>,
    flags: &Settings,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let (geom, ctx) = load(path, flags)?;
    let cfg = ctx.settings.sim_config(record.unwrap_or_default())?;
    log_geometry_warnings(&geom);
    let est = match raw {
        Some(raw_path) => {
            let (est, outcomes) = parallel::simulate_with_outcomes(&geom, &cfg)?;
            let f =
                File::create(raw_path).map_err(|e| CliError::io(format!("cannot create {}", raw_path.display()), e))?;
            parallel::write_outcomes(BufWriter::new(f), &outcomes)?;
            est
        }
        None => parallel::simulate(&geom, &cfg)?,
    };
    for w in &est.warnings {
        log::warn!("{w}");
    }
    let mut table = Table { header: vec!["time", "receiver", "prob_hat", "ci_halfwidth"], rows: Vec::new() };
    for (k, &t) in est.record_times.iter().enumerate() {
        for i in 0..geom.len() {
            table.rows.push(vec![num(t), (i + 1).to_string(), num(est.prob(i, k)), num(est.ci_halfwidth[i][k])]);
        }
    }
    table.write(out)
}

fn cmd_sweep(path: &Path, flags: &Settings, out: &mut Vec<u8>) -> Result<(), CliError> {
    let spec = sweep::load_spec(path)?;
    if spec.axis == Axis::GridYz {
        let (table, _) = sweep::run_error_map(&spec, flags)?;
        return table.write(out);
    }
    sweep::run_sweep(&spec, flags)?.write(out)
}

fn cmd_compare(
    path: &Path,
    target: Option<usize>,
    times: &[f64],
    choice: ModelChoice,
    flags: &Settings,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let value: serde_json::Value =
        serde_json::from_str(&io::read_text(path)?).map_err(|e| CliError::Parse(e.to_string()))?;
    if value.get("axis").is_some() {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let spec = SweepSpec::from_value(value, dir)?;
        return compare_grid(&spec, flags, out);
    }
    let file = GeometryFile::from_value(value)?;
    let geom = file.geometry()?;
    let ctx = Context::new(file.settings.overridden_by(flags))?;
    if choice == ModelChoice::Simulation {
        return Err(CliError::Invariant("compare needs an analytical model".into()));
    }
    let rows = receivers(&geom, target)?;
    let warned = log_geometry_warnings(&geom);
    let analytical = evaluate(&geom, times, choice, &ctx)?;
    let simulated = evaluate(&geom, times, ModelChoice::Simulation, &ctx)?;
    let ci = simulated.ci_halfwidth.as_ref().expect("simulation carries intervals");

    let mut table = Table {
        header: vec!["time", "receiver", "model", "analytical", "simulated", "ci_halfwidth", "abs_error"],
        rows: Vec::new(),
    };
    let mut worst = (0.0_f64, times[0], rows[0]);
    for (k, &t) in times.iter().enumerate() {
        for &i in &rows {
            let err = (analytical.probs[i][k] - simulated.probs[i][k]).abs();
            if err > worst.0 {
                worst = (err, t, i);
            }
            table.rows.push(vec![
                num(t),
                (i + 1).to_string(),
                analytical.model.to_string(),
                num(analytical.probs[i][k]),
                num(simulated.probs[i][k]),
                num(ci[i][k]),
                num(err),
            ]);
        }
    }
    table.write(&mut *out)?;
    let tol = ctx.settings.tol();
    eprintln!(
        "max abs error {:.6e} ({} vs simulation, receiver {}, t = {})",
        worst.0,
        analytical.model,
        worst.2 + 1,
        worst.1
    );
    check_tolerance(worst.0, tol, warned)
}

fn compare_grid(spec: &SweepSpec, flags: &Settings, out: &mut Vec<u8>) -> Result<(), CliError> {
    if spec.axis != Axis::GridYz {
        return Err(CliError::Invariant("compare accepts sweep files only with axis 'grid-yz'".into()));
    }
    let (table, cells) = sweep::run_error_map(spec, flags)?;
    table.write(&mut *out)?;
    let tol = spec.sim.overridden_by(flags).tol();
    let excluded = cells.iter().filter(|c| matches!(c.status, CellStatus::Excluded(_))).count();
    let warned = cells.iter().filter(|c| matches!(c.status, CellStatus::Evaluated { warned: true, .. })).count();
    let worst = sweep::max_unwarned_error(&cells);
    eprintln!(
        "{} cells: {excluded} excluded, {warned} warned (exempt); max abs error over the rest {}",
        cells.len(),
        worst.map_or("n/a".to_string(), |e| format!("{e:.6e}"))
    );
    match worst {
        Some(e) => check_tolerance(e, tol, false),
        None => Ok(()),
    }
}

fn check_tolerance(max_error: f64, tol: f64, warned: bool) -> Result<(), CliError> {
    if max_error <= tol {
        eprintln!("within tolerance {tol}");
        Ok(())
    } else if warned {
        eprintln!("tolerance {tol} exceeded on a warned geometry; check skipped");
        Ok(())
    } else {
        Err(CliError::Tolerance { max_error, tol })
    }
}
