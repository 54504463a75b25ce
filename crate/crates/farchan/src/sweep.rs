//! Declarative parameter sweeps.
//!
//! A sweep file names an axis, a range, a base geometry and the models to
//! evaluate:
//!
//! ```json
//! {
//!   "axis": "diffusion",
//!   "range": {"start": 10, "stop": 500, "count": 50, "scale": "linear"},
//!   "geometry": {"layout": "uca", "w": 10, "d": 20, "radius_a": 4, "diffusion_d": 100},
//!   "models": ["auto", "simulation"],
//!   "t": 1.0,
//!   "radii": [2, 4, 6],
//!   "sim": {"dt": 1e-4, "trials": 20000, "seed": 7}
//! }
//! ```
//!
//! `geometry` is a file path, an inline geometry document, or one of the
//! layouts `uca`, `angle` and `grid-yz`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use farchan_core::channel::hitting_curve;
use farchan_core::geometry::{angle_layout, uca_geometry};
use farchan_core::metrics::{malicious_influence, with_malicious};
use farchan_core::simulator::{CellStatus, ErrorCell, GridFamily};
use farchan_core::{InversionConfig, Model, SeriesConfig, SystemGeometry, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{csv_writer, num, read_text, GeometryFile, Range};
use crate::parallel;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Time,
    Diffusion,
    Radius,
    Angle,
    GridYz,
    MaliciousCount,
}

/// Model selector accepted on the command line and in sweep files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Auto,
    Single,
    Two,
    Three,
    Symmetric,
    NGeneral,
    Simulation,
}

impl ModelChoice {
    pub fn resolve(self, geom: &SystemGeometry) -> Model {
        match self {
            ModelChoice::Auto => Model::auto(geom),
            ModelChoice::Single => Model::Single,
            ModelChoice::Two => Model::Two,
            ModelChoice::Three => Model::Three,
            ModelChoice::Symmetric => Model::Symmetric,
            ModelChoice::NGeneral => Model::NGeneral,
            ModelChoice::Simulation => Model::Simulation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Layout {
    /// Three receivers on a circle of radius `d` in the plane `x = w`.
    Uca { w: f64, d: f64, radius_a: f64, diffusion_d: f64 },
    /// Receiver at `[r,0,0]` with competitors at `±theta` in the `xy` plane.
    /// `theta` is only needed when the sweep axis is not `angle`.
    Angle { r: f64, radius_a: f64, diffusion_d: f64, theta: Option<f64> },
    /// Receiver `moving` (1-based position) sits at `[x, y, z]` on the grid
    /// while the `fixed` receivers stay put.
    GridYz {
        x: f64,
        fixed: Vec<Vec3>,
        #[serde(default = "first")]
        moving: usize,
        radius_a: f64,
        diffusion_d: f64,
    },
}

fn first() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySource {
    Path(PathBuf),
    Layout(Layout),
    Inline(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub range: Range,
    pub geometry: GeometrySource,
    #[serde(default = "auto_only")]
    pub models: Vec<ModelChoice>,
    /// Numeric settings (simulation and inversion), overridable by flags.
    #[serde(default)]
    pub sim: Settings,
    /// Evaluation time for every axis except `time` and `malicious-count`.
    #[serde(default = "one")]
    pub t: f64,
    /// Receiver radii to repeat the sweep with.
    pub radii: Option<Vec<f64>>,
    /// 1-based receiver to report (all when absent; receiver 1 for `q`).
    pub target: Option<usize>,
    /// Competitor counts for the `malicious-count` axis.
    #[serde(default = "zero_to_two")]
    pub malicious: Vec<usize>,
}

fn auto_only() -> Vec<ModelChoice> {
    vec![ModelChoice::Auto]
}

fn one() -> f64 {
    1.0
}

fn zero_to_two() -> Vec<usize> {
    vec![0, 1, 2]
}

impl SweepSpec {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        Self::from_value(value, base_dir)
    }

    /// Parses a spec; a relative geometry path is resolved against `base_dir`.
    pub fn from_value(value: serde_json::Value, base_dir: &Path) -> Result<Self, CliError> {
        let mut spec: SweepSpec = serde_json::from_value(value).map_err(|e| CliError::Parse(e.to_string()))?;
        if let GeometrySource::Path(p) = &mut spec.geometry {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        if let GeometrySource::Inline(v) = &spec.geometry {
            GeometryFile::from_value(v.clone())?;
        }
        if spec.models.is_empty() {
            return Err(CliError::Invariant("models must not be empty".into()));
        }
        spec.range.values()?;
        Ok(spec)
    }

    /// The base geometry plus the numeric settings carried by a geometry file.
    fn base_geometry(&self) -> Result<(SystemGeometry, Settings), CliError> {
        match &self.geometry {
            GeometrySource::Path(p) => crate::io::load_geometry(p),
            GeometrySource::Inline(v) => {
                let file = GeometryFile::from_value(v.clone())?;
                Ok((file.geometry()?, file.settings))
            }
            GeometrySource::Layout(Layout::Uca { w, d, radius_a, diffusion_d }) => {
                Ok((uca_geometry(*w, *d, *radius_a, *diffusion_d)?, Settings::default()))
            }
            GeometrySource::Layout(Layout::Angle { r, radius_a, diffusion_d, theta }) => {
                let theta = theta.ok_or_else(|| {
                    CliError::Invariant("the angle layout needs 'theta' unless the axis is 'angle'".into())
                })?;
                Ok((angle_layout(*r, theta, *radius_a, *diffusion_d)?, Settings::default()))
            }
            GeometrySource::Layout(Layout::GridYz { .. }) => {
                Err(CliError::Invariant("the grid-yz layout is only valid with axis 'grid-yz'".into()))
            }
        }
    }

    /// Grid family for the `grid-yz` axis; `range` spans both `y` and `z`.
    pub fn grid_family(&self) -> Result<GridFamily, CliError> {
        match (&self.axis, &self.geometry) {
            (Axis::GridYz, GeometrySource::Layout(Layout::GridYz { x, fixed, moving, radius_a, diffusion_d })) => {
                if *moving == 0 || *moving > fixed.len() + 1 {
                    return Err(CliError::Invariant(format!("moving receiver {moving} out of range")));
                }
                let values = self.range.values()?;
                Ok(GridFamily {
                    moving: moving - 1,
                    x: *x,
                    fixed: fixed.clone(),
                    ys: values.clone(),
                    zs: values,
                    radius_a: *radius_a,
                    diffusion_d: *diffusion_d,
                })
            }
            _ => Err(CliError::Invariant("axis 'grid-yz' requires the grid-yz layout".into())),
        }
    }
}

/// Resolved numeric configuration shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub settings: Settings,
    pub inv: InversionConfig,
    pub series: SeriesConfig,
}

impl Context {
    pub fn new(settings: Settings) -> Result<Self, CliError> {
        Ok(Context { inv: settings.inversion()?, series: settings.series()?, settings })
    }
}

/// Per-receiver values of one model on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub model: Model,
    /// `probs[receiver][time]`.
    pub probs: Vec<Vec<f64>>,
    /// Simulation only.
    pub ci_halfwidth: Option<Vec<Vec<f64>>>,
}

/// Evaluates `choice` on `geom` at `times`. Simulations run on the current
/// rayon pool.
pub fn evaluate(
    geom: &SystemGeometry,
    times: &[f64],
    choice: ModelChoice,
    ctx: &Context,
) -> Result<Evaluation, CliError> {
    let model = choice.resolve(geom);
    if model == Model::Simulation {
        let cfg = ctx.settings.sim_config(times.to_vec())?;
        let est = parallel::simulate(geom, &cfg)?;
        for w in &est.warnings {
            log::warn!("{w}");
        }
        return Ok(Evaluation { model, probs: est.probs(), ci_halfwidth: Some(est.ci_halfwidth) });
    }
    let curve = hitting_curve(geom, times, model, &ctx.inv, &ctx.series)?;
    Ok(Evaluation { model, probs: curve.probs, ci_halfwidth: None })
}

/// CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const SWEEP_HEADER: [&str; 10] =
    ["axis_value", "t", "radius_a", "diffusion_d", "m", "receiver", "model", "prob", "ci_halfwidth", "q"];

struct Cell {
    /// `None` when the axis value is the time column itself.
    axis_value: Option<f64>,
    m: Option<usize>,
    geom: SystemGeometry,
    times: Vec<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Runs a sweep (any axis but `grid-yz`) on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec, flags: &Settings) -> Result<Table, CliError> {
    if spec.axis == Axis::GridYz {
        return Err(CliError::Invariant("grid-yz sweeps produce an error map; use run_error_map".into()));
    }
    let values = spec.range.values()?;
    if !(spec.t.is_finite() && spec.t > 0.0) {
        return Err(CliError::Invariant(format!("t must be positive, got {}", spec.t)));
    }
    let cells = match (&spec.axis, &spec.geometry) {
        (Axis::Angle, GeometrySource::Layout(Layout::Angle { r, radius_a, diffusion_d, .. })) => {
            let ctx = Context::new(spec.sim.overridden_by(flags))?;
            let radii = spec.radii.clone().unwrap_or_else(|| vec![*radius_a]);
            let mut cells = Vec::new();
            for &a in &radii {
                for &theta in &values {
                    // The two competitors meet at theta = pi; overlapping
                    // layouts are skipped rather than failing the sweep.
                    match angle_layout(*r, theta, a, *diffusion_d) {
                        Ok(geom) => cells.push(Cell { axis_value: Some(theta), m: None, geom, times: vec![spec.t] }),
                        Err(e) => log::warn!("theta = {theta}, a = {a} skipped: {e}"),
                    }
                }
            }
            return rows_of(spec, &cells, &ctx);
        }
        (Axis::Angle, _) => return Err(CliError::Invariant("axis 'angle' requires the angle layout".into())),
        _ => {
            let (base, file_settings) = spec.base_geometry()?;
            let ctx = Context::new(file_settings.overridden_by(&spec.sim).overridden_by(flags))?;
            (axis_cells(spec, &base, &values)?, ctx)
        }
    };
    rows_of(spec, &cells.0, &cells.1)
}

fn axis_cells(spec: &SweepSpec, base: &SystemGeometry, values: &[f64]) -> Result<Vec<Cell>, CliError> {
    if spec.axis == Axis::Radius {
        if spec.radii.is_some() {
            return Err(CliError::Invariant("'radii' cannot be combined with axis 'radius'".into()));
        }
        return values
            .iter()
            .map(|&a| Ok(Cell { axis_value: Some(a), m: None, geom: base.with_radius(a)?, times: vec![spec.t] }))
            .collect();
    }
    let radii = spec.radii.clone().unwrap_or_else(|| vec![base.radius_a()]);
    let mut cells = Vec::new();
    for &a in &radii {
        let with_a = base.with_radius(a)?;
        match spec.axis {
            Axis::Time => cells.push(Cell { axis_value: None, m: None, geom: with_a, times: values.to_vec() }),
            Axis::Diffusion => {
                for &d in values {
                    let geom = with_a.with_diffusion(d)?;
                    cells.push(Cell { axis_value: Some(d), m: None, geom, times: vec![spec.t] });
                }
            }
            Axis::MaliciousCount => {
                for &m in &spec.malicious {
                    let geom = with_malicious(&with_a, m)?;
                    cells.push(Cell { axis_value: Some(m as f64), m: Some(m), geom, times: values.to_vec() });
                }
            }
            Axis::Radius | Axis::Angle | Axis::GridYz => unreachable!("handled by the caller"),
        }
    }
    Ok(cells)
}

fn rows_of(spec: &SweepSpec, cells: &[Cell], ctx: &Context) -> Result<Table, CliError> {
    let target = match spec.target {
        Some(0) => return Err(CliError::Invariant("target is a 1-based receiver label".into())),
        Some(t) => Some(t - 1),
        None => None,
    };
    let per_cell: Vec<Vec<Vec<String>>> =
        cells.par_iter().map(|cell| cell_rows(spec, cell, target, ctx)).collect::<Result<_, _>>()?;
    Ok(Table { header: SWEEP_HEADER.to_vec(), rows: per_cell.into_iter().flatten().collect() })
}

fn cell_rows(
    spec: &SweepSpec,
    cell: &Cell,
    target: Option<usize>,
    ctx: &Context,
) -> Result<Vec<Vec<String>>, CliError> {
    let geom = &cell.geom;
    let receivers: Vec<usize> = match target {
        Some(i) if i < geom.len() => vec![i],
        Some(i) => return Err(CliError::Invariant(format!("target {} exceeds receiver count {}", i + 1, geom.len()))),
        None => (0..geom.len()).collect(),
    };
    let q_target = target.unwrap_or(0);
    let mut rows = Vec::new();
    for &choice in &spec.models {
        let eval = evaluate(geom, &cell.times, choice, ctx)?;
        for (k, &t) in cell.times.iter().enumerate() {
            let q = if spec.axis == Axis::Angle { Some(influence(geom, t, q_target, &eval, k, ctx)?) } else { None };
            for &i in &receivers {
                rows.push(vec![
                    num(cell.axis_value.unwrap_or(t)),
                    num(t),
                    num(geom.radius_a()),
                    num(geom.diffusion_d()),
                    cell.m.map(|m| m.to_string()).unwrap_or_default(),
                    (i + 1).to_string(),
                    eval.model.as_str().to_string(),
                    num(eval.probs[i][k]),
                    opt(eval.ci_halfwidth.as_ref().map(|ci| ci[i][k])),
                    if i == q_target { opt(q) } else { String::new() },
                ]);
            }
        }
    }
    Ok(rows)
}

/// Relative loss of `target`'s hitting probability; the coupled model for
/// analytical rows, the simulated value for simulation rows.
fn influence(
    geom: &SystemGeometry,
    t: f64,
    target: usize,
    eval: &Evaluation,
    k: usize,
    ctx: &Context,
) -> Result<f64, CliError> {
    if eval.model == Model::Simulation {
        let r = geom.radial_distance(target)?;
        let isolated = farchan_core::channel::hit_single(t, r, geom.radius_a(), geom.diffusion_d())?;
        return Ok((isolated - eval.probs[target][k]) / isolated);
    }
    Ok(malicious_influence(t, geom, target, &ctx.inv)?.q)
}

pub const ERROR_MAP_HEADER: [&str; 9] =
    ["y", "z", "receiver", "status", "analytical", "simulated", "ci_halfwidth", "abs_error", "warned"];

/// Error map of a `grid-yz` sweep at time `spec.t`, plus the largest error
/// over evaluated cells without geometry warnings.
pub fn run_error_map(spec: &SweepSpec, flags: &Settings) -> Result<(Table, Vec<ErrorCell>), CliError> {
    let family = spec.grid_family()?;
    let ctx = Context::new(spec.sim.overridden_by(flags))?;
    let cfg = ctx.settings.sim_config(vec![spec.t])?;
    let cells = parallel::error_map(&family, spec.t, &cfg, &ctx.inv)?;
    let mut rows = Vec::new();
    for cell in &cells {
        match &cell.status {
            CellStatus::Excluded(_) => rows.push(vec![
                num(cell.y),
                num(cell.z),
                String::new(),
                "excluded".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]),
            CellStatus::Evaluated { analytical, simulated, ci_halfwidth, warned } => {
                for i in 0..analytical.len() {
                    rows.push(vec![
                        num(cell.y),
                        num(cell.z),
                        (i + 1).to_string(),
                        "evaluated".into(),
                        num(analytical[i]),
                        num(simulated[i]),
                        num(ci_halfwidth[i]),
                        num((analytical[i] - simulated[i]).abs()),
                        warned.to_string(),
                    ]);
                }
            }
        }
    }
    Ok((Table { header: ERROR_MAP_HEADER.to_vec(), rows }, cells))
}

/// Largest absolute error over evaluated, non-warned cells.
pub fn max_unwarned_error(cells: &[ErrorCell]) -> Option<f64> {
    cells
        .iter()
        .filter(|c| matches!(c.status, CellStatus::Evaluated { warned: false, .. }))
        .filter_map(ErrorCell::abs_errors)
        .flatten()
        .reduce(f64::max)
}

/// Loads a sweep file.
pub fn load_spec(path: &Path) -> Result<SweepSpec, CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    SweepSpec::from_json(&read_text(path)?, dir)
}
