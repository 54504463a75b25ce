//! Input files, time grids and CSV conventions.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use farchan_core::geometry::validate;
use farchan_core::{Model, SystemGeometry, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::settings::Settings;

/// Geometry document, e.g.
/// `{"receivers": [[25,0,0], ...], "radius_a": 5, "diffusion_d": 100, "dt": 1e-4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub receivers: Vec<Vec3>,
    pub radius_a: f64,
    pub diffusion_d: f64,
    #[serde(flatten)]
    pub settings: Settings,
    #[serde(flatten, skip_serializing)]
    unknown: BTreeMap<String, serde_json::Value>,
}

impl GeometryFile {
    pub fn new(geom: &SystemGeometry) -> Self {
        GeometryFile {
            receivers: geom.centers().collect(),
            radius_a: geom.radius_a(),
            diffusion_d: geom.diffusion_d(),
            settings: Settings::default(),
            unknown: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: GeometryFile = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        reject_unknown(&file.unknown)?;
        Ok(file)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        let file: GeometryFile = serde_json::from_value(value).map_err(|e| CliError::Parse(e.to_string()))?;
        reject_unknown(&file.unknown)?;
        Ok(file)
    }

    pub fn geometry(&self) -> Result<SystemGeometry, CliError> {
        Ok(SystemGeometry::new(self.receivers.iter().copied(), self.radius_a, self.diffusion_d)?)
    }
}

pub(crate) fn reject_unknown(unknown: &BTreeMap<String, serde_json::Value>) -> Result<(), CliError> {
    match unknown.keys().next() {
        Some(key) => Err(CliError::Parse(format!("unknown field '{key}'"))),
        None => Ok(()),
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))
}

/// Loads and validates a geometry file.
pub fn load_geometry(path: &Path) -> Result<(SystemGeometry, Settings), CliError> {
    let file = GeometryFile::from_json(&read_text(path)?)?;
    Ok((file.geometry()?, file.settings))
}

/// Parses `t1,t2,...` or `start:stop:count[:log|:lin]` into ascending
/// positive times.
pub fn parse_times(spec: &str) -> Result<Vec<f64>, String> {
    let times = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected start:stop:count[:log], got '{spec}'"));
        }
        let start = parse_f64(parts[0])?;
        let stop = parse_f64(parts[1])?;
        let count: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
        let scale = match parts.get(3).map(|s| s.trim()) {
            None | Some("lin") | Some("linear") => Scale::Linear,
            Some("log") => Scale::Log,
            Some(other) => return Err(format!("unknown scale '{other}'")),
        };
        Range { start, stop, count, scale }.values().map_err(|e| e.to_string())?
    } else {
        spec.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?
    };
    if times.is_empty() {
        return Err("no times given".into());
    }
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err("times must be positive and finite".into());
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err("times must be strictly ascending".into());
    }
    Ok(times)
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("bad number '{s}'"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// `count` points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Range {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.count < 2 {
            return Err(CliError::Invariant(format!("range count must be at least 2, got {}", self.count)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(CliError::Invariant(format!("range needs start < stop, got {} and {}", self.start, self.stop)));
        }
        if self.scale == Scale::Log && self.start <= 0.0 {
            return Err(CliError::Invariant("log range needs a positive start".into()));
        }
        let last = (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    return self.stop;
                }
                let f = k as f64 / last;
                match self.scale {
                    Scale::Linear => self.start + (self.stop - self.start) * f,
                    Scale::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect())
    }
}

/// CSV number format: scientific, 13 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

#[derive(Debug, Serialize)]
struct ReceiverOut {
    label: usize,
    center: Vec3,
    r: f64,
}

#[derive(Debug, Serialize)]
struct ReportOut {
    radius_a: f64,
    diffusion_d: f64,
    auto_model: &'static str,
    receivers: Vec<ReceiverOut>,
    phi: Vec<Vec<Option<f64>>>,
    proxy_r: Vec<Vec<Option<f64>>>,
    warnings: Vec<String>,
}

/// Geometry report as pretty JSON.
pub fn report_json(geom: &SystemGeometry) -> String {
    let report = validate(geom);
    let out = ReportOut {
        radius_a: geom.radius_a(),
        diffusion_d: geom.diffusion_d(),
        auto_model: Model::auto(geom).as_str(),
        receivers: geom
            .receivers()
            .iter()
            .zip(&report.r)
            .map(|(rcv, &r)| ReceiverOut { label: rcv.label, center: rcv.center, r })
            .collect(),
        phi: report.phi,
        proxy_r: report.proxy_r,
        warnings: report.warnings.iter().map(ToString::to_string).collect(),
    };
    serde_json::to_string_pretty(&out).expect("report serializes")
}
