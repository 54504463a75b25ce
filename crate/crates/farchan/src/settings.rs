//! Numeric knobs settable both in input files and on the command line.
//! A flag given on the command line replaces the file's value.

use clap::{Args, ValueEnum};
use farchan_core::{InversionConfig, InversionMethod, SeriesConfig, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvMethod {
    Talbot,
    GaverStehfest,
}

impl From<InvMethod> for InversionMethod {
    fn from(m: InvMethod) -> Self {
        match m {
            InvMethod::Talbot => InversionMethod::Talbot,
            InvMethod::GaverStehfest => InversionMethod::GaverStehfest,
        }
    }
}

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOL: f64 = 0.02;

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Numerical inversion method [default: talbot]
    #[arg(long, global = true, value_enum)]
    pub inv_method: Option<InvMethod>,
    /// Inversion order: Talbot nodes (8..=64) or Gaver-Stehfest terms (even, 8..=18)
    #[arg(long, global = true)]
    pub inv_order: Option<usize>,
    /// Inversion accuracy target, also the final-value convergence threshold
    #[arg(long, global = true)]
    pub inv_tol: Option<f64>,
    /// Relative truncation tolerance of the erfc series
    #[arg(long, global = true)]
    pub series_tol: Option<f64>,
    /// Maximum number of erfc series terms
    #[arg(long, global = true)]
    pub max_terms: Option<usize>,
    /// Simulation time step in seconds [default: 1e-4]
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Number of simulated molecules [default: 10000]
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Master seed of the simulation [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Simulation horizon in seconds [default: last recorded time]
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    /// Absolute error tolerance of `compare` [default: 0.02]
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

impl Settings {
    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(&self, flags: &Settings) -> Settings {
        Settings {
            inv_method: flags.inv_method.or(self.inv_method),
            inv_order: flags.inv_order.or(self.inv_order),
            inv_tol: flags.inv_tol.or(self.inv_tol),
            series_tol: flags.series_tol.or(self.series_tol),
            max_terms: flags.max_terms.or(self.max_terms),
            dt: flags.dt.or(self.dt),
            trials: flags.trials.or(self.trials),
            seed: flags.seed.or(self.seed),
            t_max: flags.t_max.or(self.t_max),
            tol: flags.tol.or(self.tol),
        }
    }

    pub fn inversion(&self) -> Result<InversionConfig, CliError> {
        let method = self.inv_method.unwrap_or(InvMethod::Talbot);
        let mut cfg = match method {
            InvMethod::Talbot => InversionConfig::talbot(self.inv_order.unwrap_or(24)),
            InvMethod::GaverStehfest => InversionConfig::gaver_stehfest(self.inv_order.unwrap_or(14)),
        };
        if let Some(tol) = self.inv_tol {
            cfg.abs_tol = tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn series(&self) -> Result<SeriesConfig, CliError> {
        let defaults = SeriesConfig::default();
        let cfg = SeriesConfig {
            rel_tol: self.series_tol.unwrap_or(defaults.rel_tol),
            max_terms: self.max_terms.unwrap_or(defaults.max_terms),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Simulation config recording at `record_times` (the horizon when empty).
    pub fn sim_config(&self, mut record_times: Vec<f64>) -> Result<SimConfig, CliError> {
        let t_max = match (self.t_max, record_times.last()) {
            (Some(t), _) => t,
            (None, Some(&t)) => t,
            (None, None) => 1.0,
        };
        if record_times.is_empty() {
            record_times.push(t_max);
        }
        let cfg = SimConfig {
            dt: self.dt.unwrap_or(DEFAULT_DT),
            t_max,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            record_times,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = Settings { dt: Some(1e-3), trials: Some(5), seed: Some(1), ..Default::default() };
        let flags = Settings { trials: Some(9), ..Default::default() };
        let merged = file.overridden_by(&flags);
        assert_eq!(merged.trials, Some(9));
        assert_eq!(merged.dt, Some(1e-3));
        assert_eq!(merged.seed, Some(1));
    }

    #[test]
    fn defaults_are_valid() {
        let s = Settings::default();
        assert_eq!(s.inversion().unwrap(), InversionConfig::default());
        assert_eq!(s.series().unwrap(), SeriesConfig::default());
        let sim = s.sim_config(vec![0.5, 1.0]).unwrap();
        assert_eq!(sim.t_max, 1.0);
        assert_eq!(s.sim_config(Vec::new()).unwrap().record_times, vec![1.0]);
    }

    #[test]
    fn invalid_values_are_invariant_errors() {
        let s = Settings { inv_order: Some(13), inv_method: Some(InvMethod::GaverStehfest), ..Default::default() };
        assert_eq!(s.inversion().unwrap_err().exit_code(), crate::error::exit::INVARIANT);
        let s = Settings { trials: Some(0), ..Default::default() };
        assert_eq!(s.sim_config(vec![1.0]).unwrap_err().exit_code(), crate::error::exit::INVARIANT);
    }
}
