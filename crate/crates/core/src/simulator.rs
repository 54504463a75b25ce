//! Particle-based Brownian-motion oracle.
//!
//! Each trial releases one molecule at the origin and advances it in steps of
//! `dt`, adding an independent `N(0, 2 D dt)` displacement to every
//! coordinate. After each step the molecule is absorbed by the first receiver
//! whose center lies strictly within distance `a`. Absorption is only checked
//! at step endpoints; a coarse `dt` therefore misses some grazing crossings.
//!
//! Randomness: trial `k` draws from Xoshiro256++ seeded through
//! `seed_from_u64(trial_seed(seed, k))` (SplitMix64 state expansion), and
//! Gaussian displacements come from `rand_distr::StandardNormal` (ziggurat).
//! A trial's path depends only on `(seed, k, dt, geometry)`, and tallies merge
//! by integer addition, so the estimate is bit-identical however the trials
//! are split across workers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::channel::{ChannelError, NFarSystem};
use crate::geometry::{validate, GeometryError, SystemGeometry, Vec3};
use crate::laplace::{InversionConfig, Inverter};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub trials: u64,
    pub seed: u64,
    /// Ascending times at which the empirical hitting CDFs are reported.
    pub record_times: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidConfig("dt must be positive"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(SimError::InvalidConfig("t_max must be positive"));
        }
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("trials must be at least 1"));
        }
        if self.record_times.is_empty() {
            return Err(SimError::InvalidConfig("record_times must not be empty"));
        }
        if self.record_times.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(SimError::InvalidConfig("record_times must be positive"));
        }
        if self.record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidConfig("record_times must be strictly ascending"));
        }
        if self.record_times.iter().any(|&t| t > self.t_max * (1.0 + 1e-12)) {
            return Err(SimError::InvalidConfig("record_times must not exceed t_max"));
        }
        Ok(())
    }

    /// Number of steps that fit in `t`, tolerant of round-off in `t / dt`.
    fn steps_until(&self, t: f64) -> u64 {
        libm::floor(t / self.dt + 1e-9) as u64
    }

    pub fn total_steps(&self) -> u64 {
        self.steps_until(self.t_max)
    }

    fn record_steps(&self) -> Vec<u64> {
        self.record_times.iter().map(|&t| self.steps_until(t)).collect()
    }

    /// Warning when the per-coordinate step deviation `sqrt(2 D dt)` reaches
    /// half the receiver radius.
    pub fn step_warning(&self, geom: &SystemGeometry) -> Option<String> {
        let sigma = libm::sqrt(2.0 * geom.diffusion_d() * self.dt);
        (sigma >= geom.radius_a() / 2.0).then(|| {
            format!(
                "step deviation sqrt(2 D dt) = {sigma:.4} is not below a/2 = {:.4}; absorption detection is unreliable",
                geom.radius_a() / 2.0
            )
        })
    }
}

/// Fate of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    /// Zero-based receiver index, `None` if still free at `t_max`.
    pub receiver: Option<usize>,
    /// Step count at absorption (zero when not absorbed).
    pub step: u64,
    /// Absorption time `step · dt`, `f64::INFINITY` when not absorbed.
    pub time: f64,
}

/// Seed of trial `trial` under master seed `seed`: one SplitMix64 finalizer
/// round over `seed + (trial + 1) · φ`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs a single trial.
pub fn run_trial(geom: &SystemGeometry, cfg: &SimConfig, trial: u64) -> TrialOutcome {
    let centers: Vec<Vec3> = geom.centers().collect();
    run_trial_with(&centers, geom.radius_a(), geom.diffusion_d(), cfg, trial)
}

fn run_trial_with(centers: &[Vec3], a: f64, diffusion_d: f64, cfg: &SimConfig, trial: u64) -> TrialOutcome {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(trial_seed(cfg.seed, trial));
    let sigma = libm::sqrt(2.0 * diffusion_d * cfg.dt);
    let a2 = a * a;
    let mut pos = [0.0f64; 3];
    for step in 1..=cfg.total_steps() {
        for coord in pos.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *coord += sigma * z;
        }
        // Nearest center wins; strict `<` keeps ties on the lower index.
        let mut hit: Option<(usize, f64)> = None;
        for (k, c) in centers.iter().enumerate() {
            let dx = pos[0] - c[0];
            let dy = pos[1] - c[1];
            let dz = pos[2] - c[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 < a2 && hit.map_or(true, |(_, best)| d2 < best) {
                hit = Some((k, d2));
            }
        }
        if let Some((k, _)) = hit {
            return TrialOutcome { trial, receiver: Some(k), step, time: step as f64 * cfg.dt };
        }
    }
    TrialOutcome { trial, receiver: None, step: 0, time: f64::INFINITY }
}

/// Order-independent accumulator of trial outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    /// `bins[receiver][k]`: hits whose step falls in `(record_step[k-1], record_step[k]]`.
    bins: Vec<Vec<u64>>,
    trials: u64,
}

impl Tally {
    pub fn new(receivers: usize, record_times: usize) -> Self {
        Self { bins: alloc::vec![alloc::vec![0; record_times]; receivers], trials: 0 }
    }

    fn add(&mut self, outcome: &TrialOutcome, record_steps: &[u64]) {
        self.trials += 1;
        if let Some(k) = outcome.receiver {
            // Hits after the last record time are not reported.
            if let Some(bin) = record_steps.iter().position(|&s| outcome.step <= s) {
                self.bins[k][bin] += 1;
            }
        }
    }

    /// Tally of outcomes already produced by [`run_trial`].
    pub fn from_outcomes<'a, I>(receivers: usize, cfg: &SimConfig, outcomes: I) -> Self
    where
        I: IntoIterator<Item = &'a TrialOutcome>,
    {
        let record_steps = cfg.record_steps();
        let mut tally = Self::new(receivers, cfg.record_times.len());
        for outcome in outcomes {
            tally.add(outcome, &record_steps);
        }
        tally
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        for (mine, theirs) in self.bins.iter_mut().zip(other.bins) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
        self
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn into_estimate(self, cfg: &SimConfig, warnings: Vec<String>) -> SimEstimate {
        let n = self.trials;
        let hits: Vec<Vec<u64>> = self
            .bins
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0u64, |acc, &c| {
                        *acc += c;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let escape_count =
            (0..cfg.record_times.len()).map(|k| n - hits.iter().map(|row| row[k]).sum::<u64>()).collect();
        let ci_halfwidth = hits
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&h| {
                        let p = h as f64 / n as f64;
                        Z95 * libm::sqrt(p * (1.0 - p) / n as f64)
                    })
                    .collect()
            })
            .collect();
        SimEstimate { record_times: cfg.record_times.clone(), hits, trials: n, escape_count, ci_halfwidth, warnings }
    }
}

/// Monte Carlo hitting-CDF estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub record_times: Vec<f64>,
    /// Cumulative `hits[receiver][time]`.
    pub hits: Vec<Vec<u64>>,
    pub trials: u64,
    /// Trials not absorbed by any receiver by each record time.
    pub escape_count: Vec<u64>,
    /// 95% normal-approximation half-widths, `[receiver][time]`.
    pub ci_halfwidth: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl SimEstimate {
    pub fn prob(&self, receiver: usize, time_index: usize) -> f64 {
        self.hits[receiver][time_index] as f64 / self.trials as f64
    }

    pub fn probs(&self) -> Vec<Vec<f64>> {
        (0..self.hits.len()).map(|i| (0..self.record_times.len()).map(|k| self.prob(i, k)).collect()).collect()
    }

    /// Standard error of `prob(receiver, time_index)`.
    pub fn std_error(&self, receiver: usize, time_index: usize) -> f64 {
        self.ci_halfwidth[receiver][time_index] / Z95
    }
}

/// Tally of trials `range` (trial indices).
pub fn simulate_range(geom: &SystemGeometry, cfg: &SimConfig, range: Range<u64>) -> Tally {
    let centers: Vec<Vec3> = geom.centers().collect();
    let record_steps = cfg.record_steps();
    let mut tally = Tally::new(geom.len(), cfg.record_times.len());
    for trial in range {
        let outcome = run_trial_with(&centers, geom.radius_a(), geom.diffusion_d(), cfg, trial);
        tally.add(&outcome, &record_steps);
    }
    tally
}

/// Single-threaded simulation of every trial.
pub fn simulate(geom: &SystemGeometry, cfg: &SimConfig) -> Result<SimEstimate, SimError> {
    cfg.validate()?;
    let tally = simulate_range(geom, cfg, 0..cfg.trials);
    Ok(tally.into_estimate(cfg, cfg.step_warning(geom).into_iter().collect()))
}

/// Positions of one receiver on a `y, z` grid (at fixed `x`) while the others
/// stay put.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFamily {
    /// Index the moving receiver takes in every generated geometry.
    pub moving: usize,
    pub x: f64,
    pub fixed: Vec<Vec3>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    pub radius_a: f64,
    pub diffusion_d: f64,
}

impl GridFamily {
    pub fn geometry_at(&self, y: f64, z: f64) -> Result<SystemGeometry, GeometryError> {
        let mut centers = self.fixed.clone();
        centers.insert(self.moving.min(centers.len()), [self.x, y, z]);
        SystemGeometry::new(centers, self.radius_a, self.diffusion_d)
    }

    /// Grid cells in row-major order (`y` outer, `z` inner).
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.ys.iter().flat_map(|&y| self.zs.iter().map(move |&z| (y, z))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    /// Geometry invalid at this cell (overlap or transmitter inside a receiver).
    Excluded(GeometryError),
    Evaluated {
        analytical: Vec<f64>,
        simulated: Vec<f64>,
        ci_halfwidth: Vec<f64>,
        /// The geometry report carried warnings (near contact or shadowing).
        warned: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCell {
    pub y: f64,
    pub z: f64,
    pub status: CellStatus,
}

impl ErrorCell {
    /// Per-receiver `|analytical - simulated|`; `None` for excluded cells.
    pub fn abs_errors(&self) -> Option<Vec<f64>> {
        match &self.status {
            CellStatus::Excluded(_) => None,
            CellStatus::Evaluated { analytical, simulated, .. } => {
                Some(analytical.iter().zip(simulated).map(|(a, s)| (a - s).abs()).collect())
            }
        }
    }
}

/// Evaluates one grid cell at time `t`, comparing the coupled-system model
/// against the simulation produced by `sim`.
pub fn evaluate_cell<S>(
    family: &GridFamily,
    y: f64,
    z: f64,
    t: f64,
    cfg: &SimConfig,
    inv: &InversionConfig,
    sim: S,
) -> Result<ErrorCell, SimError>
where
    S: FnOnce(&SystemGeometry, &SimConfig) -> Result<SimEstimate, SimError>,
{
    let geom = match family.geometry_at(y, z) {
        Ok(g) => g,
        Err(e) => return Ok(ErrorCell { y, z, status: CellStatus::Excluded(e) }),
    };
    let cell_cfg = SimConfig { record_times: alloc::vec![t], t_max: t, ..cfg.clone() };
    cell_cfg.validate()?;
    let analytical = NFarSystem::new(&geom).hit_all(t, &Inverter::new(*inv).map_err(ChannelError::from)?)?;
    let estimate = sim(&geom, &cell_cfg)?;
    let simulated = (0..geom.len()).map(|i| estimate.prob(i, 0)).collect();
    let ci_halfwidth = estimate.ci_halfwidth.iter().map(|row| row[0]).collect();
    Ok(ErrorCell {
        y,
        z,
        status: CellStatus::Evaluated { analytical, simulated, ci_halfwidth, warned: validate(&geom).is_warned() },
    })
}

/// Absolute model error over a grid family, one simulation per valid cell.
pub fn estimate_error_map(
    family: &GridFamily,
    t: f64,
    cfg: &SimConfig,
    inv: &InversionConfig,
) -> Result<Vec<ErrorCell>, SimError> {
    family.cells().into_iter().map(|(y, z)| evaluate_cell(family, y, z, t, cfg, inv, simulate)).collect()
}
