//! Multi-threaded drivers around the core simulator.
//!
//! Trials are cut into fixed-size chunks that do not depend on the worker
//! count. Every trial draws from its own seeded stream and chunk tallies are
//! summed, so the estimate is identical for any number of workers.

use std::io::Write;

use farchan_core::simulator::{evaluate_cell, run_trial, simulate_range, ErrorCell, GridFamily, Tally};
use farchan_core::{InversionConfig, SimConfig, SimError, SimEstimate, SystemGeometry, TrialOutcome};
use rayon::prelude::*;

use crate::error::CliError;
use crate::io::{csv_writer, num};

const CHUNK: u64 = 256;

/// Worker pool with `workers` threads (all available cores when `None`).
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = match workers {
        Some(0) => return Err(CliError::Invariant("workers must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

fn chunks(trials: u64) -> Vec<std::ops::Range<u64>> {
    (0..trials.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials)).collect()
}

fn warnings(geom: &SystemGeometry, cfg: &SimConfig) -> Vec<String> {
    cfg.step_warning(geom).into_iter().collect()
}

/// Runs every trial on the current rayon pool.
pub fn simulate(geom: &SystemGeometry, cfg: &SimConfig) -> Result<SimEstimate, SimError> {
    cfg.validate()?;
    let tallies: Vec<Tally> =
        chunks(cfg.trials).into_par_iter().map(|range| simulate_range(geom, cfg, range)).collect();
    let total = tallies.into_iter().fold(Tally::new(geom.len(), cfg.record_times.len()), Tally::merge);
    Ok(total.into_estimate(cfg, warnings(geom, cfg)))
}

/// Like [`simulate`], also returning every trial's outcome in trial order.
pub fn simulate_with_outcomes(
    geom: &SystemGeometry,
    cfg: &SimConfig,
) -> Result<(SimEstimate, Vec<TrialOutcome>), CliError> {
    cfg.validate()?;
    let outcomes: Vec<TrialOutcome> =
        chunks(cfg.trials).into_par_iter().flat_map_iter(|range| range.map(|k| run_trial(geom, cfg, k))).collect();
    let estimate = Tally::from_outcomes(geom.len(), cfg, &outcomes).into_estimate(cfg, warnings(geom, cfg));
    Ok((estimate, outcomes))
}

/// Raw CSV: `trial,receiver_index,absorption_time`; 1-based receiver labels,
/// `-1` and an empty time for molecules still free at the horizon.
pub fn write_outcomes<W: Write>(out: W, outcomes: &[TrialOutcome]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["trial", "receiver_index", "absorption_time"])?;
    for o in outcomes {
        let (receiver, time) = match o.receiver {
            Some(i) => ((i + 1).to_string(), num(o.time)),
            None => ("-1".to_string(), String::new()),
        };
        w.write_record([o.trial.to_string(), receiver, time])?;
    }
    w.flush()?;
    Ok(())
}

/// Error map over a grid family; cells run concurrently and come back in
/// grid order.
pub fn error_map(
    family: &GridFamily,
    t: f64,
    cfg: &SimConfig,
    inv: &InversionConfig,
) -> Result<Vec<ErrorCell>, CliError> {
    family
        .cells()
        .into_par_iter()
        .map(|(y, z)| evaluate_cell(family, y, z, t, cfg, inv, simulate).map_err(CliError::from))
        .collect()
}
