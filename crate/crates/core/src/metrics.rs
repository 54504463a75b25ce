//! Security and cooperation figures of merit.
//!
//! `t = f64::INFINITY` selects the eventual (final-value) regime, which is
//! solved directly from the `s → 0` limit of the coupled system instead of
//! inverting at a large time.

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::channel::{self, ChannelError, NFarSystem};
use crate::geometry::{GeometryError, SystemGeometry};
use crate::laplace::{s_p_bar, InversionConfig, Inverter};

/// Relative loss `q` of the intended receiver's hitting probability caused by
/// the competing receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceResult {
    pub t: f64,
    pub q: f64,
    pub target: usize,
}

/// Total absorption of all receivers normalised by an isolated receiver's
/// eventual absorption fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGainResult {
    pub t: f64,
    pub s_gain: f64,
    pub n_receivers: usize,
}

fn all_receivers(geom: &SystemGeometry, t: f64, inv: &InversionConfig) -> Result<Vec<f64>, ChannelError> {
    let system = NFarSystem::new(geom);
    if t.is_infinite() && t > 0.0 {
        system.asymptotic()
    } else {
        system.hit_all(t, &Inverter::new(*inv)?)
    }
}

/// `q = (p̄(t, r_target) - h_target(t)) / p̄(t, r_target)`.
///
/// Fails with [`ChannelError::InvalidTime`] when the isolated probability
/// underflows to zero and the ratio is undefined. Inversion round-off can push
/// `q` a hair outside `[0, 1]`; the result is clamped.
pub fn malicious_influence(
    t: f64,
    geom: &SystemGeometry,
    target: usize,
    inv: &InversionConfig,
) -> Result<InfluenceResult, ChannelError> {
    let r = geom.radial_distance(target)?;
    let isolated = channel::hit_single(t, r, geom.radius_a(), geom.diffusion_d())?;
    if isolated <= 0.0 {
        return Err(ChannelError::InvalidTime(t));
    }
    let coupled = all_receivers(geom, t, inv)?[target];
    let q = (isolated - coupled) / isolated;
    Ok(InfluenceResult { t, q: q.clamp(0.0, 1.0), target })
}

/// Symmetric layout, `t → ∞`: `q = 1 / (1 + R / (2a))`.
pub fn malicious_influence_asymptotic_symmetric(a: f64, big_r: f64) -> Result<InfluenceResult, ChannelError> {
    check_positive("radius", a)?;
    check_positive("proxy distance", big_r)?;
    Ok(InfluenceResult { t: f64::INFINITY, q: 1.0 / (1.0 + big_r / (2.0 * a)), target: 0 })
}

/// `s(t) = Σ_i h_i(t) / (a / r_1)`; the denominator is the eventual fraction
/// of an isolated first receiver, so `s(t)` starts near zero and grows.
pub fn array_gain(t: f64, geom: &SystemGeometry, inv: &InversionConfig) -> Result<ArrayGainResult, ChannelError> {
    let r1 = geom.radial_distance(0)?;
    let total: f64 = all_receivers(geom, t, inv)?.iter().sum();
    Ok(ArrayGainResult { t, s_gain: total / (geom.radius_a() / r1), n_receivers: geom.len() })
}

/// Symmetric three-receiver layout, `t → ∞`: `s = 3 / (1 + 2a / R)`.
pub fn array_gain_asymptotic_symmetric(a: f64, big_r: f64) -> Result<ArrayGainResult, ChannelError> {
    check_positive("radius", a)?;
    check_positive("proxy distance", big_r)?;
    Ok(ArrayGainResult { t: f64::INFINITY, s_gain: 3.0 / (1.0 + 2.0 * a / big_r), n_receivers: 3 })
}

/// How much receiver `removed` lowers `target`'s hitting probability:
/// `h_target(t)` without it minus `h_target(t)` with it.
///
/// Splitting the full system into the others (`A`) and `removed` (`k`) gives
/// `H'_S - H_S = A⁻¹ c · H_k` with `c_i = s P̄(s, R_ki)`, so the gap is
/// inverted directly. Subtracting two separately inverted probabilities
/// would lose it to rounding whenever the coupling is below `f64` resolution.
pub fn competitor_gap(
    t: f64,
    geom: &SystemGeometry,
    target: usize,
    removed: usize,
    inv: &InversionConfig,
) -> Result<f64, ChannelError> {
    if target == removed {
        return Err(GeometryError::SameReceiver(target).into());
    }
    geom.radial_distance(target)?;
    let keep: Vec<usize> = (0..geom.len()).filter(|&i| i != removed).collect();
    let reduced = NFarSystem::new(&geom.subset(&keep)?);
    let full = NFarSystem::new(geom);
    let to_removed: Vec<f64> = keep.iter().map(|&i| geom.proxy_distance(removed, i)).collect::<Result<_, _>>()?;
    let row = keep.iter().position(|&i| i == target).expect("target is kept");
    let (a, d) = (geom.radius_a(), geom.diffusion_d());
    let inverter = Inverter::new(*inv)?;
    let mut h_full = alloc::vec![Complex64::zero(); geom.len()];
    let mut y = alloc::vec![Complex64::zero(); keep.len()];
    let gap = inverter.invert_vec(1, t, |s, out| {
        full.solve_into(s, &mut h_full)?;
        for (yi, &big_r) in y.iter_mut().zip(&to_removed) {
            *yi = s_p_bar(s, big_r, a, d);
        }
        reduced.solve_coupled(s, &mut y)?;
        out[0] = y[row] * h_full[removed];
        Ok::<(), ChannelError>(())
    })?;
    Ok(gap[0])
}

/// The intended receiver (index 0) plus the first `m` competitors of `geom`.
/// Which competitors are kept is immaterial for a symmetric layout.
pub fn with_malicious(geom: &SystemGeometry, m: usize) -> Result<SystemGeometry, GeometryError> {
    let keep: Vec<usize> = (0..=m).collect();
    geom.subset(&keep)
}

fn check_positive(what: &'static str, value: f64) -> Result<(), ChannelError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ChannelError::NonPositive { what, value });
    }
    Ok(())
}
