//! Hitting-probability models.
//!
//! Every multi-receiver model rests on the same coupling: a molecule that
//! first hits receiver `j` at time `τ` would otherwise have gone on to hit
//! receiver `i` by `t` with probability `p̄(t - τ, R_ji)`, treating the hit
//! point as the surface point of `j` nearest the transmitter. In the Laplace
//! domain this gives, for every receiver `i`,
//!
//! ```text
//! H_i(s) + Σ_{j≠i} s·P̄(s, R_ji)·H_j(s) = P̄(s, r_i)
//! ```
//!
//! The one-, two- and symmetric three-receiver cases invert in closed form
//! (as erfc series); the general case is inverted numerically.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

use crate::geometry::{GeometryError, SystemGeometry};
use crate::laplace::{p_bar, s_p_bar, InversionConfig, Inverter, LaplaceError, LaplaceFn};
use crate::linalg::{solve_in_place, LinalgError};

/// Relative tolerance used to recognise a symmetric three-receiver layout.
pub const SYMMETRY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
    #[error("time must be positive, got {0}")]
    InvalidTime(f64),
    #[error("distance {x} must exceed the receiver radius {a}")]
    InsideReceiver { x: f64, a: f64 },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("model {model} needs {expected} receivers, geometry has {got}")]
    ReceiverCount { model: Model, expected: usize, got: usize },
    #[error("geometry is not symmetric (receivers not equidistant from the transmitter and from each other)")]
    NotSymmetric,
    #[error("series ratio {ratio} >= 1; the series does not converge")]
    SeriesDiverges { ratio: f64 },
    #[error("series not converged after {} terms (partial value {}, remainder bound {})", .partial.terms, .partial.value, .partial.remainder_bound)]
    NotConverged { partial: SeriesSum },
    #[error("coupled system singular at s = {s_re} + {s_im}i: {source}")]
    Singular { s_re: f64, s_im: f64, source: LinalgError },
    #[error("model {0} cannot be evaluated analytically")]
    NotAnalytical(Model),
    #[error("invalid series config: {0}")]
    InvalidSeriesConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Single,
    Two,
    Three,
    Symmetric,
    NGeneral,
    Simulation,
}

impl Model {
    pub const fn as_str(self) -> &'static str {
        match self {
            Model::Single => "single",
            Model::Two => "two",
            Model::Three => "three",
            Model::Symmetric => "symmetric",
            Model::NGeneral => "n-general",
            Model::Simulation => "simulation",
        }
    }

    /// The most specific analytical model for a geometry: the symmetric series
    /// for a symmetric three-receiver layout whose series converges, otherwise
    /// the exact-count model for one to three receivers, otherwise the general
    /// N-receiver system.
    pub fn auto(geom: &SystemGeometry) -> Model {
        match geom.len() {
            1 => Model::Single,
            2 => Model::Two,
            3 => match geom.symmetric_distances(SYMMETRY_REL_TOL) {
                Some((_, big_r)) if 2.0 * geom.radius_a() / big_r < 1.0 => Model::Symmetric,
                _ => Model::Three,
            },
            _ => Model::NGeneral,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "single" => Model::Single,
            "two" => Model::Two,
            "three" => Model::Three,
            "symmetric" => Model::Symmetric,
            "n-general" => Model::NGeneral,
            "simulation" => Model::Simulation,
            other => return Err(alloc::format!("unknown model '{other}'")),
        })
    }
}

/// Truncation of the erfc series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_terms: 200 }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(ChannelError::InvalidSeriesConfig("rel_tol must be positive"));
        }
        if self.max_terms == 0 {
            return Err(ChannelError::InvalidSeriesConfig("max_terms must be at least 1"));
        }
        Ok(())
    }
}

/// A truncated series value with the number of terms used and a bound on the
/// omitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
    pub remainder_bound: f64,
}

fn check_time(t: f64) -> Result<(), ChannelError> {
    if t.is_nan() || t <= 0.0 {
        return Err(ChannelError::InvalidTime(t));
    }
    Ok(())
}

fn check_positive(what: &'static str, value: f64) -> Result<(), ChannelError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ChannelError::NonPositive { what, value });
    }
    Ok(())
}

fn check_outside(x: f64, a: f64) -> Result<(), ChannelError> {
    if x.is_nan() || x <= a {
        return Err(ChannelError::InsideReceiver { x, a });
    }
    Ok(())
}

#[inline]
fn erfc_at(distance: f64, diffusion_d: f64, t: f64) -> f64 {
    if t.is_infinite() {
        return 1.0;
    }
    libm::erfc(distance / libm::sqrt(4.0 * diffusion_d * t))
}

/// Isolated receiver: `(a / r) · erfc((r - a) / sqrt(4 D t))`. `t = ∞` gives `a / r`.
pub fn hit_single(t: f64, r: f64, a: f64, diffusion_d: f64) -> Result<f64, ChannelError> {
    check_time(t)?;
    check_positive("radius", a)?;
    check_positive("diffusion coefficient", diffusion_d)?;
    check_outside(r, a)?;
    Ok(a / r * erfc_at(r - a, diffusion_d, t))
}

/// Two receivers, closed-form series for receiver `target` (0 or 1).
///
/// Term `n` carries the factor `(a² / (R_12 R_21))^n`; the series stops once
/// that factor for the next term falls below `cfg.rel_tol`.
pub fn hit_two(t: f64, geom: &SystemGeometry, target: usize, cfg: &SeriesConfig) -> Result<SeriesSum, ChannelError> {
    check_time(t)?;
    cfg.validate()?;
    if geom.len() != 2 {
        return Err(ChannelError::ReceiverCount { model: Model::Two, expected: 2, got: geom.len() });
    }
    let other = 1 - target.min(1);
    let r1 = geom.radial_distance(target)?;
    let r2 = geom.radial_distance(other)?;
    let r12 = geom.proxy_distance(target, other)?;
    let r21 = geom.proxy_distance(other, target)?;
    let a = geom.radius_a();
    let d = geom.diffusion_d();

    let ratio = a * a / (r12 * r21);
    if ratio >= 1.0 {
        return Err(ChannelError::SeriesDiverges { ratio });
    }
    let direct = a / r1;
    let relay = a * a / (r2 * r21);
    let tail_scale = direct.max(relay) / (1.0 - ratio);

    let mut value = 0.0;
    let mut envelope = 1.0;
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        let hop = nf * (r21 - a) + nf * (r12 - a);
        let term = direct * erfc_at(r1 - a + hop, d, t) - relay * erfc_at(r2 - a + (r21 - a) + hop, d, t);
        value += envelope * term;
        envelope *= ratio;
        if envelope < cfg.rel_tol {
            return Ok(SeriesSum { value, terms: n + 1, remainder_bound: envelope * tail_scale });
        }
    }
    Err(ChannelError::NotConverged {
        partial: SeriesSum { value, terms: cfg.max_terms, remainder_bound: envelope * tail_scale },
    })
}

/// Laplace transform of the three-receiver hitting probability of one
/// receiver, assembled from the closed-form solution of the 3×3 coupled
/// system. The geometry is stored rotated so that the target is first.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeFarTransform {
    r: [f64; 3],
    big_r: [[f64; 3]; 3],
    a: f64,
    d: f64,
}

impl ThreeFarTransform {
    fn p(&self, s: Complex64, x: f64) -> Complex64 {
        p_bar(s, x, self.a, self.d)
    }
}

impl LaplaceFn for ThreeFarTransform {
    fn eval(&self, s: Complex64) -> Complex64 {
        let [r1, r2, r3] = self.r;
        let m = &self.big_r;
        let p = |x| self.p(s, x);
        let (p_r1, p_r2, p_r3) = (p(r1), p(r2), p(r3));
        let (p12, p13) = (p(m[0][1]), p(m[0][2]));
        let (p21, p23) = (p(m[1][0]), p(m[1][2]));
        let (p31, p32) = (p(m[2][0]), p(m[2][1]));

        let alpha = p_r2 * p21 + p_r3 * p31;
        let beta = -p_r1 * p23 * p32 + p_r2 * p23 * p31 + p_r3 * p32 * p21;
        let gamma = p12 * p21 + p32 * p23 + p13 * p31;
        let delta = p12 * p23 * p31 + p13 * p32 * p21;

        let s2 = s * s;
        (p_r1 - s * alpha + s2 * beta) / (Complex64::new(1.0, 0.0) - s2 * gamma + s2 * s * delta)
    }
}

/// `H_target(s)` for a three-receiver geometry.
pub fn three_far_transform(geom: &SystemGeometry, target: usize) -> Result<ThreeFarTransform, ChannelError> {
    if geom.len() != 3 {
        return Err(ChannelError::ReceiverCount { model: Model::Three, expected: 3, got: geom.len() });
    }
    let rotated = geom.rotated_to(target)?;
    let rs = rotated.radial_distances();
    let m = rotated.proxy_matrix();
    let mut big_r = [[f64::INFINITY; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        big_r[i].copy_from_slice(row);
    }
    Ok(ThreeFarTransform { r: [rs[0], rs[1], rs[2]], big_r, a: rotated.radius_a(), d: rotated.diffusion_d() })
}

pub fn hit_three(t: f64, geom: &SystemGeometry, target: usize, inv: &InversionConfig) -> Result<f64, ChannelError> {
    check_time(t)?;
    let transform = three_far_transform(geom, target)?;
    Ok(Inverter::new(*inv)?.invert(&transform, t)?)
}

/// Symmetric three-receiver series
/// `(a / r) Σ_n (-2a / R)^n erfc((r - a + n (R - a)) / sqrt(4 D t))`.
///
/// The series alternates with a geometrically shrinking envelope, so the first
/// omitted term bounds the error; summation stops once a term drops below
/// `cfg.rel_tol` times the partial sum.
pub fn hit_symmetric(
    t: f64,
    r: f64,
    big_r: f64,
    a: f64,
    diffusion_d: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesSum, ChannelError> {
    check_time(t)?;
    cfg.validate()?;
    check_positive("radius", a)?;
    check_positive("diffusion coefficient", diffusion_d)?;
    check_outside(r, a)?;
    check_outside(big_r, a)?;
    let ratio = 2.0 * a / big_r;
    if ratio >= 1.0 {
        return Err(ChannelError::SeriesDiverges { ratio });
    }
    let term = |n: usize| {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sign * a / r * libm::pow(ratio, nf) * erfc_at(r - a + nf * (big_r - a), diffusion_d, t)
    };
    let mut value = 0.0;
    for n in 0..cfg.max_terms {
        let current = term(n);
        value += current;
        if current.abs() <= cfg.rel_tol * value.abs() {
            return Ok(SeriesSum { value, terms: n + 1, remainder_bound: term(n + 1).abs() });
        }
    }
    Err(ChannelError::NotConverged {
        partial: SeriesSum { value, terms: cfg.max_terms, remainder_bound: term(cfg.max_terms).abs() },
    })
}

/// Eventual absorption fraction of each receiver in the symmetric layout,
/// `(a / r) / (1 + 2a / R)`.
pub fn hit_symmetric_asymptotic(r: f64, big_r: f64, a: f64) -> Result<f64, ChannelError> {
    check_positive("radius", a)?;
    check_outside(r, a)?;
    if big_r.is_nan() || big_r <= 0.0 {
        return Err(ChannelError::NonPositive { what: "proxy distance", value: big_r });
    }
    Ok(a / r / (1.0 + 2.0 * a / big_r))
}

/// Precomputed distances of an N-receiver geometry and the coupled
/// Laplace-domain system built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct NFarSystem {
    r: Vec<f64>,
    /// `big_r[i][j] = R_ij`.
    big_r: Vec<Vec<f64>>,
    a: f64,
    d: f64,
}

impl NFarSystem {
    pub fn new(geom: &SystemGeometry) -> Self {
        Self { r: geom.radial_distances(), big_r: geom.proxy_matrix(), a: geom.radius_a(), d: geom.diffusion_d() }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Solves `H_i + Σ_{j≠i} s P̄(s, R_ji) H_j = P̄(s, r_i)` for all `i`.
    pub fn solve_into(&self, s: Complex64, out: &mut [Complex64]) -> Result<(), ChannelError> {
        for (o, &r) in out.iter_mut().zip(&self.r) {
            *o = p_bar(s, r, self.a, self.d);
        }
        self.solve_coupled(s, out)
    }

    /// Solves the coupled system at `s` for an arbitrary right-hand side,
    /// overwriting `rhs` with the solution.
    pub fn solve_coupled(&self, s: Complex64, rhs: &mut [Complex64]) -> Result<(), ChannelError> {
        let n = self.len();
        let mut matrix = alloc::vec![Complex64::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] =
                    if i == j { Complex64::new(1.0, 0.0) } else { s_p_bar(s, self.big_r[j][i], self.a, self.d) };
            }
        }
        solve_in_place(&mut matrix, rhs).map_err(|source| ChannelError::Singular { s_re: s.re, s_im: s.im, source })?;
        Ok(())
    }

    pub fn transforms(&self, s: Complex64) -> Result<Vec<Complex64>, ChannelError> {
        let mut out = alloc::vec![Complex64::zero(); self.len()];
        self.solve_into(s, &mut out)?;
        Ok(out)
    }

    /// Hitting probabilities of every receiver at `t`.
    pub fn hit_all(&self, t: f64, inverter: &Inverter) -> Result<Vec<f64>, ChannelError> {
        check_time(t)?;
        inverter.invert_vec(self.len(), t, |s, out| self.solve_into(s, out))
    }

    /// `t → ∞` limit: `h_i + Σ_{j≠i} (a / R_ji) h_j = a / r_i`.
    pub fn asymptotic(&self) -> Result<Vec<f64>, ChannelError> {
        let n = self.len();
        let mut matrix = alloc::vec![0.0; n * n];
        let mut rhs: Vec<f64> = self.r.iter().map(|r| self.a / r).collect();
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = if i == j { 1.0 } else { self.a / self.big_r[j][i] };
            }
        }
        solve_in_place(&mut matrix, &mut rhs).map_err(|source| ChannelError::Singular {
            s_re: 0.0,
            s_im: 0.0,
            source,
        })?;
        Ok(rhs)
    }
}

/// `H_i(s)` for every receiver at a real `s > 0`.
pub fn n_far_transforms(geom: &SystemGeometry, s: f64) -> Result<Vec<f64>, ChannelError> {
    check_positive("s", s)?;
    let h = NFarSystem::new(geom).transforms(Complex64::new(s, 0.0))?;
    Ok(h.into_iter().map(|v| v.re).collect())
}

pub fn hit_n(t: f64, geom: &SystemGeometry, target: usize, inv: &InversionConfig) -> Result<f64, ChannelError> {
    geom.radial_distance(target)?;
    let all = NFarSystem::new(geom).hit_all(t, &Inverter::new(*inv)?)?;
    Ok(all[target])
}

pub fn hit_n_asymptotic(geom: &SystemGeometry) -> Result<Vec<f64>, ChannelError> {
    NFarSystem::new(geom).asymptotic()
}

/// Per-receiver hitting probabilities on a caller-supplied time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingCurve {
    pub times: Vec<f64>,
    /// `probs[receiver][time]`.
    pub probs: Vec<Vec<f64>>,
    pub model: Model,
}

impl HittingCurve {
    /// Largest decrease between consecutive times over all receivers.
    pub fn max_decrease(&self) -> f64 {
        self.probs.iter().flat_map(|row| row.windows(2).map(|w| w[0] - w[1])).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_decrease() <= slack
    }

    pub fn in_unit_interval(&self, slack: f64) -> bool {
        self.probs.iter().flatten().all(|&p| (-slack..=1.0 + slack).contains(&p))
    }
}

/// Evaluates `model` for every receiver of `geom` at every time.
pub fn hitting_curve(
    geom: &SystemGeometry,
    times: &[f64],
    model: Model,
    inv: &InversionConfig,
    series: &SeriesConfig,
) -> Result<HittingCurve, ChannelError> {
    let n = geom.len();
    let need = |expected: usize| {
        if n == expected {
            Ok(())
        } else {
            Err(ChannelError::ReceiverCount { model, expected, got: n })
        }
    };
    let mut probs = alloc::vec![Vec::with_capacity(times.len()); n];
    match model {
        Model::Single => {
            need(1)?;
            let r = geom.radial_distance(0)?;
            for &t in times {
                probs[0].push(hit_single(t, r, geom.radius_a(), geom.diffusion_d())?);
            }
        }
        Model::Two => {
            need(2)?;
            for &t in times {
                for (target, row) in probs.iter_mut().enumerate() {
                    row.push(hit_two(t, geom, target, series)?.value);
                }
            }
        }
        Model::Three => {
            need(3)?;
            let inverter = Inverter::new(*inv)?;
            let transforms = (0..3).map(|i| three_far_transform(geom, i)).collect::<Result<Vec<_>, _>>()?;
            for &t in times {
                check_time(t)?;
                for (row, transform) in probs.iter_mut().zip(&transforms) {
                    row.push(inverter.invert(transform, t)?);
                }
            }
        }
        Model::Symmetric => {
            need(3)?;
            let (r, big_r) = geom.symmetric_distances(SYMMETRY_REL_TOL).ok_or(ChannelError::NotSymmetric)?;
            for &t in times {
                let value = hit_symmetric(t, r, big_r, geom.radius_a(), geom.diffusion_d(), series)?.value;
                for row in probs.iter_mut() {
                    row.push(value);
                }
            }
        }
        Model::NGeneral => {
            let inverter = Inverter::new(*inv)?;
            let system = NFarSystem::new(geom);
            for &t in times {
                for (row, value) in probs.iter_mut().zip(system.hit_all(t, &inverter)?) {
                    row.push(value);
                }
            }
        }
        Model::Simulation => return Err(ChannelError::NotAnalytical(model)),
    }
    Ok(HittingCurve { times: times.to_vec(), probs, model })
}
