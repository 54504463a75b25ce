//! Laplace-domain primitives and numerical inversion.
//!
//! Both inversion methods are written as a quadrature rule
//! `f(t) ≈ Σ_k Re(w_k · F(s_k))` over method-specific nodes, so one node set
//! serves every component of a vector-valued transform.
//!
//! * Fixed Talbot (Abate–Valkó) evaluates `F` on a deformed Bromwich contour in
//!   the complex plane. Default, ~1e-12 absolute accuracy in `f64` for the
//!   channel transforms.
//! * Gaver–Stehfest evaluates `F` on the positive real axis only. Its weights
//!   alternate in sign and grow quickly with the order, so it tops out around
//!   1e-6 in `f64`. Kept as an independent cross-check.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaplaceError {
    #[error("inversion time must be positive and finite, got {0}")]
    NonPositiveTime(f64),
    #[error("transform evaluated at its pole s = 0; use the final value instead")]
    Pole,
    #[error("evaluation point x = {x} lies inside the receiver (a = {a})")]
    InsideReceiver { x: f64, a: f64 },
    #[error("non-finite transform value at node s = {re} + {im}i while inverting at t = {t}")]
    Overflow { t: f64, re: f64, im: f64 },
    #[error("invalid inversion config: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "final value did not converge after {refinements} refinements (last estimate {estimate}, change {change})"
    )]
    NotConverged { refinements: usize, estimate: f64, change: f64 },
}

/// Scalar function of the Laplace variable.
///
/// Implementations must be evaluable anywhere off the closed negative real
/// axis: the Talbot contour crosses into `Re(s) < 0`.
pub trait LaplaceFn: Sync {
    fn eval(&self, s: Complex64) -> Complex64;
}

impl<F> LaplaceFn for F
where
    F: Fn(Complex64) -> Complex64 + Sync + ?Sized,
{
    fn eval(&self, s: Complex64) -> Complex64 {
        self(s)
    }
}

/// Laplace transform of the single-receiver hitting probability,
/// `(a / (s x)) · exp(-(x - a) · sqrt(s / D))`.
pub fn p_bar_laplace(s: f64, x: f64, a: f64, diffusion_d: f64) -> Result<f64, LaplaceError> {
    if s == 0.0 {
        return Err(LaplaceError::Pole);
    }
    if x < a {
        return Err(LaplaceError::InsideReceiver { x, a });
    }
    Ok(p_bar(Complex64::new(s, 0.0), x, a, diffusion_d).re)
}

/// Unchecked complex form of [`p_bar_laplace`]. An infinite `x` means no
/// coupling and yields zero.
#[inline]
pub fn p_bar(s: Complex64, x: f64, a: f64, diffusion_d: f64) -> Complex64 {
    if x.is_infinite() {
        return Complex64::zero();
    }
    s_p_bar(s, x, a, diffusion_d) / s
}

/// `s · P̄(s, x) = (a / x) · exp(-(x - a) · sqrt(s / D))`, the coupling kernel.
#[inline]
pub fn s_p_bar(s: Complex64, x: f64, a: f64, diffusion_d: f64) -> Complex64 {
    if x.is_infinite() {
        return Complex64::zero();
    }
    (-(x - a) * (s / diffusion_d).sqrt()).exp() * (a / x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InversionMethod {
    GaverStehfest,
    Talbot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub method: InversionMethod,
    /// Number of terms (Gaver–Stehfest, even, 8..=18) or contour nodes (Talbot, 8..=64).
    pub order: usize,
    /// Target accuracy; also the convergence threshold of [`final_value`].
    pub abs_tol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::talbot(24)
    }
}

impl InversionConfig {
    pub const fn talbot(order: usize) -> Self {
        Self { method: InversionMethod::Talbot, order, abs_tol: 1e-10 }
    }

    pub const fn gaver_stehfest(order: usize) -> Self {
        Self { method: InversionMethod::GaverStehfest, order, abs_tol: 1e-5 }
    }

    pub fn validate(&self) -> Result<(), LaplaceError> {
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(LaplaceError::InvalidConfig("abs_tol must be positive"));
        }
        match self.method {
            InversionMethod::GaverStehfest => {
                if self.order % 2 != 0 || !(8..=18).contains(&self.order) {
                    return Err(LaplaceError::InvalidConfig("gaver-stehfest order must be even and in 8..=18"));
                }
            }
            InversionMethod::Talbot => {
                if !(8..=64).contains(&self.order) {
                    return Err(LaplaceError::InvalidConfig("talbot order must be in 8..=64"));
                }
            }
        }
        Ok(())
    }
}

/// One quadrature node of an inversion rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub s: Complex64,
    pub weight: Complex64,
}

/// Inversion rule for a fixed config. Gaver–Stehfest weights are computed
/// once here, in exact rational arithmetic.
#[derive(Debug, Clone)]
pub struct Inverter {
    config: InversionConfig,
    stehfest: Vec<f64>,
}

impl Inverter {
    pub fn new(config: InversionConfig) -> Result<Self, LaplaceError> {
        config.validate()?;
        let stehfest = match config.method {
            InversionMethod::GaverStehfest => stehfest_weights(config.order),
            InversionMethod::Talbot => Vec::new(),
        };
        Ok(Self { config, stehfest })
    }

    pub fn config(&self) -> &InversionConfig {
        &self.config
    }

    /// Quadrature nodes for time `t`.
    pub fn nodes(&self, t: f64) -> Result<Vec<Node>, LaplaceError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(LaplaceError::NonPositiveTime(t));
        }
        Ok(match self.config.method {
            InversionMethod::GaverStehfest => {
                let scale = LN_2 / t;
                self.stehfest
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| Node {
                        s: Complex64::new((k + 1) as f64 * scale, 0.0),
                        weight: Complex64::new(v * scale, 0.0),
                    })
                    .collect()
            }
            InversionMethod::Talbot => talbot_nodes(self.config.order, t),
        })
    }

    pub fn invert<F: LaplaceFn + ?Sized>(&self, f: &F, t: f64) -> Result<f64, LaplaceError> {
        let mut sum = 0.0;
        for node in self.nodes(t)? {
            let term = node.weight * f.eval(node.s);
            if !term.re.is_finite() {
                return Err(LaplaceError::Overflow { t, re: node.s.re, im: node.s.im });
            }
            sum += term.re;
        }
        Ok(sum)
    }

    /// Inverts a vector-valued transform component-wise. `f` fills its output
    /// slice with the transform at `s`; every call receives a slice of length
    /// `dim`.
    pub fn invert_vec<F, E>(&self, dim: usize, t: f64, mut f: F) -> Result<Vec<f64>, E>
    where
        F: FnMut(Complex64, &mut [Complex64]) -> Result<(), E>,
        E: From<LaplaceError>,
    {
        let mut sums = alloc::vec![0.0; dim];
        let mut values = alloc::vec![Complex64::zero(); dim];
        for node in self.nodes(t)? {
            f(node.s, &mut values)?;
            for (sum, v) in sums.iter_mut().zip(&values) {
                let term = node.weight * v;
                if !term.re.is_finite() {
                    return Err(LaplaceError::Overflow { t, re: node.s.re, im: node.s.im }.into());
                }
                *sum += term.re;
            }
        }
        Ok(sums)
    }
}

/// Numerical inverse Laplace transform of `f` at `t`.
pub fn invert<F: LaplaceFn + ?Sized>(f: &F, t: f64, config: &InversionConfig) -> Result<f64, LaplaceError> {
    Inverter::new(*config)?.invert(f, t)
}

fn talbot_nodes(order: usize, t: f64) -> Vec<Node> {
    let m = order as f64;
    let r = 2.0 * m / (5.0 * t);
    let scale = r / m;
    let mut nodes = Vec::with_capacity(order);
    nodes.push(Node { s: Complex64::new(r, 0.0), weight: Complex64::new(0.5 * scale * libm::exp(r * t), 0.0) });
    for k in 1..order {
        let theta = k as f64 * PI / m;
        let cot = libm::cos(theta) / libm::sin(theta);
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let weight = (s * t).exp() * Complex64::new(1.0, sigma) * scale;
        nodes.push(Node { s, weight });
    }
    nodes
}

/// Stehfest coefficients `V_1..V_N`, summed exactly and rounded once.
fn stehfest_weights(order: usize) -> Vec<f64> {
    let half = order / 2;
    let factorials: Vec<BigInt> = core::iter::once(BigInt::one())
        .chain((1..=2 * order).scan(BigInt::one(), |acc, k| {
            *acc *= k;
            Some(acc.clone())
        }))
        .collect();
    let fact = |n: usize| factorials[n].clone();

    (1..=order)
        .map(|k| {
            let mut sum = BigRational::zero();
            for j in k.div_ceil(2)..=k.min(half) {
                let numer = BigInt::from(j).pow(half as u32) * fact(2 * j);
                let denom = fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k);
                sum += BigRational::new(numer, denom);
            }
            if (k + half) % 2 == 1 {
                sum = -sum;
            }
            sum.to_f64().unwrap_or(f64::NAN)
        })
        .collect()
}

const FINAL_VALUE_S0: f64 = 1e-3;
const FINAL_VALUE_MAX_REFINEMENTS: usize = 40;
const RICHARDSON_DEPTH: usize = 6;

/// `lim_{s→0⁺} s·F(s)` by Richardson extrapolation over `s_k = s_0 · 2^{-k}`.
///
/// Diffusion transforms expand in powers of `sqrt(s)` near the origin, so the
/// extrapolation eliminates error terms `(sqrt s)^m` with ratio `2^{-m/2}` per
/// halving.
pub fn final_value<F: LaplaceFn + ?Sized>(f: &F, config: &InversionConfig) -> Result<f64, LaplaceError> {
    config.validate()?;
    let sample = |k: usize| {
        let s = FINAL_VALUE_S0 * libm::exp2(-(k as f64));
        (Complex64::new(s, 0.0) * f.eval(Complex64::new(s, 0.0))).re
    };

    // `row` holds the current row of the Richardson table.
    let mut row: Vec<f64> = alloc::vec![sample(0)];
    let mut previous = row[0];
    let mut change = f64::INFINITY;
    for k in 1..=FINAL_VALUE_MAX_REFINEMENTS {
        let mut next = Vec::with_capacity(RICHARDSON_DEPTH + 1);
        next.push(sample(k));
        for m in 1..=row.len().min(RICHARDSON_DEPTH) {
            let q = libm::pow(2.0, -(m as f64) / 2.0);
            let value = (next[m - 1] - q * row[m - 1]) / (1.0 - q);
            next.push(value);
        }
        let estimate = *next.last().unwrap_or(&next[0]);
        if !estimate.is_finite() {
            return Err(LaplaceError::Overflow {
                t: f64::INFINITY,
                re: FINAL_VALUE_S0 * libm::exp2(-(k as f64)),
                im: 0.0,
            });
        }
        change = (estimate - previous).abs();
        if change < config.abs_tol && k >= 2 {
            return Ok(estimate);
        }
        previous = estimate;
        row = next;
    }
    Err(LaplaceError::NotConverged { refinements: FINAL_VALUE_MAX_REFINEMENTS, estimate: previous, change })
}
