//! Transmitter/receiver scene and the distances the channel formulas consume.
//!
//! The transmitter is always at the origin. Receivers are addressed by a
//! zero-based position in the geometry; [`Receiver::label`] carries the
//! one-based label used in reports and CSV output.
//!
//! Besides the transmitter distance `r_i` and the angle `φ_ij` between two
//! receiver centers, the multi-receiver models need the proxy distance
//! `R_ij`: the distance from the point of receiver `i` nearest the transmitter
//! to the center of receiver `j`. It is not symmetric.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("receiver radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("diffusion coefficient must be positive and finite, got {0}")]
    NonPositiveDiffusion(f64),
    #[error("geometry has no receivers")]
    NoReceivers,
    #[error("receiver {label} has a non-finite coordinate")]
    NonFiniteCenter { label: usize },
    #[error("transmitter lies inside or on receiver {label} (r = {r}, a = {a})")]
    TransmitterInside { label: usize, r: f64, a: f64 },
    #[error("receivers {first} and {second} overlap (center distance {distance} <= 2a = {limit})")]
    Overlap { first: usize, second: usize, distance: f64, limit: f64 },
    #[error("unknown receiver index {index} (geometry has {count})")]
    UnknownReceiver { index: usize, count: usize },
    #[error("pairwise quantity requested for receiver {0} with itself")]
    SameReceiver(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub center: Vec3,
    /// One-based label.
    pub label: usize,
}

impl Receiver {
    /// Distance from the transmitter to the receiver center.
    pub fn radial_distance(&self) -> f64 {
        norm(self.center)
    }
}

/// Validated scene: receivers with a common radius in an unbounded medium.
///
/// Construction enforces `a > 0`, `D > 0`, `r_i > a` for every receiver and
/// `||A_i - A_j|| > 2a` for every pair (tangent spheres are rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    receivers: Vec<Receiver>,
    radius_a: f64,
    diffusion_d: f64,
}

impl SystemGeometry {
    pub fn new<I>(centers: I, radius_a: f64, diffusion_d: f64) -> Result<Self, GeometryError>
    where
        I: IntoIterator<Item = Vec3>,
    {
        let receivers = centers.into_iter().enumerate().map(|(i, center)| Receiver { center, label: i + 1 }).collect();
        let geom = Self { receivers, radius_a, diffusion_d };
        geom.check()?;
        Ok(geom)
    }

    fn check(&self) -> Result<(), GeometryError> {
        let a = self.radius_a;
        if !(a.is_finite() && a > 0.0) {
            return Err(GeometryError::NonPositiveRadius(a));
        }
        if !(self.diffusion_d.is_finite() && self.diffusion_d > 0.0) {
            return Err(GeometryError::NonPositiveDiffusion(self.diffusion_d));
        }
        if self.receivers.is_empty() {
            return Err(GeometryError::NoReceivers);
        }
        for rx in &self.receivers {
            if rx.center.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::NonFiniteCenter { label: rx.label });
            }
            let r = rx.radial_distance();
            if r <= a {
                return Err(GeometryError::TransmitterInside { label: rx.label, r, a });
            }
        }
        for (i, first) in self.receivers.iter().enumerate() {
            for second in &self.receivers[i + 1..] {
                let distance = norm(sub(first.center, second.center));
                if distance <= 2.0 * a {
                    return Err(GeometryError::Overlap {
                        first: first.label,
                        second: second.label,
                        distance,
                        limit: 2.0 * a,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.receivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.receivers
    }

    pub fn radius_a(&self) -> f64 {
        self.radius_a
    }

    pub fn diffusion_d(&self) -> f64 {
        self.diffusion_d
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.receivers.iter().map(|rx| rx.center)
    }

    fn receiver(&self, index: usize) -> Result<&Receiver, GeometryError> {
        self.receivers.get(index).ok_or(GeometryError::UnknownReceiver { index, count: self.receivers.len() })
    }

    fn pair(&self, i: usize, j: usize) -> Result<(&Receiver, &Receiver), GeometryError> {
        let first = self.receiver(i)?;
        let second = self.receiver(j)?;
        if i == j {
            return Err(GeometryError::SameReceiver(i));
        }
        Ok((first, second))
    }

    /// `r_i = ||A_i||`.
    pub fn radial_distance(&self, i: usize) -> Result<f64, GeometryError> {
        self.receiver(i).map(Receiver::radial_distance)
    }

    /// `φ_ij`, the angle at the transmitter between the two receiver centers, in `[0, π]`.
    pub fn angle_between(&self, i: usize, j: usize) -> Result<f64, GeometryError> {
        let (first, second) = self.pair(i, j)?;
        Ok(angle(first.center, second.center))
    }

    /// `R_ij = sqrt((r_i - a)² + r_j² - 2 (r_i - a) r_j cos φ_ij)`.
    pub fn proxy_distance(&self, i: usize, j: usize) -> Result<f64, GeometryError> {
        let (first, second) = self.pair(i, j)?;
        Ok(proxy(first.radial_distance(), second.radial_distance(), angle(first.center, second.center), self.radius_a))
    }

    /// All `r_i` in receiver order.
    pub fn radial_distances(&self) -> Vec<f64> {
        self.receivers.iter().map(Receiver::radial_distance).collect()
    }

    /// Dense `R` matrix; the diagonal is set to `f64::INFINITY` (no self coupling).
    pub fn proxy_matrix(&self) -> Vec<Vec<f64>> {
        let r = self.radial_distances();
        let a = self.radius_a;
        (0..self.len())
            .map(|i| {
                (0..self.len())
                    .map(|j| {
                        if i == j {
                            f64::INFINITY
                        } else {
                            let phi = angle(self.receivers[i].center, self.receivers[j].center);
                            proxy(r[i], r[j], phi, a)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Keeps only the receivers at `indices`, in the given order. Labels are
    /// renumbered from one.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, GeometryError> {
        let centers = indices.iter().map(|&i| self.receiver(i).map(|rx| rx.center)).collect::<Result<Vec<_>, _>>()?;
        Self::new(centers, self.radius_a, self.diffusion_d)
    }

    /// Same centers with `target` moved to the front and the remaining
    /// receivers following cyclically.
    pub fn rotated_to(&self, target: usize) -> Result<Self, GeometryError> {
        self.receiver(target)?;
        let n = self.len();
        let order: Vec<usize> = (0..n).map(|k| (target + k) % n).collect();
        self.subset(&order)
    }

    pub fn with_radius(&self, radius_a: f64) -> Result<Self, GeometryError> {
        Self::new(self.centers(), radius_a, self.diffusion_d)
    }

    pub fn with_diffusion(&self, diffusion_d: f64) -> Result<Self, GeometryError> {
        Self::new(self.centers(), self.radius_a, diffusion_d)
    }

    /// Returns the common `(r, R)` when every `r_i` agrees and every `R_ij`
    /// (i ≠ j) agrees, each within `rel_tol` relative to the first value.
    /// Requires at least two receivers.
    pub fn symmetric_distances(&self, rel_tol: f64) -> Option<(f64, f64)> {
        if self.len() < 2 {
            return None;
        }
        let r = self.radial_distances();
        let big_r = self.proxy_matrix();
        let r0 = r[0];
        let big_r0 = big_r[0][1];
        let close = |x: f64, y: f64| (x - y).abs() <= rel_tol * y.abs();
        let radial_ok = r.iter().all(|&ri| close(ri, r0));
        let proxy_ok = (0..self.len())
            .flat_map(|i| (0..self.len()).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .all(|(i, j)| close(big_r[i][j], big_r0));
        (radial_ok && proxy_ok).then_some((r0, big_r0))
    }

    pub fn report(&self) -> GeometryReport {
        validate(self)
    }
}

/// Three receivers on a circle of radius `d` centered at `[w, 0, 0]`, in the
/// plane `x = w`, spaced by 2π/3. Every receiver is equidistant from the
/// transmitter and from each other.
pub fn uca_geometry(w: f64, d: f64, radius_a: f64, diffusion_d: f64) -> Result<SystemGeometry, GeometryError> {
    let centers = (0..3).map(|i| {
        let theta = 2.0 * PI * i as f64 / 3.0;
        [w, d * libm::cos(theta), d * libm::sin(theta)]
    });
    SystemGeometry::new(centers, radius_a, diffusion_d)
}

/// Intended receiver at `[r, 0, 0]` with two competitors at `±theta` in the
/// `xy` plane, all at distance `r` from the transmitter.
pub fn angle_layout(r: f64, theta: f64, radius_a: f64, diffusion_d: f64) -> Result<SystemGeometry, GeometryError> {
    let centers = [
        [r, 0.0, 0.0],
        [r * libm::cos(theta), r * libm::sin(theta), 0.0],
        [r * libm::cos(-theta), r * libm::sin(-theta), 0.0],
    ];
    SystemGeometry::new(centers, radius_a, diffusion_d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryWarning {
    /// Two centers closer than `4a`; the closest-point coupling loses accuracy.
    NearContact { first: usize, second: usize, distance: f64 },
    /// The center of `near` lies inside the cone subtended at the transmitter
    /// by the farther receiver `far`, blocking its line of sight.
    Shadowed { near: usize, far: usize, angle: f64, half_width: f64 },
}

impl fmt::Display for GeometryWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryWarning::NearContact { first, second, distance } => write!(
                f,
                "receivers {first} and {second} are close (center distance {distance:.4} < 4a); model accuracy degrades"
            ),
            GeometryWarning::Shadowed { near, far, angle, half_width } => write!(
                f,
                "receiver {near} shadows receiver {far} (angle {angle:.4} rad < cone half-width {half_width:.4} rad); model accuracy degrades"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub r: Vec<f64>,
    /// `phi[i][j]`, `None` on the diagonal.
    pub phi: Vec<Vec<Option<f64>>>,
    /// `proxy_r[i][j] = R_ij`, `None` on the diagonal.
    pub proxy_r: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<GeometryWarning>,
}

impl GeometryReport {
    pub fn is_warned(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Computes every distance and angle of a geometry and flags the
/// configurations where the closest-point approximation is known to be weak.
pub fn validate(geom: &SystemGeometry) -> GeometryReport {
    let n = geom.len();
    let a = geom.radius_a;
    let r = geom.radial_distances();
    let centers: Vec<Vec3> = geom.centers().collect();

    let mut phi = alloc::vec![alloc::vec![None; n]; n];
    let mut proxy_r = alloc::vec![alloc::vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let p = angle(centers[i], centers[j]);
                phi[i][j] = Some(p);
                proxy_r[i][j] = Some(proxy(r[i], r[j], p, a));
            }
        }
    }

    let mut warnings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let distance = norm(sub(centers[i], centers[j]));
            if distance < 4.0 * a {
                warnings.push(GeometryWarning::NearContact { first: i + 1, second: j + 1, distance });
            }
        }
    }
    for near in 0..n {
        for far in 0..n {
            if near == far || r[near] >= r[far] {
                continue;
            }
            let half_width = libm::asin(a / r[far]);
            let between = phi[near][far].unwrap_or(PI);
            if between < half_width {
                warnings.push(GeometryWarning::Shadowed { near: near + 1, far: far + 1, angle: between, half_width });
            }
        }
    }

    GeometryReport { r, phi, proxy_r, warnings }
}

pub(crate) fn norm(v: Vec3) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

fn sub(u: Vec3, v: Vec3) -> Vec3 {
    [u[0] - v[0], u[1] - v[1], u[2] - v[2]]
}

fn angle(u: Vec3, v: Vec3) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cos = (dot / (norm(u) * norm(v))).clamp(-1.0, 1.0);
    libm::acos(cos)
}

fn proxy(r_i: f64, r_j: f64, phi_ij: f64, a: f64) -> f64 {
    let near = r_i - a;
    let sq = near * near + r_j * r_j - 2.0 * near * r_j * libm::cos(phi_ij);
    libm::sqrt(sq.max(0.0))
}
