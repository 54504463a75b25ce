#![no_std]

//! Hitting-probability models for 3-D diffusion channels with several
//! fully-absorbing spherical receivers.
//!
//! A point transmitter sits at the origin and releases a molecule at `t = 0`.
//! Each receiver is a sphere of common radius `a` that absorbs the molecule on
//! first contact. The crate computes the probability that the molecule is
//! absorbed by a given receiver within time `t`:
//!
//! * closed forms for one and two receivers ([`channel::hit_single`],
//!   [`channel::hit_two`]),
//! * the three-receiver Laplace-domain solution and its numerical inversion
//!   ([`channel::three_far_transform`], [`channel::hit_three`]),
//! * the symmetric (uniform circular array) series ([`channel::hit_symmetric`]),
//! * the general N-receiver coupled linear system ([`channel::hit_n`]),
//! * security and cooperation metrics ([`metrics`]),
//! * a seeded Brownian-motion particle simulator used as an oracle
//!   ([`simulator`]).
//!
//! Units are fixed: micrometers, seconds and micrometers²/second.
//!
//! The crate is `no_std` and only needs `alloc`.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod metrics;
pub mod simulator;

pub use channel::{ChannelError, HittingCurve, Model, SeriesConfig, SeriesSum};
pub use geometry::{GeometryError, GeometryReport, Receiver, SystemGeometry, Vec3};
pub use laplace::{InversionConfig, InversionMethod, Inverter, LaplaceError, LaplaceFn};
pub use metrics::{ArrayGainResult, InfluenceResult};
pub use simulator::{SimConfig, SimError, SimEstimate, TrialOutcome};
