//! Conformal measures and equilibrium (KMS-type) states for flows built
//! over a homeomorphism and a continuous potential.
//!
//! Given a system φ (irrational rotation, finite cycle, squaring map, or
//! a conjugated rotation) and a potential F, this crate answers, with
//! explicit numerics and honesty about horizons:
//!
//! * for which inverse temperatures β does an e^{βF}-conformal measure
//!   exist ([`conformal::existence_check`], [`conformal::spectrum_scan`]);
//! * how to construct one (windowed orbit-average construction, atomic
//!   measures on periodic or summable orbits, densities for coboundary
//!   potentials);
//! * which Krieger-type class the associated von Neumann factor falls in
//!   ([`classify`]);
//! * exact Gibbs weights and face states for finite cyclic orbits
//!   ([`kms_finite`]);
//! * structural properties of the flow itself — inner, approximately
//!   inner ([`flowprops`]).
//!
//! Two purpose-built potential families ([`potential::build_appendix_a`],
//! [`potential::build_appendix_b`]) realize prescribed spectra: orbit-tent
//! potentials whose conformal sets are one-sided β-intervals with chosen
//! endpoints, and sawtooth coboundary-like potentials with bounded orbit
//! sums at rotation return times.

pub mod birkhoff;
pub mod classify;
pub mod cli;
pub mod conformal;
pub mod dynsys;
pub mod error;
pub mod flowprops;
pub mod kms_finite;
pub mod numerics;
pub mod potential;
pub mod report;

pub use error::{Error, Result};
