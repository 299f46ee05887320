//! Krein-string spectral laboratory for one-dimensional Liouville Brownian
//! motion.
//!
//! The crate builds speed measures (Lebesgue, hand-built atomic, sampled
//! boundary Liouville measures), turns them into one-sided Stieltjes strings,
//! and computes the spectral objects of the associated gap diffusion: the
//! Krein correspondence `h`, spectral measures `σ`/`σ*`, heat kernels,
//! resolvents, hitting transforms and exit-time moments. A Monte Carlo layer
//! simulates the diffusion exactly and harvests excursions, and the
//! `experiments` module assembles all of it into a reproducible verification
//! report.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod jsonio;
pub mod krein;
pub mod linalg;
pub mod measures;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
