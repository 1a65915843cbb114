//! Training dynamics of scale-invariant parameters.
//!
//! A feedforward classifier whose weight rows sit behind smoothed batch
//! normalization is invariant to the scale of each row. Gradient descent on
//! such a row grows its norm monotonically, which shrinks its effective
//! learning rate `eta / |w|^2` without any schedule. This crate implements
//! that network with an exact backward pass, the two-rate GD/SGD/PSGD and
//! intrinsic optimizers, checkers for the invariance identities, empirical
//! smoothness probing and log-log rate measurement, plus an experiment
//! harness that writes reproducible CSV/JSON artifacts.
//!
//! Modules, bottom-up:
//!
//! - [`numcore`]: dense vectors/matrices and the seeded [`numcore::Rng`]
//! - [`netmodel`]: the network, loss and analytic gradient
//! - [`invariance`]: finite-difference oracle and lemma checkers
//! - [`optim`]: update rules, schedules and the trainer
//! - [`analysis`]: smoothness probes, bound constants, rate fits
//! - [`dataset`] and [`harness`]: data, configs, runs and sweeps

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod invariance;
pub mod netmodel;
pub mod numcore;
pub mod optim;

pub use error::{Error, Result};

/// 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
