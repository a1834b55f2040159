//! Entropy phase transitions for systems that learn their parameters from a
//! one-shot training phase.
//!
//! The library evaluates entropy surfaces `F(tau, eps)` for a small registry
//! of system models, differentiates them along the data and diagonal
//! conditioning regimes, reads off the training-based mutual information as
//! the jump between the two derivatives at the training/data boundary, and
//! optimizes the training fraction. Exact finite-length formulas, seeded Monte
//! Carlo estimators and a random-linear-code experiment over the induced
//! erasure channel cross-check the asymptotic results.

pub mod analytic;
pub mod coding;
mod error;
pub mod gf2;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod oracle;
pub mod seed;
pub mod surface;

pub use error::{Error, Result};
pub use model::{
    blocklength, channel_count, GainSource, ModelSpec, PhaseOffset, SimConfig, TrainingFraction, ValidatedModel,
};
pub use surface::{EntropySurface, ScaledEntropyPoint};
