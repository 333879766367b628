//! Reinforcement-learning feature selection for hazard-state classification
//! of windowed vibration signals.
//!
//! The crate covers the whole pipeline: a physics-grounded signal synthesizer,
//! preprocessing and the 23-feature bank, a bagged decision-tree oracle, the
//! subset-growing environment and its PPO agent, the classical baselines and
//! the benchmark harness.

// Range checks use `!(x > lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adhesion;
pub mod baselines;
pub mod dataset;
pub mod dsp;
pub mod env;
pub mod error;
pub mod features;
pub mod forest;
pub mod harness;
pub mod io;
pub mod ppo;
pub mod rng;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureVector, N_FEATURES};
pub use synth::{AdhesionLabel, ConditionSpec, SignalRecord};
