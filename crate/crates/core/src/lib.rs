//! Estimation for mixtures of linear regressions with EM, plus the
//! surrounding apparatus: synthetic data generation, oracle-perturbed and
//! data-driven initialization, separation and signal-to-noise
//! diagnostics, permutation-matched error metrics, contraction traces,
//! Monte Carlo event diagnostics, and an alternating-minimization
//! baseline.
//!
//! Observations follow y = ⟨x, β_Z⟩ + σ·e with x and e standard normal
//! and Z a categorical label with weights π. The estimators never see Z.
//!
//! Everything is generic over the floating-point scalar through
//! [`Scalar`]; the `*64`/`*32` aliases fix f64 (the default choice) and
//! f32. All randomized code takes explicit seeds and derives one
//! counter-based stream per record, so results are reproducible across
//! runs, thread counts, and batch splits.

pub mod baseline;
pub mod datagen;
pub mod em_core;
pub mod error;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod real_json;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MixtureParams64 = model::MixtureParams<f64>;
pub type MixtureParams32 = model::MixtureParams<f32>;
pub type SeparationStats64 = model::SeparationStats<f64>;
pub type ConditionConstants64 = model::ConditionConstants<f64>;
pub type ConditionReport64 = model::ConditionReport<f64>;
pub type Dataset64 = datagen::Dataset<f64>;
pub type Dataset32 = datagen::Dataset<f32>;
pub type EMState64 = em_core::EMState<f64>;
pub type EMState32 = em_core::EMState<f32>;
pub type EMConfig64 = em_core::EMConfig<f64>;
pub type RunTrace64 = em_core::RunTrace<f64>;
pub type InitSpec64 = init::InitSpec<f64>;
pub type MatchedError64 = metrics::MatchedError<f64>;
pub type EventStats64 = metrics::EventStats<f64>;
