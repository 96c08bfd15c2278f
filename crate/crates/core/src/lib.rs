//! Simulation and optimization of cascaded nonlinear power amplifiers.
//!
//! The crate models a chain of `K` third-order memoryless PAs with thermal
//! noise injected before every stage, provides the first-order
//! "equivalent PA" summary of such a chain, and tunes input power and
//! per-stage gains by projected Levenberg-Marquardt so that the chain output
//! tracks a linear reference as closely as possible.
//!
//! Module map:
//!
//! * [`signal`]: 16-QAM excitation, root-raised-cosine shaping, AWGN draws.
//! * [`cascade`]: exact cascade forward model and the equivalent-PA approximation.
//! * [`metrics`]: NMSE, Welch PSD, ACLR and AM/AM point clouds.
//! * [`optimizer`]: residual construction, bounded least-squares solver, grid oracle.
//! * [`experiment`]: scenario and optimization sweeps with CSV/JSON export.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cascade;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod optimizer;
pub mod signal;

pub use cascade::{CascadeConfig, EquivalentPa, PaStage};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Manifest, RunRecord};
pub use metrics::{MetricsReport, PsdEstimate};
pub use optimizer::{Mode, OptimizationResult, OptimizationSpec, ScenarioInit};
pub use signal::{NoiseRealization, Signal};

pub use num_complex::Complex64;
