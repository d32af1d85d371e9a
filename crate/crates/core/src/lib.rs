//! Echo state network library and experiment harness.
//!
//! The crate splits into six subsystems:
//! - [`esn`]: configuration, seeded weight construction with
//!   spectral-radius scaling, the leaky state update, and readouts;
//! - [`training`]: state harvesting, ridge-regression readout fitting,
//!   teacher-forced prediction, free-running generation, and averaged-state
//!   classification;
//! - [`benchmarks`]: deterministic generators and loaders for the four
//!   benchmark datasets;
//! - [`metrics`]: regression and classification scoring;
//! - [`hpo`]: seeded hyperparameter studies;
//! - [`harness`]: model enumeration, size sweeps, runtime profiling, and
//!   result export.

pub mod benchmarks;
pub mod error;
pub mod esn;
pub mod harness;
pub mod hpo;
pub mod metrics;
pub mod training;

pub use error::{EsnError, Result};
