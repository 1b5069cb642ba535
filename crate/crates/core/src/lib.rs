//! Directed polymers in heavy-tailed random environments and their
//! continuum limits.

pub mod appendix;
pub mod config;
pub mod error;
pub mod io;
pub mod lab;
pub mod lattice;
pub mod noise;
pub mod quad;
pub mod rng;
pub mod run;
pub mod stats;
pub mod tail;

pub use error::{Error, Result};
pub use rng::RngKey;
pub use config::{ExperimentConfig, ExperimentKind};
pub use tail::{LawFamily, ScalingPlan, TailLaw, TruncatedMoment, TruncationSpec};
