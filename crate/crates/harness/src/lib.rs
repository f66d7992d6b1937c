//! Experiment orchestration for contextual game simulations: configs,
//! learner assignment, seeded runs and on-disk artifacts.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod learners;
pub mod spec;

pub use config::{ExperimentConfig, Preset};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentSummary};
pub use spec::{GameSpec, SimGame};
