//! Comparison learners sharing the choose/feedback protocol.

mod exp3;
mod gpmw;
mod no_learning;
mod robust_lin_exp3;

pub use exp3::{Exp3, Exp3Config, Exp3Core};
pub use gpmw::{gpmw, ContextBlind, Gpmw};
pub use no_learning::NoLearning;
pub use robust_lin_exp3::{ContextDistribution, FeatureMap, RobustLinExp3, RobustLinExp3Params};
