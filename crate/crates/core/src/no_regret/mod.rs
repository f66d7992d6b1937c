//! Multiplicative weights and the kernel-based contextual learner built on it.

mod cgpmw;
mod epsilon_net;
mod mw;
mod rates;

pub use cgpmw::{CgpmwConfig, CgpmwLearner, ScoreRecord, StrategyConfig, UcbTiming};
pub use epsilon_net::{covering_bound, EpsilonNet};
pub use mw::{exp_weights, mw_distribution, mw_regret_audit, mw_regret_bound, AuditError, MWState};
pub use rates::{default_radius, rate_finite_or_net, rate_stochastic, RateRule};
