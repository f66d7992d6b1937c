//! Learning in repeated contextual games: kernel-based no-regret learners,
//! baselines, equilibrium and welfare analysis, and a contextual traffic
//! routing game.

pub mod analysis;
pub mod baselines;
pub mod game;
pub mod kernels;
pub mod no_regret;
pub mod routing;
