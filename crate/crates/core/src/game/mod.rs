//! The repeated contextual-game protocol: reward oracles, the learner
//! contract, simultaneous play and round-by-round traces.

mod context;
mod engine;
mod synthetic;
mod tabular;
mod trace;

pub use context::{ContextGenerator, ContextKey};
pub use engine::{derive_stream, play_round, run_game, NoiseModel, RoundEngine, Streams};
pub use synthetic::{make_synthetic_rkhs_game, SyntheticGame, SyntheticGameParams};
pub use tabular::TabularGame;
pub use trace::{GameTrace, TraceError, TraceRow};

use rand::RngCore;
use thiserror::Error;

use crate::kernels::KernelError;

/// Reward oracle and observation model of an N-player contextual game.
///
/// Rewards returned here are the true `r^i(a, z)` in `[0, 1]`.
pub trait ContextualGame: Send + Sync {
    fn num_players(&self) -> usize;

    fn num_actions(&self, player: usize) -> usize;

    fn reward(&self, player: usize, joint: &[usize], context: &[f64]) -> f64;

    fn rewards(&self, joint: &[usize], context: &[f64]) -> Vec<f64> {
        (0..self.num_players())
            .map(|i| self.reward(i, joint, context))
            .collect()
    }

    /// `r^i(a, a^{-i}, z)` for every own action `a`, opponents held fixed.
    fn deviation_rewards(&self, player: usize, joint: &[usize], context: &[f64]) -> Vec<f64> {
        let mut alt = joint.to_vec();
        (0..self.num_actions(player))
            .map(|a| {
                alt[player] = a;
                self.reward(player, &alt, context)
            })
            .collect()
    }

    /// Vector encoding of each own action, as fed to kernel inputs.
    fn action_vectors(&self, player: usize) -> Vec<Vec<f64>>;

    /// What the player observes of its opponents' actions at the end of a round.
    fn opponent_view(&self, player: usize, joint: &[usize]) -> Vec<f64>;

    /// [`opponent_view`](Self::opponent_view) for every player at once.
    fn opponent_views(&self, joint: &[usize]) -> Vec<Vec<f64>> {
        (0..self.num_players())
            .map(|i| self.opponent_view(i, joint))
            .collect()
    }

    /// The part of the context the player observes.
    fn context_view(&self, player: usize, context: &[f64]) -> Vec<f64> {
        let _ = player;
        context.to_vec()
    }
}

/// An action together with the distribution it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub distribution: Vec<f64>,
}

/// End-of-round information delivered to one player.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub context: &'a [f64],
    pub action: usize,
    pub opponents: &'a [f64],
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("feedback delivered without a preceding choose")]
    FeedbackWithoutChoose,
    #[error("feedback for action {got} / context does not match the pending choice (action {expected})")]
    Mismatch { expected: usize, got: usize },
    #[error("learner has no actions")]
    Uninitialized,
    #[error("sampled probability of action {action} is zero")]
    ZeroProbability { action: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] KernelError),
}

/// Per-player strategy obeying the choose/feedback protocol.
pub trait Learner: Send {
    fn num_actions(&self) -> usize;

    /// Samples an action for the observed context.
    fn choose(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<Choice, ProtocolError>;

    /// Delivers the outcome of the round of the most recent `choose`.
    fn feedback(&mut self, feedback: &Feedback<'_>) -> Result<(), ProtocolError>;
}

/// Inverse-CDF sampling over actions in index order.
pub fn sample_index(distribution: &[f64], rng: &mut dyn RngCore) -> usize {
    use rand::Rng;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in distribution.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}
