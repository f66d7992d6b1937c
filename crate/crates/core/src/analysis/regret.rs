use serde::{Deserialize, Serialize};

use super::{check_trace, group_by_context, AnalysisError};
use crate::game::{ContextualGame, GameTrace};

/// Contextual regret of one player and the comparator policy attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub player: usize,
    pub rounds: usize,
    /// `max_π Σ_t r(π(z_t), a_t^{-i}, z_t) − Σ_t r(a_t, z_t)`.
    pub regret: f64,
    /// `Σ_t r(a_t, z_t)` under the oracle.
    pub realized: f64,
    /// Value of the best policy in hindsight.
    pub best: f64,
    /// Best action per distinct context, in order of first appearance.
    pub policy: Vec<(Vec<f64>, usize)>,
}

impl RegretReport {
    pub fn average(&self) -> f64 {
        self.regret / self.rounds as f64
    }
}

/// Contextual regret of `player`, using one best action per observed
/// context (lowest index on ties).
///
/// The comparator is a fixed policy while the realized play may adapt to
/// the opponents, so the result can be negative.
pub fn contextual_regret(
    trace: &GameTrace,
    player: usize,
    game: &dyn ContextualGame,
) -> Result<RegretReport, AnalysisError> {
    check_trace(trace, game)?;
    if player >= game.num_players() {
        return Err(AnalysisError::Input(format!("no player {player}")));
    }
    let k = game.num_actions(player);
    let rows = trace.rows();
    let mut realized = 0.0;
    let mut best = 0.0;
    let mut policy = Vec::new();
    for (context, rounds) in group_by_context(trace) {
        let mut sums = vec![0.0; k];
        for &t in &rounds {
            let row = &rows[t];
            let dev = game.deviation_rewards(player, &row.actions, &row.context);
            for (s, r) in sums.iter_mut().zip(&dev) {
                *s += r;
            }
            realized += dev[row.actions[player]];
        }
        let mut arg = 0;
        for a in 1..k {
            if sums[a] > sums[arg] {
                arg = a;
            }
        }
        best += sums[arg];
        policy.push((context, arg));
    }
    Ok(RegretReport {
        player,
        rounds: rows.len(),
        regret: best - realized,
        realized,
        best,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{TabularGame, TraceRow};

    fn row(round: usize, z: f64, actions: Vec<usize>, n: usize) -> TraceRow {
        TraceRow {
            round,
            context: vec![z],
            actions,
            rewards: vec![0.0; n],
            observed: vec![0.0; n],
            distributions: vec![Vec::new(); n],
        }
    }

    #[test]
    fn always_playing_the_worse_action() {
        // One player, two actions, rewards 0.5 and 1.0.
        let g = TabularGame::new(vec![2], vec![vec![0.0]], vec![vec![vec![0.5], vec![1.0]]]).unwrap();
        let trace = GameTrace::new(1, (1..=10).map(|t| row(t, 0.0, vec![0], 1)).collect());
        let r = contextual_regret(&trace, 0, &g).unwrap();
        assert!((r.regret - 5.0).abs() < 1e-12);
        assert_eq!(r.policy, vec![(vec![0.0], 1)]);
    }

    #[test]
    fn reward_independent_of_own_action() {
        // Player 0's reward depends only on player 1's action.
        let payoffs = vec![vec![
            vec![0.2, 0.0],
            vec![0.9, 0.0],
            vec![0.2, 0.0],
            vec![0.9, 0.0],
        ]];
        let g = TabularGame::new(vec![2, 2], vec![vec![0.0]], payoffs).unwrap();
        let acts = [[0, 1], [1, 0], [1, 1], [0, 0]];
        let trace = GameTrace::new(2, acts.iter().enumerate().map(|(t, a)| row(t + 1, 0.0, a.to_vec(), 2)).collect());
        let r = contextual_regret(&trace, 0, &g).unwrap();
        assert_eq!(r.regret, 0.0);
    }

    #[test]
    fn ties_pick_the_lowest_action() {
        let g = TabularGame::new(vec![3], vec![vec![0.0]], vec![vec![vec![0.1], vec![0.7], vec![0.7]]]).unwrap();
        let trace = GameTrace::new(1, vec![row(1, 0.0, vec![2], 1)]);
        let r = contextual_regret(&trace, 0, &g).unwrap();
        assert_eq!(r.policy[0].1, 1);
        assert_eq!(r.regret, 0.0);
    }

    #[test]
    fn adaptive_play_can_beat_every_fixed_policy() {
        // Matching pennies for player 0: reward 1 when matching player 1.
        let payoffs = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]];
        let g = TabularGame::new(vec![2, 2], vec![vec![0.0]], payoffs).unwrap();
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![0, 0], 2), row(2, 0.0, vec![1, 1], 2)]);
        let r = contextual_regret(&trace, 0, &g).unwrap();
        assert_eq!(r.regret, -1.0);
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let g = TabularGame::new(vec![2], vec![vec![0.0]], vec![vec![vec![0.5], vec![1.0]]]).unwrap();
        let trace = GameTrace::new(1, vec![row(1, 0.0, vec![2], 1)]);
        assert!(matches!(contextual_regret(&trace, 0, &g), Err(AnalysisError::Input(_))));
        let trace = GameTrace::new(1, vec![row(1, 0.0, vec![0], 1)]);
        assert!(contextual_regret(&trace, 1, &g).is_err());
    }
}
