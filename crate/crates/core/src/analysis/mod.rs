//! Post-hoc analysis of played traces against the true reward oracle:
//! contextual regret, empirical policies and c-CCE gaps, welfare and
//! smoothness certificates.

mod equilibrium;
mod regret;
mod report;
mod welfare;

pub use equilibrium::{
    c_zeta_cce_gap, cce_gap, concentration_bound, empirical_policy, CZetaGap, ContextEntry, EmpiricalPolicy,
};
pub use regret::{contextual_regret, RegretReport};
pub use report::{analyze, AnalysisOptions, AnalysisReport, ConcentrationReport, PlayerSummary, WelfareReport};
pub use welfare::{
    certify_smoothness, efficiency_bound, max_smoothness_lambda, optimal_contextual_welfare, smoothness_verify,
    EfficiencyBound, SmoothnessCertificate, SmoothnessCheck, SmoothnessWitness, WelfareOptimum,
};

use std::collections::HashMap;

use thiserror::Error;

use crate::game::{ContextKey, ContextualGame, GameTrace};

/// Joint action spaces larger than this are not enumerated.
pub const MAX_JOINT_ACTIONS: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("joint action space has {size} elements, above the enumeration limit {limit}")]
    TooLarge { size: f64, limit: f64 },
}

/// Checks that the trace is non-empty and consistent with the game.
pub(crate) fn check_trace(trace: &GameTrace, game: &dyn ContextualGame) -> Result<(), AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::Input("empty trace".into()));
    }
    let n = game.num_players();
    if trace.num_players() != n {
        return Err(AnalysisError::Input(format!(
            "trace has {} players, game has {n}",
            trace.num_players()
        )));
    }
    for row in trace.rows() {
        if row.actions.len() != n {
            return Err(AnalysisError::Input(format!("round {} has {} actions", row.round, row.actions.len())));
        }
        for (i, a) in row.actions.iter().enumerate() {
            if *a >= game.num_actions(i) {
                return Err(AnalysisError::Input(format!(
                    "round {}: action {a} out of range for player {i}",
                    row.round
                )));
            }
        }
    }
    Ok(())
}

/// Rounds grouped by exact context, in order of first appearance.
pub(crate) fn group_by_context(trace: &GameTrace) -> Vec<(Vec<f64>, Vec<usize>)> {
    let mut index: HashMap<ContextKey, usize> = HashMap::new();
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (t, row) in trace.rows().iter().enumerate() {
        let key = ContextKey::new(&row.context);
        let g = *index.entry(key).or_insert_with(|| {
            groups.push((row.context.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(t);
    }
    groups
}

/// Size of the joint action space, as a float to avoid overflow.
pub fn joint_space_size(game: &dyn ContextualGame) -> f64 {
    (0..game.num_players()).map(|i| game.num_actions(i) as f64).product()
}

/// Every joint action in row-major order (player 0 most significant).
pub fn enumerate_joint_actions(game: &dyn ContextualGame) -> Result<Vec<Vec<usize>>, AnalysisError> {
    let size = joint_space_size(game);
    if size > MAX_JOINT_ACTIONS {
        return Err(AnalysisError::TooLarge {
            size,
            limit: MAX_JOINT_ACTIONS,
        });
    }
    let sizes: Vec<usize> = (0..game.num_players()).map(|i| game.num_actions(i)).collect();
    if sizes.iter().any(|k| *k == 0) {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0usize; sizes.len()];
    loop {
        out.push(cur.clone());
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < sizes[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TabularGame;

    #[test]
    fn enumeration_is_row_major() {
        let g = TabularGame::new(vec![2, 3], vec![vec![0.0]], vec![vec![vec![0.0, 0.0]; 6]]).unwrap();
        let all = enumerate_joint_actions(&g).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        for (n, j) in all.iter().enumerate() {
            assert_eq!(g.flat_index(j), n);
        }
    }
}
