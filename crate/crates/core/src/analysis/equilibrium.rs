use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_trace, group_by_context, joint_space_size, AnalysisError};
use crate::game::{ContextKey, ContextualGame, GameTrace};

/// Joint-action frequencies observed at one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub context: Vec<f64>,
    pub count: usize,
    /// Distinct joint actions with their play counts, in order of first play.
    pub support: Vec<(Vec<usize>, usize)>,
}

impl ContextEntry {
    pub fn distribution(&self) -> Vec<(Vec<usize>, f64)> {
        let n = self.count as f64;
        self.support.iter().map(|(a, c)| (a.clone(), *c as f64 / n)).collect()
    }
}

/// `ρ_T`: empirical joint-action distribution per observed context,
/// uniform over all joint actions elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPolicy {
    actions: Vec<usize>,
    rounds: usize,
    entries: Vec<ContextEntry>,
    #[serde(skip)]
    index: HashMap<ContextKey, usize>,
}

impl EmpiricalPolicy {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn entry(&self, context: &[f64]) -> Option<&ContextEntry> {
        self.index.get(&ContextKey::new(context)).map(|&i| &self.entries[i])
    }

    /// `ρ_T(z)` as (joint action, probability) pairs.
    pub fn distribution(&self, context: &[f64]) -> Result<Vec<(Vec<usize>, f64)>, AnalysisError> {
        if let Some(e) = self.entry(context) {
            return Ok(e.distribution());
        }
        let size: f64 = self.actions.iter().map(|k| *k as f64).product();
        if size > super::MAX_JOINT_ACTIONS {
            return Err(AnalysisError::TooLarge {
                size,
                limit: super::MAX_JOINT_ACTIONS,
            });
        }
        let p = 1.0 / size;
        let mut out = Vec::with_capacity(size as usize);
        let mut cur = vec![0usize; self.actions.len()];
        'outer: loop {
            out.push((cur.clone(), p));
            for i in (0..cur.len()).rev() {
                cur[i] += 1;
                if cur[i] < self.actions[i] {
                    continue 'outer;
                }
                cur[i] = 0;
            }
            return Ok(out);
        }
    }

    /// Empirical context distribution `ζ_T`.
    pub fn context_distribution(&self) -> Vec<(Vec<f64>, f64)> {
        let t = self.rounds as f64;
        self.entries
            .iter()
            .map(|e| (e.context.clone(), e.count as f64 / t))
            .collect()
    }
}

pub fn empirical_policy(trace: &GameTrace, game: &dyn ContextualGame) -> Result<EmpiricalPolicy, AnalysisError> {
    check_trace(trace, game)?;
    let rows = trace.rows();
    let mut entries = Vec::new();
    let mut index = HashMap::new();
    for (context, rounds) in group_by_context(trace) {
        let mut pos: HashMap<&[usize], usize> = HashMap::new();
        let mut support: Vec<(Vec<usize>, usize)> = Vec::new();
        for &t in &rounds {
            let a = rows[t].actions.as_slice();
            match pos.get(a) {
                Some(&j) => support[j].1 += 1,
                None => {
                    pos.insert(a, support.len());
                    support.push((a.to_vec(), 1));
                }
            }
        }
        index.insert(ContextKey::new(&context), entries.len());
        entries.push(ContextEntry {
            context,
            count: rounds.len(),
            support,
        });
    }
    Ok(EmpiricalPolicy {
        actions: (0..game.num_players()).map(|i| game.num_actions(i)).collect(),
        rounds: rows.len(),
        entries,
        index,
    })
}

/// Per-player gain from the best deviation policy under `ρ(z)` at one
/// context: `max_a E r(a, a^{-i}, z) − E r(a, z)`.
fn deviation_gains(game: &dyn ContextualGame, context: &[f64], dist: &[(Vec<usize>, f64)]) -> Vec<f64> {
    let n = game.num_players();
    (0..n)
        .map(|i| {
            let mut dev = vec![0.0; game.num_actions(i)];
            let mut played = 0.0;
            for (joint, p) in dist {
                let r = game.deviation_rewards(i, joint, context);
                for (d, v) in dev.iter_mut().zip(&r) {
                    *d += p * v;
                }
                played += p * r[joint[i]];
            }
            dev.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - played
        })
        .collect()
}

/// Smallest `ε` for which `ρ_T` satisfies the time-averaged c-CCE
/// inequality for every player and policy.
///
/// Not clamped at zero: a negative value means every player strictly
/// prefers complying.
pub fn cce_gap(trace: &GameTrace, game: &dyn ContextualGame) -> Result<f64, AnalysisError> {
    let policy = empirical_policy(trace, game)?;
    let weights = policy.context_distribution();
    Ok(gap_under(game, &policy, &weights)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

fn gap_under(
    game: &dyn ContextualGame,
    policy: &EmpiricalPolicy,
    weights: &[(Vec<f64>, f64)],
) -> Result<Vec<f64>, AnalysisError> {
    let mut per_player = vec![0.0; game.num_players()];
    for (z, w) in weights {
        if *w == 0.0 {
            continue;
        }
        let dist = policy.distribution(z)?;
        for (acc, g) in per_player.iter_mut().zip(deviation_gains(game, z, &dist)) {
            *acc += w * g;
        }
    }
    Ok(per_player)
}

/// c-ζ-CCE gap of an empirical policy together with the concentration
/// bound that accompanies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CZetaGap {
    pub epsilon: f64,
    pub per_player: Vec<f64>,
}

/// Smallest `ε` such that `ρ` is an ε-c-ζ-CCE, with the outer expectation
/// over the supplied finite `ζ`.
///
/// Every observed context must lie in the support of `ζ`.
pub fn c_zeta_cce_gap(
    policy: &EmpiricalPolicy,
    game: &dyn ContextualGame,
    zeta: &[(Vec<f64>, f64)],
) -> Result<CZetaGap, AnalysisError> {
    if zeta.is_empty() {
        return Err(AnalysisError::Input("empty context distribution".into()));
    }
    if zeta.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(AnalysisError::Input("context weights must be non-negative".into()));
    }
    let total: f64 = zeta.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::Input(format!("context weights sum to {total}")));
    }
    let mut keys = HashMap::new();
    for (z, w) in zeta {
        if keys.insert(ContextKey::new(z), *w).is_some() {
            return Err(AnalysisError::Input(format!("context {z:?} listed twice")));
        }
    }
    for e in policy.entries() {
        if !matches!(keys.get(&ContextKey::new(&e.context)), Some(w) if *w > 0.0) {
            return Err(AnalysisError::Input(format!(
                "observed context {:?} is outside the support of the distribution",
                e.context
            )));
        }
    }
    let per_player = gap_under(game, policy, zeta)?;
    let epsilon = per_player.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CZetaGap { epsilon, per_player })
}

/// `2 √(log(|Z|·|𝒜|)/2 + log(2/δ)/(2T)) + max_i R^i/T`, evaluated as
/// written. The first term does not shrink with `T`.
pub fn concentration_bound(num_contexts: usize, game: &dyn ContextualGame, delta: f64, rounds: usize, max_avg_regret: f64) -> f64 {
    let log_size = (num_contexts as f64).ln() + joint_space_size(game).ln();
    let t = rounds as f64;
    2.0 * (log_size / 2.0 + (2.0 / delta).ln() / (2.0 * t)).sqrt() + max_avg_regret
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::contextual_regret;
    use crate::game::{TabularGame, TraceRow};

    fn row(round: usize, z: f64, actions: Vec<usize>) -> TraceRow {
        let n = actions.len();
        TraceRow {
            round,
            context: vec![z],
            actions,
            rewards: vec![0.0; n],
            observed: vec![0.0; n],
            distributions: vec![Vec::new(); n],
        }
    }

    // Chicken: payoffs (row, col) over joint (0,0),(0,1),(1,0),(1,1).
    fn chicken(contexts: Vec<Vec<f64>>) -> TabularGame {
        let p = vec![vec![0.0, 0.0], vec![0.7, 0.2], vec![0.2, 0.7], vec![0.6, 0.6]];
        let nc = contexts.len();
        TabularGame::new(vec![2, 2], contexts, vec![p; nc]).unwrap()
    }

    #[test]
    fn point_mass_for_repeated_joint_action() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![1, 0]), row(2, 0.0, vec![1, 0]), row(3, 1.0, vec![0, 1])]);
        let p = empirical_policy(&trace, &g).unwrap();
        assert_eq!(p.distribution(&[0.0]).unwrap(), vec![(vec![1, 0], 1.0)]);
        assert_eq!(p.entries().len(), 2);
        for e in p.entries() {
            let s: f64 = e.distribution().iter().map(|(_, q)| q).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unseen_context_is_uniform() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![1, 0])]);
        let p = empirical_policy(&trace, &g).unwrap();
        let d = p.distribution(&[1.0]).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|(_, q)| *q == 0.25));
    }

    #[test]
    fn best_responding_play_has_zero_gap() {
        // (0,1) is a pure Nash equilibrium of chicken.
        let g = chicken(vec![vec![0.0]]);
        let trace = GameTrace::new(2, (1..=4).map(|t| row(t, 0.0, vec![0, 1])).collect());
        assert_eq!(cce_gap(&trace, &g).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_two_by_two_gap() {
        // Half (1,1), quarter (0,1), quarter (1,0). For the row player:
        // realized 0.5·0.6 + 0.25·0.7 + 0.25·0.2 = 0.525;
        // always 0 gives 0.75·0.7 + 0.25·0 = 0.525;
        // always 1 gives 0.75·0.6 + 0.25·0.2 = 0.5.
        // The game is symmetric, so the gap is 0.
        let g = chicken(vec![vec![0.0]]);
        let acts = [[1, 1], [1, 1], [0, 1], [1, 0]];
        let trace = GameTrace::new(2, acts.iter().enumerate().map(|(t, a)| row(t + 1, 0.0, a.to_vec())).collect());
        assert!(cce_gap(&trace, &g).unwrap().abs() < 1e-15);
        // Always (1,1): deviating to 0 gains 0.1.
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![1, 1]); 3]);
        assert!((cce_gap(&trace, &g).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gap_matches_average_regret() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let acts = [[1, 1, 0], [0, 1, 1], [1, 0, 0], [0, 0, 1], [1, 1, 1]];
        let trace = GameTrace::new(
            2,
            acts.iter()
                .enumerate()
                .map(|(t, a)| row(t + 1, a[2] as f64, vec![a[0], a[1]]))
                .collect(),
        );
        let eps = cce_gap(&trace, &g).unwrap();
        let max = (0..2)
            .map(|i| contextual_regret(&trace, i, &g).unwrap().average())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((eps - max).abs() < 1e-12);
    }

    #[test]
    fn zeta_equal_to_empirical_matches_cce_gap() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let acts = [[1, 1, 0], [0, 1, 1], [1, 0, 0], [1, 1, 0]];
        let trace = GameTrace::new(
            2,
            acts.iter()
                .enumerate()
                .map(|(t, a)| row(t + 1, a[2] as f64, vec![a[0], a[1]]))
                .collect(),
        );
        let p = empirical_policy(&trace, &g).unwrap();
        let gap = c_zeta_cce_gap(&p, &g, &p.context_distribution()).unwrap();
        assert!((gap.epsilon - cce_gap(&trace, &g).unwrap()).abs() < 1e-15);
        // Reweighting towards the unseen part of the support changes it.
        let z = vec![(vec![0.0], 0.5), (vec![1.0], 0.5)];
        assert!(c_zeta_cce_gap(&p, &g, &z).is_ok());
    }

    #[test]
    fn zeta_support_must_cover_observed_contexts() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![1, 0]), row(2, 1.0, vec![1, 0])]);
        let p = empirical_policy(&trace, &g).unwrap();
        let err = c_zeta_cce_gap(&p, &g, &[(vec![0.0], 1.0)]).unwrap_err();
        assert!(matches!(err, AnalysisError::Input(_)));
        assert!(c_zeta_cce_gap(&p, &g, &[(vec![0.0], 0.5), (vec![1.0], 0.4)]).is_err());
    }

    #[test]
    fn unseen_zeta_context_uses_uniform_play() {
        let g = chicken(vec![vec![0.0], vec![1.0]]);
        let trace = GameTrace::new(2, vec![row(1, 0.0, vec![0, 1])]);
        let p = empirical_policy(&trace, &g).unwrap();
        let gap = c_zeta_cce_gap(&p, &g, &[(vec![0.0], 0.5), (vec![1.0], 0.5)]).unwrap();
        // Uniform play in chicken: realized 0.375, always 0 gives 0.35,
        // always 1 gives 0.4, so the gap there is 0.025.
        assert!((gap.epsilon - 0.5 * 0.025).abs() < 1e-15);
    }

    #[test]
    fn concentration_bound_as_written() {
        let g = chicken(vec![vec![0.0]]);
        let b = concentration_bound(2, &g, 0.1, 100, 0.05);
        let expected = 2.0 * ((8f64).ln() / 2.0 + (20f64).ln() / 200.0).sqrt() + 0.05;
        assert!((b - expected).abs() < 1e-12);
        // Large T leaves the first term in place.
        assert!(concentration_bound(2, &g, 0.1, 1 << 40, 0.0) > 1.0);
    }
}
