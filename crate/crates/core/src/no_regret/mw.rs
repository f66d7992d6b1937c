use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cumulative scores of a multiplicative-weights learner over `K` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MWState {
    scores: Vec<f64>,
    updates: usize,
}

impl MWState {
    pub fn new(num_actions: usize) -> Self {
        MWState {
            scores: vec![0.0; num_actions],
            updates: 0,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn update_count(&self) -> usize {
        self.updates
    }

    /// Adds one round of per-action gains.
    pub fn update(&mut self, gains: &[f64]) {
        assert_eq!(gains.len(), self.scores.len(), "gain vector length");
        self.scores.iter_mut().zip(gains).for_each(|(s, g)| *s += g);
        self.updates += 1;
    }
}

/// `p[a] ∝ exp(η · scores[a])`; uniform before the first update.
pub fn mw_distribution(state: &MWState, eta: f64) -> Vec<f64> {
    if state.updates == 0 {
        let k = state.num_actions();
        return vec![1.0 / k as f64; k];
    }
    exp_weights(&state.scores, eta)
}

/// Max-shifted softmax of `eta * scores`.
pub fn exp_weights(scores: &[f64], eta: f64) -> Vec<f64> {
    let max = scores
        .iter()
        .map(|s| eta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (eta * s - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("{gains} gain vectors but {rates} learning rates")]
    Length { gains: usize, rates: usize },
    #[error("round {round}: gain vector has {got} entries, expected {expected}")]
    Width { round: usize, expected: usize, got: usize },
    #[error("comparator action {0} out of range")]
    Comparator(usize),
    #[error("empty history")]
    Empty,
}

/// Realized regret of MW run on `gains` with rates `etas` against a fixed
/// comparator: `Σ g_t(a*) − Σ_t Σ_a p_t[a] g_t(a)`, where
/// `p_t ∝ exp(η_t Σ_{τ<t} g_τ)`.
pub fn mw_regret_audit(gains: &[Vec<f64>], etas: &[f64], comparator: usize) -> Result<f64, AuditError> {
    if gains.len() != etas.len() {
        return Err(AuditError::Length {
            gains: gains.len(),
            rates: etas.len(),
        });
    }
    let k = gains.first().ok_or(AuditError::Empty)?.len();
    if comparator >= k {
        return Err(AuditError::Comparator(comparator));
    }
    let mut state = MWState::new(k);
    let mut regret = 0.0;
    for (t, (g, eta)) in gains.iter().zip(etas).enumerate() {
        if g.len() != k {
            return Err(AuditError::Width {
                round: t,
                expected: k,
                got: g.len(),
            });
        }
        let p = mw_distribution(&state, *eta);
        let expected: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
        regret += g[comparator] - expected;
        state.update(g);
    }
    Ok(regret)
}

/// `log K / η_T + Σ η_t / 8` for a non-increasing rate sequence.
pub fn mw_regret_bound(num_actions: usize, etas: &[f64]) -> f64 {
    let last = *etas.last().expect("non-empty rate sequence");
    (num_actions as f64).ln() / last + etas.iter().sum::<f64>() / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::no_regret::rate_finite_or_net;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_state_is_uniform() {
        let s = MWState::new(4);
        assert_eq!(mw_distribution(&s, 3.0), vec![0.25; 4]);
    }

    #[test]
    fn two_actions_hand_value() {
        let mut s = MWState::new(2);
        s.update(&[1.0, 0.0]);
        let p = mw_distribution(&s, 2f64.ln());
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let p = exp_weights(&[1e6, 1e6 - 1.0, -1e6], 10.0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_gains_have_no_regret() {
        let gains = vec![vec![0.4; 3]; 20];
        let etas: Vec<f64> = (1..=20).map(|t| rate_finite_or_net(3, t)).collect();
        for a in 0..3 {
            assert!(mw_regret_audit(&gains, &etas, a).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn bound_holds_on_random_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let k = 4;
        let gains: Vec<Vec<f64>> = (0..200).map(|_| (0..k).map(|_| rng.gen()).collect()).collect();
        let etas: Vec<f64> = (1..=200).map(|t| rate_finite_or_net(k, t)).collect();
        let bound = mw_regret_bound(k, &etas);
        for a in 0..k {
            assert!(mw_regret_audit(&gains, &etas, a).unwrap() <= bound);
        }
    }

    #[test]
    fn bound_holds_on_alternating_gains() {
        let gains: Vec<Vec<f64>> = (0..100)
            .map(|t| if t % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let etas: Vec<f64> = (1..=100).map(|t| rate_finite_or_net(2, t)).collect();
        let bound = mw_regret_bound(2, &etas);
        for a in 0..2 {
            assert!(mw_regret_audit(&gains, &etas, a).unwrap() <= bound);
        }
    }

    #[test]
    fn audit_rejects_bad_input() {
        assert_eq!(
            mw_regret_audit(&[vec![0.0, 1.0]], &[], 0),
            Err(AuditError::Length { gains: 1, rates: 0 })
        );
        assert_eq!(mw_regret_audit(&[vec![0.0, 1.0]], &[1.0], 2), Err(AuditError::Comparator(2)));
        assert!(matches!(
            mw_regret_audit(&[vec![0.0, 1.0], vec![0.0]], &[1.0, 1.0], 0),
            Err(AuditError::Width { round: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn distribution_is_a_simplex_point_and_shift_invariant(
            scores in prop::collection::vec(-50.0f64..50.0, 1..10),
            eta in 0.01f64..5.0,
            shift in -100.0f64..100.0,
        ) {
            let p = exp_weights(&scores, eta);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let q = exp_weights(&shifted, eta);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
