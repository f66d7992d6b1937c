use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    c_zeta_cce_gap, cce_gap, certify_smoothness, concentration_bound, contextual_regret, efficiency_bound,
    empirical_policy, joint_space_size, optimal_contextual_welfare, AnalysisError, EfficiencyBound,
    SmoothnessCertificate, MAX_JOINT_ACTIONS,
};
use crate::game::{ContextualGame, GameTrace};

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Known finite context distribution for the c-ζ-CCE gap.
    #[serde(default)]
    pub zeta: Option<Vec<(Vec<f64>, f64)>>,
    /// Confidence level of the concentration bound.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Common `μ` for the smoothness certificate; no certificate when unset.
    #[serde(default)]
    pub smoothness_mu: Option<f64>,
    /// Aggregate the certificate as (min λ, max μ).
    #[serde(default)]
    pub conservative: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            zeta: None,
            delta: default_delta(),
            smoothness_mu: None,
            conservative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSummary {
    pub player: usize,
    pub regret: f64,
    pub average_regret: f64,
    pub average_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    pub per_player: Vec<f64>,
    pub delta: f64,
    pub num_contexts: usize,
    /// The high-probability bound evaluated as written; informational.
    pub bound: f64,
    /// The `log(|Z|·|𝒜|)/2` term is constant in `T`, so the bound does not
    /// vanish as the horizon grows.
    pub bound_vanishes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub realized: f64,
    pub opt: f64,
    pub certificate: Option<SmoothnessCertificate>,
    pub efficiency: Option<EfficiencyBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rounds: usize,
    pub players: Vec<PlayerSummary>,
    pub max_average_regret: f64,
    pub cce_gap: f64,
    pub c_zeta: Option<ConcentrationReport>,
    pub welfare: Option<WelfareReport>,
    /// Parts not computed, with the reason.
    pub skipped: Vec<String>,
}

/// Full post-hoc analysis of a trace. Parts that need joint-action
/// enumeration are skipped (and listed) on games that are too large.
pub fn analyze(
    trace: &GameTrace,
    game: &dyn ContextualGame,
    options: &AnalysisOptions,
) -> Result<AnalysisReport, AnalysisError> {
    if !(options.delta > 0.0 && options.delta < 1.0) {
        return Err(AnalysisError::Input(format!("delta must lie in (0, 1), got {}", options.delta)));
    }
    let t = trace.len();
    let regrets = (0..game.num_players())
        .into_par_iter()
        .map(|i| contextual_regret(trace, i, game))
        .collect::<Result<Vec<_>, _>>()?;
    let players: Vec<PlayerSummary> = regrets
        .iter()
        .map(|r| PlayerSummary {
            player: r.player,
            regret: r.regret,
            average_regret: r.average(),
            average_reward: r.realized / t as f64,
        })
        .collect();
    let max_average_regret = players
        .iter()
        .map(|p| p.average_regret)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut skipped = Vec::new();

    let c_zeta = match &options.zeta {
        Some(zeta) => {
            let policy = empirical_policy(trace, game)?;
            match c_zeta_cce_gap(&policy, game, zeta) {
                Ok(gap) => Some(ConcentrationReport {
                    bound: concentration_bound(zeta.len(), game, options.delta, t, max_average_regret),
                    epsilon: gap.epsilon,
                    per_player: gap.per_player,
                    delta: options.delta,
                    num_contexts: zeta.len(),
                    bound_vanishes: false,
                }),
                Err(AnalysisError::TooLarge { size, .. }) => {
                    skipped.push(format!("c-zeta gap: uniform play over {size:e} joint actions"));
                    None
                }
                Err(e) => return Err(e),
            }
        }
        None => None,
    };

    let welfare = if joint_space_size(game) > MAX_JOINT_ACTIONS {
        skipped.push(format!(
            "welfare: {:e} joint actions exceed the enumeration limit",
            joint_space_size(game)
        ));
        None
    } else {
        let contexts: Vec<Vec<f64>> = trace.rows().iter().map(|r| r.context.clone()).collect();
        let opt = optimal_contextual_welfare(&contexts, game)?.value;
        let realized = trace
            .rows()
            .iter()
            .map(|r| game.rewards(&r.actions, &r.context).iter().sum::<f64>())
            .sum::<f64>()
            / t as f64;
        let (certificate, efficiency) = match options.smoothness_mu {
            Some(mu) => {
                let cert = certify_smoothness(game, &contexts, mu)?;
                let totals: Vec<f64> = regrets.iter().map(|r| r.regret).collect();
                let bound = efficiency_bound(trace, game, &cert, &totals, options.conservative)?;
                (Some(cert), Some(bound))
            }
            None => (None, None),
        };
        Some(WelfareReport {
            realized,
            opt,
            certificate,
            efficiency,
        })
    };

    Ok(AnalysisReport {
        rounds: t,
        players,
        max_average_regret,
        cce_gap: cce_gap(trace, game)?,
        c_zeta,
        welfare,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{TabularGame, TraceRow};

    fn game() -> TabularGame {
        let p = vec![vec![0.0, 0.0], vec![0.7, 0.2], vec![0.2, 0.7], vec![0.6, 0.6]];
        TabularGame::new(vec![2, 2], vec![vec![0.0], vec![1.0]], vec![p.clone(), p]).unwrap()
    }

    fn trace() -> GameTrace {
        let acts = [[1, 1, 0], [0, 1, 1], [1, 0, 0], [0, 0, 1]];
        GameTrace::new(
            2,
            acts.iter()
                .enumerate()
                .map(|(t, a)| TraceRow {
                    round: t + 1,
                    context: vec![a[2] as f64],
                    actions: vec![a[0], a[1]],
                    rewards: vec![0.0; 2],
                    observed: vec![0.0; 2],
                    distributions: vec![Vec::new(); 2],
                })
                .collect(),
        )
    }

    #[test]
    fn report_is_consistent_and_serializes() {
        let opts = AnalysisOptions {
            zeta: Some(vec![(vec![0.0], 0.5), (vec![1.0], 0.5)]),
            smoothness_mu: Some(1.0),
            ..AnalysisOptions::default()
        };
        let r = analyze(&trace(), &game(), &opts).unwrap();
        assert!((r.cce_gap - r.max_average_regret).abs() < 1e-12);
        let cz = r.c_zeta.as_ref().unwrap();
        // ζ equals the empirical frequencies here.
        assert!((cz.epsilon - r.cce_gap).abs() < 1e-12);
        assert!(cz.bound >= cz.epsilon);
        let w = r.welfare.as_ref().unwrap();
        assert!(w.opt >= w.realized);
        assert!(w.efficiency.as_ref().unwrap().holds);
        let json = serde_json::to_string(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rejects_bad_delta() {
        let opts = AnalysisOptions {
            delta: 1.5,
            ..AnalysisOptions::default()
        };
        assert!(analyze(&trace(), &game(), &opts).is_err());
    }
}
