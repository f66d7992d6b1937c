use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_trace, enumerate_joint_actions, group_by_context, AnalysisError};
use crate::game::{ContextKey, ContextualGame, GameTrace};

/// Relative slack when comparing welfare quantities computed along
/// different floating-point routes.
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareOptimum {
    /// Optimal time-averaged welfare over per-player policies.
    pub value: f64,
    /// Per distinct context: round count, welfare-maximizing joint action
    /// (lowest row-major index on ties) and its welfare.
    pub per_context: Vec<(Vec<f64>, usize, Vec<usize>, f64)>,
}

/// `OPT` for the given context sequence. Per-player policies are free to
/// pick any joint action at each context, so the maximization splits
/// across distinct contexts.
pub fn optimal_contextual_welfare(
    contexts: &[Vec<f64>],
    game: &dyn ContextualGame,
) -> Result<WelfareOptimum, AnalysisError> {
    if contexts.is_empty() {
        return Err(AnalysisError::Input("no contexts".into()));
    }
    let joints = enumerate_joint_actions(game)?;
    let mut order: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut index: HashMap<ContextKey, usize> = HashMap::new();
    for z in contexts {
        let g = *index.entry(ContextKey::new(z)).or_insert_with(|| {
            order.push((z.clone(), 0));
            order.len() - 1
        });
        order[g].1 += 1;
    }
    let mut total = 0.0;
    let mut per_context = Vec::with_capacity(order.len());
    for (z, count) in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, a) in joints.iter().enumerate() {
            let w: f64 = game.rewards(a, &z).iter().sum();
            if best.map_or(true, |(_, b)| w > b) {
                best = Some((j, w));
            }
        }
        let (j, w) = best.ok_or_else(|| AnalysisError::Input("empty joint action space".into()))?;
        total += count as f64 * w;
        per_context.push((z, count, joints[j].clone(), w));
    }
    Ok(WelfareOptimum {
        value: total / contexts.len() as f64,
        per_context,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessWitness {
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    /// `Σ_i r^i(a_2^i, a_1^{-i}, z)`.
    pub lhs: f64,
    /// `λ Γ(a_2, z) − μ Γ(a_1, z)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCheck {
    pub holds: bool,
    pub witness: Option<SmoothnessWitness>,
}

/// Welfare of every joint action and the deviation rewards needed for the
/// left-hand side, at one context.
struct Table {
    joints: Vec<Vec<usize>>,
    welfare: Vec<f64>,
    deviations: Vec<Vec<Vec<f64>>>,
}

impl Table {
    fn new(game: &dyn ContextualGame, z: &[f64]) -> Result<Self, AnalysisError> {
        let joints = enumerate_joint_actions(game)?;
        let n = game.num_players();
        let welfare = joints.iter().map(|a| game.rewards(a, z).iter().sum()).collect();
        let deviations = joints
            .iter()
            .map(|a| (0..n).map(|i| game.deviation_rewards(i, a, z)).collect())
            .collect();
        Ok(Table {
            joints,
            welfare,
            deviations,
        })
    }

    fn lhs(&self, a1: usize, a2: usize) -> f64 {
        self.joints[a2]
            .iter()
            .enumerate()
            .map(|(i, &b)| self.deviations[a1][i][b])
            .sum()
    }
}

/// Exhaustive check of the (λ, μ)-smoothness inequality at context `z`.
/// Returns the first violating pair in row-major order.
pub fn smoothness_verify(
    game: &dyn ContextualGame,
    z: &[f64],
    lambda: f64,
    mu: f64,
) -> Result<SmoothnessCheck, AnalysisError> {
    let table = Table::new(game, z)?;
    for a1 in 0..table.joints.len() {
        for a2 in 0..table.joints.len() {
            let lhs = table.lhs(a1, a2);
            let rhs = lambda * table.welfare[a2] - mu * table.welfare[a1];
            if lhs < rhs - TOL * (1.0 + rhs.abs()) {
                return Ok(SmoothnessCheck {
                    holds: false,
                    witness: Some(SmoothnessWitness {
                        a1: table.joints[a1].clone(),
                        a2: table.joints[a2].clone(),
                        lhs,
                        rhs,
                    }),
                });
            }
        }
    }
    Ok(SmoothnessCheck {
        holds: true,
        witness: None,
    })
}

/// Largest `λ` for which the game is (λ, μ)-smooth at `z`, or `None` if no
/// `λ` works for this `μ`. Infinite when every welfare is zero.
pub fn max_smoothness_lambda(game: &dyn ContextualGame, z: &[f64], mu: f64) -> Result<Option<f64>, AnalysisError> {
    let table = Table::new(game, z)?;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for a1 in 0..table.joints.len() {
        for a2 in 0..table.joints.len() {
            let slack = table.lhs(a1, a2) + mu * table.welfare[a1];
            let w = table.welfare[a2];
            if w > 0.0 {
                hi = hi.min(slack / w);
            } else if w < 0.0 {
                lo = lo.max(slack / w);
            } else if slack < -TOL {
                return Ok(None);
            }
        }
    }
    Ok(if lo <= hi { Some(hi) } else { None })
}

/// Verified per-context smoothness constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    entries: Vec<(Vec<f64>, f64, f64)>,
}

impl SmoothnessCertificate {
    /// Verifies every `(z, λ(z), μ(z))` exhaustively.
    pub fn new(game: &dyn ContextualGame, entries: Vec<(Vec<f64>, f64, f64)>) -> Result<Self, AnalysisError> {
        for (z, l, m) in &entries {
            let check = smoothness_verify(game, z, *l, *m)?;
            if let Some(w) = check.witness {
                return Err(AnalysisError::Input(format!(
                    "({l}, {m})-smoothness fails at context {z:?}: a1={:?} a2={:?} lhs={} rhs={}",
                    w.a1, w.a2, w.lhs, w.rhs
                )));
            }
        }
        Ok(SmoothnessCertificate { entries })
    }

    pub fn entries(&self) -> &[(Vec<f64>, f64, f64)] {
        &self.entries
    }

    pub fn get(&self, z: &[f64]) -> Option<(f64, f64)> {
        let key = ContextKey::new(z);
        self.entries
            .iter()
            .find(|(c, _, _)| ContextKey::new(c) == key)
            .map(|(_, l, m)| (*l, *m))
    }
}

/// Certificate with a common `μ` and the largest valid `λ(z)` per distinct
/// context. An unbounded `λ` (identically zero welfare) is recorded as 1.
pub fn certify_smoothness(
    game: &dyn ContextualGame,
    contexts: &[Vec<f64>],
    mu: f64,
) -> Result<SmoothnessCertificate, AnalysisError> {
    let mut seen = HashMap::new();
    let mut entries = Vec::new();
    for z in contexts {
        if seen.insert(ContextKey::new(z), ()).is_some() {
            continue;
        }
        let lambda = max_smoothness_lambda(game, z, mu)?
            .ok_or_else(|| AnalysisError::Input(format!("no λ makes the game smooth with μ={mu} at {z:?}")))?;
        entries.push((z.clone(), if lambda.is_finite() { lambda } else { 1.0 }, mu));
    }
    SmoothnessCertificate::new(game, entries)
}

/// Both sides of the welfare guarantee
/// `(1/T) Σ_t Γ(a_t, z_t) ≥ λ̄/(1+μ̄) OPT − 1/(1+μ̄) Σ_i R^i/T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBound {
    pub realized: f64,
    pub opt: f64,
    pub lambda_bar: f64,
    pub mu_bar: f64,
    pub lower_bound: f64,
    pub holds: bool,
    /// Whether (min λ, max μ) was used instead of (max λ, min μ).
    pub conservative: bool,
}

/// Evaluates the welfare guarantee on a trace. `regrets` are the
/// cumulative contextual regrets of all players. By default
/// `λ̄ = max_t λ(z_t)` and `μ̄ = min_t μ(z_t)`; `conservative` swaps in
/// `min λ` and `max μ`.
pub fn efficiency_bound(
    trace: &GameTrace,
    game: &dyn ContextualGame,
    certificate: &SmoothnessCertificate,
    regrets: &[f64],
    conservative: bool,
) -> Result<EfficiencyBound, AnalysisError> {
    check_trace(trace, game)?;
    if regrets.len() != game.num_players() {
        return Err(AnalysisError::Input(format!(
            "{} regrets for {} players",
            regrets.len(),
            game.num_players()
        )));
    }
    let mut lambdas = Vec::new();
    let mut mus = Vec::new();
    for (z, _) in group_by_context(trace) {
        let (l, m) = certificate
            .get(&z)
            .ok_or_else(|| AnalysisError::Input(format!("certificate misses context {z:?}")))?;
        lambdas.push(l);
        mus.push(m);
    }
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lambda_bar, mu_bar) = if conservative {
        (min(&lambdas), max(&mus))
    } else {
        (max(&lambdas), min(&mus))
    };
    let t = trace.len() as f64;
    let realized = trace
        .rows()
        .iter()
        .map(|r| game.rewards(&r.actions, &r.context).iter().sum::<f64>())
        .sum::<f64>()
        / t;
    let contexts: Vec<Vec<f64>> = trace.rows().iter().map(|r| r.context.clone()).collect();
    let opt = optimal_contextual_welfare(&contexts, game)?.value;
    let lower_bound = lambda_bar / (1.0 + mu_bar) * opt - regrets.iter().sum::<f64>() / t / (1.0 + mu_bar);
    Ok(EfficiencyBound {
        realized,
        opt,
        lambda_bar,
        mu_bar,
        lower_bound,
        holds: realized >= lower_bound - TOL * (1.0 + lower_bound.abs()),
        conservative,
    })
}
