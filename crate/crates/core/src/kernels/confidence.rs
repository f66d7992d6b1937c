use serde::{Deserialize, Serialize};

use super::{Features, KernelError, PosteriorModel};

/// `min{μ(x) + β σ(x), 1}` on the full model.
pub fn ucb(model: &PosteriorModel, x: &Features, beta: f64) -> f64 {
    model.view().ucb(x, beta)
}

/// `β = B + σ λ^{-1/2} sqrt(2 (γ_{t-1} + log(c/δ)))`, with `c = 2` when
/// `two_sided` is set and `c = 1` otherwise.
pub fn beta_schedule(
    bound: f64,
    noise_std: f64,
    lambda: f64,
    gamma_prev: f64,
    delta: f64,
    two_sided: bool,
) -> Result<f64, KernelError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(KernelError::Delta(delta));
    }
    let c = if two_sided { 2.0 } else { 1.0 };
    let log_term = (c / delta).ln();
    Ok(bound + noise_std / lambda.sqrt() * (2.0 * (gamma_prev.max(0.0) + log_term)).sqrt())
}

/// How a learner picks its confidence width each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaRule {
    Constant {
        value: f64,
    },
    Schedule {
        bound: f64,
        noise_std: f64,
        delta: f64,
        #[serde(default)]
        two_sided: bool,
    },
}

impl Default for BetaRule {
    fn default() -> Self {
        BetaRule::Constant { value: 2.0 }
    }
}

impl BetaRule {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            BetaRule::Constant { value } if !(value >= 0.0) => Err(KernelError::InvalidSpec(format!(
                "beta must be non-negative, got {value}"
            ))),
            BetaRule::Schedule { delta, .. } => beta_schedule(0.0, 0.0, 1.0, 0.0, delta, false).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Width for a round whose model holds information gain `gamma_prev`.
    pub fn beta(&self, lambda: f64, gamma_prev: f64) -> f64 {
        match *self {
            BetaRule::Constant { value } => value,
            BetaRule::Schedule {
                bound,
                noise_std,
                delta,
                two_sided,
            } => beta_schedule(bound, noise_std, lambda, gamma_prev, delta, two_sided)
                .expect("validated beta rule"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_schedule_is_the_norm_bound() {
        for (g, d) in [(0.0, 0.5), (10.0, 0.01), (3.0, 0.9)] {
            assert_eq!(beta_schedule(1.0, 0.0, 1.0, g, d, true).unwrap(), 1.0);
        }
    }

    #[test]
    fn hand_evaluated_two_sided_value() {
        // log(2/δ) = 2 at δ = 2/e², so β = 1 + sqrt(4).
        let delta = 2.0 / std::f64::consts::E.powi(2);
        let b = beta_schedule(1.0, 1.0, 1.0, 0.0, delta, true).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
        // log(2/δ) = 1 at δ = 2/e, so β = 1 + sqrt(2).
        let b = beta_schedule(1.0, 1.0, 1.0, 0.0, 2.0 / std::f64::consts::E, true).unwrap();
        assert!((b - 2.4142).abs() < 1e-4);
    }

    #[test]
    fn one_sided_uses_log_one_over_delta() {
        let delta = (-1.0f64).exp();
        let b = beta_schedule(0.0, 1.0, 4.0, 0.0, delta, false).unwrap();
        assert!((b - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn delta_outside_unit_interval_is_rejected() {
        for d in [0.0, 1.0, -0.5, 2.0] {
            assert_eq!(beta_schedule(1.0, 1.0, 1.0, 0.0, d, true), Err(KernelError::Delta(d)));
        }
    }

    #[test]
    fn constant_rule_overrides_schedule() {
        assert_eq!(BetaRule::default().beta(1.0, 123.0), 2.0);
    }
}
