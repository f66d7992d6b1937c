use serde::{Deserialize, Serialize};

/// `2 sqrt(log K / visits)`.
pub fn rate_finite_or_net(num_actions: usize, visits: usize) -> f64 {
    assert!(visits >= 1, "visit count starts at 1");
    2.0 * ((num_actions as f64).ln() / visits as f64).sqrt()
}

/// `sqrt(8 log K / T)` for a known horizon `T`.
pub fn rate_stochastic(num_actions: usize, horizon: usize) -> f64 {
    assert!(horizon >= 1, "horizon must be positive");
    (8.0 * (num_actions as f64).ln() / horizon as f64).sqrt()
}

/// Default ball radius `(L_r L_p)^{-2/(c+2)} T^{-1/(c+2)}`.
pub fn default_radius(reward_lipschitz: f64, policy_lipschitz: f64, horizon: usize, context_dim: usize) -> f64 {
    let e = (context_dim + 2) as f64;
    (reward_lipschitz * policy_lipschitz).powf(-2.0 / e) * (horizon as f64).powf(-1.0 / e)
}

/// Learning-rate schedule of a multiplicative-weights learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateRule {
    /// `2 sqrt(log K / n)` with `n` the visit count including the current round.
    Visits,
    /// Constant `sqrt(8 log K / T)`.
    Horizon { rounds: usize },
    Constant { eta: f64 },
}

impl Default for RateRule {
    fn default() -> Self {
        RateRule::Visits
    }
}

impl RateRule {
    pub fn eta(&self, num_actions: usize, visits: usize) -> f64 {
        match *self {
            RateRule::Visits => rate_finite_or_net(num_actions, visits),
            RateRule::Horizon { rounds } => rate_stochastic(num_actions, rounds),
            RateRule::Constant { eta } => eta,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            RateRule::Horizon { rounds: 0 } => Err("horizon must be positive".into()),
            RateRule::Constant { eta } if !(eta > 0.0 && eta.is_finite()) => {
                Err(format!("learning rate must be positive, got {eta}"))
            }
            _ => Ok(()),
        }
    }
}
