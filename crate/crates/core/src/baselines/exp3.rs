use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::game::{sample_index, Choice, ContextKey, Feedback, Learner, ProtocolError};
use crate::no_regret::exp_weights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exp3Config {
    /// Learning rate; defaults to `sqrt(2 log K / (T K))`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Uniform exploration mixed into the exponential weights.
    #[serde(default)]
    pub gamma: f64,
    pub horizon: usize,
}

impl Exp3Config {
    pub fn new(horizon: usize) -> Self {
        Exp3Config {
            eta: None,
            gamma: 0.0,
            horizon,
        }
    }

    pub fn eta_for(&self, num_actions: usize) -> f64 {
        self.eta.unwrap_or_else(|| {
            let k = num_actions as f64;
            (2.0 * k.ln() / (self.horizon.max(1) as f64 * k)).sqrt()
        })
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ProtocolError::Config(format!("exploration must lie in [0, 1], got {}", self.gamma)));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(ProtocolError::Config(format!("learning rate must be positive, got {eta}")));
            }
        }
        if self.eta.is_none() && self.horizon == 0 {
            return Err(ProtocolError::Config("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Importance-weighted exponential weights over `K` arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Core {
    eta: f64,
    gamma: f64,
    estimates: Vec<f64>,
}

impl Exp3Core {
    pub fn new(num_actions: usize, eta: f64, gamma: f64) -> Self {
        Exp3Core {
            eta,
            gamma,
            estimates: vec![0.0; num_actions],
        }
    }

    pub fn distribution(&self) -> Vec<f64> {
        let k = self.estimates.len() as f64;
        exp_weights(&self.estimates, self.eta)
            .into_iter()
            .map(|p| (1.0 - self.gamma) * p + self.gamma / k)
            .collect()
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// Adds `reward / prob` to the estimate of the played action.
    pub fn step(&mut self, action: usize, reward: f64, prob: f64) -> Result<(), ProtocolError> {
        if !(prob > 0.0) {
            return Err(ProtocolError::ZeroProbability { action });
        }
        self.estimates[action] += reward / prob;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Pending {
    key: Option<ContextKey>,
    action: usize,
    prob: f64,
}

/// Exp3, or S-Exp3 when `per_context` is set (one independent copy per
/// exactly repeated context).
#[derive(Debug, Clone)]
pub struct Exp3 {
    k: usize,
    eta: f64,
    gamma: f64,
    per_context: bool,
    shared: Exp3Core,
    copies: HashMap<ContextKey, Exp3Core>,
    pending: Option<Pending>,
}

impl Exp3 {
    pub fn new(num_actions: usize, config: Exp3Config, per_context: bool) -> Result<Self, ProtocolError> {
        if num_actions == 0 {
            return Err(ProtocolError::Uninitialized);
        }
        config.validate()?;
        let eta = config.eta_for(num_actions);
        Ok(Exp3 {
            k: num_actions,
            eta,
            gamma: config.gamma,
            per_context,
            shared: Exp3Core::new(num_actions, eta, config.gamma),
            copies: HashMap::new(),
            pending: None,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The copy serving `context` (the shared one unless per-context).
    pub fn core(&self, context: &[f64]) -> Option<&Exp3Core> {
        if self.per_context {
            self.copies.get(&ContextKey::new(context))
        } else {
            Some(&self.shared)
        }
    }
}

impl Learner for Exp3 {
    fn num_actions(&self) -> usize {
        self.k
    }

    fn choose(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<Choice, ProtocolError> {
        let (key, core) = if self.per_context {
            let key = ContextKey::new(context);
            let (k, eta, gamma) = (self.k, self.eta, self.gamma);
            let core = self
                .copies
                .entry(key.clone())
                .or_insert_with(|| Exp3Core::new(k, eta, gamma));
            (Some(key), &*core)
        } else {
            (None, &self.shared)
        };
        let distribution = core.distribution();
        let action = sample_index(&distribution, rng);
        self.pending = Some(Pending {
            key,
            action,
            prob: distribution[action],
        });
        Ok(Choice { action, distribution })
    }

    fn feedback(&mut self, fb: &Feedback<'_>) -> Result<(), ProtocolError> {
        let pending = self.pending.take().ok_or(ProtocolError::FeedbackWithoutChoose)?;
        if pending.action != fb.action {
            return Err(ProtocolError::Mismatch {
                expected: pending.action,
                got: fb.action,
            });
        }
        let core = match &pending.key {
            Some(key) => self.copies.get_mut(key).expect("copy created at choose"),
            None => &mut self.shared,
        };
        core.step(fb.action, fb.reward, pending.prob)
    }
}
