use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TraceRow;

/// Context identity under exact bitwise equality of its coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextKey(Vec<u64>);

impl ContextKey {
    pub fn new(context: &[f64]) -> Self {
        ContextKey(context.iter().map(|x| x.to_bits()).collect())
    }

    pub fn to_context(&self) -> Vec<f64> {
        self.0.iter().map(|b| f64::from_bits(*b)).collect()
    }
}

impl From<&[f64]> for ContextKey {
    fn from(c: &[f64]) -> Self {
        ContextKey::new(c)
    }
}

type Callback = Box<dyn FnMut(usize, &[TraceRow]) -> Vec<f64> + Send>;

/// How Nature picks the context of each round.
pub enum ContextGenerator {
    /// Replays a fixed sequence, cycling when exhausted.
    Sequence(Vec<Vec<f64>>),
    /// i.i.d. draws from a finite distribution.
    Finite { support: Vec<Vec<f64>>, weights: Vec<f64> },
    /// i.i.d. uniform draws from `[0, 1]^dim`.
    UniformBox { dim: usize },
    /// Arbitrary (possibly history-dependent) choice.
    Adversarial(Callback),
}

impl fmt::Debug for ContextGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextGenerator::Sequence(s) => f.debug_tuple("Sequence").field(&s.len()).finish(),
            ContextGenerator::Finite { support, weights } => f
                .debug_struct("Finite")
                .field("support", &support.len())
                .field("weights", weights)
                .finish(),
            ContextGenerator::UniformBox { dim } => f.debug_struct("UniformBox").field("dim", dim).finish(),
            ContextGenerator::Adversarial(_) => f.write_str("Adversarial(..)"),
        }
    }
}

impl ContextGenerator {
    pub fn uniform_over(support: Vec<Vec<f64>>) -> Self {
        let n = support.len();
        ContextGenerator::Finite {
            support,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn next(&mut self, round: usize, history: &[TraceRow], rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            ContextGenerator::Sequence(seq) => seq[round % seq.len()].clone(),
            ContextGenerator::Finite { support, weights } => {
                let idx = super::sample_index(weights, rng);
                support[idx].clone()
            }
            ContextGenerator::UniformBox { dim } => (0..*dim).map(|_| rng.gen::<f64>()).collect(),
            ContextGenerator::Adversarial(cb) => cb(round, history),
        }
    }

    /// The context distribution, when it is known and finite.
    pub fn distribution(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            ContextGenerator::Finite { support, weights } => {
                Some(support.iter().cloned().zip(weights.iter().copied()).collect())
            }
            _ => None,
        }
    }
}
