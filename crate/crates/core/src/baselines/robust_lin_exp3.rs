use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::game::{sample_index, Choice, Feedback, Learner, ProtocolError};

fn default_eta() -> f64 {
    0.3
}

fn default_gamma() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustLinExp3Params {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for RobustLinExp3Params {
    fn default() -> Self {
        RobustLinExp3Params {
            eta: default_eta(),
            gamma: default_gamma(),
        }
    }
}

/// Context-to-feature map: elementwise division by `scale`, then an
/// optional constant coordinate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMap {
    #[serde(default)]
    pub scale: Option<Vec<f64>>,
    #[serde(default)]
    pub bias: bool,
}

impl FeatureMap {
    pub fn apply(&self, context: &[f64]) -> DVector<f64> {
        let mut v: Vec<f64> = match &self.scale {
            Some(s) => context.iter().zip(s).map(|(z, s)| z / s).collect(),
            None => context.to_vec(),
        };
        if self.bias {
            v.push(1.0);
        }
        DVector::from_vec(v)
    }
}

/// Known finite context distribution, in the learner's own view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDistribution {
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pending {
    features: DVector<f64>,
    action: usize,
}

/// Linear contextual Exp3 with exact covariance under a known context
/// distribution: `π(a|x) = (1−γ) softmax(−η ⟨x, Θ_a⟩) + γ/K`, with
/// `Θ_a` the sum of past estimates `Σ_a⁺ x_t ℓ_t 1{a_t = a}` and
/// `Σ_a = E_x[π(a|x) x xᵀ]`.
#[derive(Debug, Clone)]
pub struct RobustLinExp3 {
    k: usize,
    params: RobustLinExp3Params,
    map: FeatureMap,
    support: Vec<DVector<f64>>,
    weights: Vec<f64>,
    cumulative: Vec<DVector<f64>>,
    pending: Option<Pending>,
}

impl RobustLinExp3 {
    pub fn new(
        num_actions: usize,
        params: RobustLinExp3Params,
        map: FeatureMap,
        distribution: Option<ContextDistribution>,
    ) -> Result<Self, ProtocolError> {
        if num_actions == 0 {
            return Err(ProtocolError::Uninitialized);
        }
        let dist = distribution.ok_or_else(|| {
            ProtocolError::Config("RobustLinExp3 needs the context distribution".into())
        })?;
        if dist.support.is_empty() || dist.support.len() != dist.weights.len() {
            return Err(ProtocolError::Config("malformed context distribution".into()));
        }
        if !(params.eta > 0.0) || !(0.0..=1.0).contains(&params.gamma) {
            return Err(ProtocolError::Config(format!(
                "invalid RobustLinExp3 parameters eta={} gamma={}",
                params.eta, params.gamma
            )));
        }
        let support: Vec<DVector<f64>> = dist.support.iter().map(|z| map.apply(z)).collect();
        let d = support[0].len();
        if support.iter().any(|x| x.len() != d) {
            return Err(ProtocolError::Config("context dimensions differ".into()));
        }
        Ok(RobustLinExp3 {
            k: num_actions,
            params,
            map,
            support,
            weights: dist.weights,
            cumulative: vec![DVector::zeros(d); num_actions],
            pending: None,
        })
    }

    pub fn params(&self) -> RobustLinExp3Params {
        self.params
    }

    /// Policy at feature vector `x`.
    pub fn policy(&self, x: &DVector<f64>) -> Vec<f64> {
        let neg: Vec<f64> = self.cumulative.iter().map(|theta| -x.dot(theta)).collect();
        let soft = crate::no_regret::exp_weights(&neg, self.params.eta);
        let k = self.k as f64;
        soft.into_iter()
            .map(|p| (1.0 - self.params.gamma) * p + self.params.gamma / k)
            .collect()
    }

    /// `E_x[π(action|x) x xᵀ]` under the known distribution.
    pub fn covariance(&self, action: usize) -> DMatrix<f64> {
        let d = self.support[0].len();
        let mut cov = DMatrix::zeros(d, d);
        for (x, w) in self.support.iter().zip(&self.weights) {
            let p = self.policy(x)[action];
            cov += (w * p) * x * x.transpose();
        }
        cov
    }

    /// Loss-vector estimate `Σ_a⁺ x ℓ` for the played action.
    pub fn estimate(&self, action: usize, x: &DVector<f64>, loss: f64) -> DVector<f64> {
        pseudo_inverse(&self.covariance(action)) * x * loss
    }

    pub fn cumulative(&self, action: usize) -> &DVector<f64> {
        &self.cumulative[action]
    }
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = max * 1e-10 * m.nrows() as f64;
    let inv = eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

impl Learner for RobustLinExp3 {
    fn num_actions(&self) -> usize {
        self.k
    }

    fn choose(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<Choice, ProtocolError> {
        let features = self.map.apply(context);
        if features.len() != self.support[0].len() {
            return Err(ProtocolError::Config(format!(
                "context has {} features, expected {}",
                features.len(),
                self.support[0].len()
            )));
        }
        let distribution = self.policy(&features);
        let action = sample_index(&distribution, rng);
        self.pending = Some(Pending { features, action });
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
        let est = self.estimate(fb.action, &pending.features, 1.0 - fb.reward);
        self.cumulative[fb.action] += est;
        Ok(())
    }
}
