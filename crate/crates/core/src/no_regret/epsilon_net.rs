use serde::{Deserialize, Serialize};

use super::MWState;

/// Greedy cover of the context space by L1 balls, one MW learner per ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    radius: f64,
    num_actions: usize,
    centers: Vec<Vec<f64>>,
    states: Vec<MWState>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

impl EpsilonNet {
    pub fn new(radius: f64, num_actions: usize) -> Self {
        assert!(radius > 0.0, "radius must be positive");
        EpsilonNet {
            radius,
            num_actions,
            centers: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn state(&self, ball: usize) -> &MWState {
        &self.states[ball]
    }

    pub fn state_mut(&mut self, ball: usize) -> &mut MWState {
        &mut self.states[ball]
    }

    /// Nearest center within the radius (earliest on ties), or a new ball at
    /// `z`. Returns the ball index and whether it was created.
    pub fn assign(&mut self, z: &[f64]) -> (usize, bool) {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.centers.iter().enumerate() {
            let d = l1(c, z);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) if d <= self.radius => (i, false),
            _ => {
                self.centers.push(z.to_vec());
                self.states.push(MWState::new(self.num_actions));
                (self.centers.len() - 1, true)
            }
        }
    }
}

/// `⌈1/ε⌉^c`.
pub fn covering_bound(radius: f64, context_dim: usize) -> f64 {
    (1.0 / radius).ceil().powi(context_dim as i32)
}
