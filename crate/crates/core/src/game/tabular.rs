use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ContextKey, ContextualGame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TabularData {
    actions: Vec<usize>,
    contexts: Vec<Vec<f64>>,
    payoffs: Vec<Vec<Vec<f64>>>,
}

/// A game over a finite context set given by explicit payoff tables.
///
/// `payoffs[c][j][i]` is player `i`'s reward at context `contexts[c]` and
/// joint action with flat index `j` (player 0 most significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabularData", into = "TabularData")]
pub struct TabularGame {
    data: TabularData,
    index: HashMap<ContextKey, usize>,
}

impl TabularGame {
    pub fn new(actions: Vec<usize>, contexts: Vec<Vec<f64>>, payoffs: Vec<Vec<Vec<f64>>>) -> Result<Self, String> {
        TabularGame::try_from(TabularData {
            actions,
            contexts,
            payoffs,
        })
    }

    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.data.contexts
    }

    pub fn num_joint_actions(&self) -> usize {
        self.data.actions.iter().product()
    }

    pub fn flat_index(&self, joint: &[usize]) -> usize {
        joint
            .iter()
            .zip(&self.data.actions)
            .fold(0, |acc, (a, k)| acc * k + a)
    }

    pub fn context_index(&self, context: &[f64]) -> Option<usize> {
        self.index.get(&ContextKey::new(context)).copied()
    }
}

impl TryFrom<TabularData> for TabularGame {
    type Error = String;

    fn try_from(data: TabularData) -> Result<Self, String> {
        let n = data.actions.len();
        if n == 0 || data.actions.contains(&0) {
            return Err("every player needs at least one action".into());
        }
        if data.contexts.len() != data.payoffs.len() {
            return Err(format!(
                "{} contexts but {} payoff tables",
                data.contexts.len(),
                data.payoffs.len()
            ));
        }
        let joint: usize = data.actions.iter().product();
        let mut index = HashMap::new();
        for (c, (z, table)) in data.contexts.iter().zip(&data.payoffs).enumerate() {
            if index.insert(ContextKey::new(z), c).is_some() {
                return Err(format!("context {c} is listed twice"));
            }
            if table.len() != joint {
                return Err(format!("context {c}: {} rows, expected {joint}", table.len()));
            }
            for (j, row) in table.iter().enumerate() {
                if row.len() != n {
                    return Err(format!("context {c}, joint action {j}: {} rewards for {n} players", row.len()));
                }
                if row.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return Err(format!("context {c}, joint action {j}: reward outside [0, 1]"));
                }
            }
        }
        Ok(TabularGame { data, index })
    }
}

impl From<TabularGame> for TabularData {
    fn from(g: TabularGame) -> Self {
        g.data
    }
}

impl ContextualGame for TabularGame {
    fn num_players(&self) -> usize {
        self.data.actions.len()
    }

    fn num_actions(&self, player: usize) -> usize {
        self.data.actions[player]
    }

    /// Panics when `context` is not one of the game's contexts.
    fn reward(&self, player: usize, joint: &[usize], context: &[f64]) -> f64 {
        let c = self
            .context_index(context)
            .unwrap_or_else(|| panic!("context {context:?} is not part of this game"));
        self.data.payoffs[c][self.flat_index(joint)][player]
    }

    fn action_vectors(&self, player: usize) -> Vec<Vec<f64>> {
        let k = self.data.actions[player];
        (0..k).map(|a| vec![encode(a, k)]).collect()
    }

    fn opponent_view(&self, player: usize, joint: &[usize]) -> Vec<f64> {
        joint
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != player)
            .map(|(j, a)| encode(*a, self.data.actions[j]))
            .collect()
    }
}

/// Action `a` of `k` as a scalar in `[0, 1]`.
pub(crate) fn encode(a: usize, k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        a as f64 / (k - 1) as f64
    }
}
