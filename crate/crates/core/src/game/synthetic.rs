use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tabular::encode;
use super::{ContextGenerator, ContextualGame};
use crate::kernels::{Features, KernelError, KernelSpec, Point};

fn default_amplitude() -> f64 {
    0.5
}

/// Recipe for a game whose rewards are finite kernel expansions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGameParams {
    pub players: usize,
    pub actions: usize,
    pub context_dim: usize,
    /// Size of a finite context set drawn uniformly from `[0, 1]^c`; `None`
    /// leaves the whole box as context space.
    #[serde(default)]
    pub num_contexts: Option<usize>,
    pub kernel: KernelSpec,
    pub num_centers: usize,
    /// Rewards are `0.5 + amplitude · f / ‖f‖_k`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Expansion {
    centers: Vec<Point>,
    alphas: Vec<f64>,
    /// `sqrt(αᵀ K α)` before rescaling.
    norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SyntheticData {
    params: SyntheticGameParams,
    seed_used: u64,
    contexts: Vec<Vec<f64>>,
    players: Vec<Expansion>,
}

/// Game with `r^i(x) = 0.5 + s_i Σ_j α_j k(c_j, x)` and `s_i = amplitude / ‖f_i‖_k`.
///
/// The centred reward `r^i − 0.5` has RKHS norm exactly `amplitude`, and
/// `r^i ∈ [0, 1]` whenever `k(x, x) ≤ 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SyntheticData", into = "SyntheticData")]
pub struct SyntheticGame {
    data: SyntheticData,
    features: Vec<Vec<Features>>,
}

/// Draws a synthetic RKHS game. Expansions with a vanishing norm are
/// redrawn from the next seed.
pub fn make_synthetic_rkhs_game(params: &SyntheticGameParams) -> Result<SyntheticGame, KernelError> {
    params.kernel.validate()?;
    if params.players == 0 || params.actions == 0 {
        return Err(KernelError::InvalidSpec("synthetic game needs players and actions".into()));
    }
    if !(params.amplitude > 0.0 && params.amplitude <= 0.5) {
        return Err(KernelError::InvalidSpec(format!(
            "amplitude must lie in (0, 0.5], got {}",
            params.amplitude
        )));
    }
    for attempt in 0..100u64 {
        let seed_used = params.seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
        let contexts: Vec<Vec<f64>> = (0..params.num_contexts.unwrap_or(0))
            .map(|_| (0..params.context_dim).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let mut players = Vec::with_capacity(params.players);
        let mut degenerate = false;
        for _ in 0..params.players {
            let centers: Vec<Point> = (0..params.num_centers)
                .map(|_| {
                    Point::new(
                        vec![rng.gen()],
                        (1..params.players).map(|_| rng.gen()).collect(),
                        (0..params.context_dim).map(|_| rng.gen()).collect(),
                    )
                })
                .collect();
            let alphas: Vec<f64> = (0..params.num_centers).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let feats = centers
                .iter()
                .map(|c| params.kernel.featurize(c))
                .collect::<Result<Vec<_>, _>>()?;
            let mut q = 0.0;
            for (i, fi) in feats.iter().enumerate() {
                for (j, fj) in feats.iter().enumerate() {
                    q += alphas[i] * alphas[j] * params.kernel.eval_features(fi, fj);
                }
            }
            let norm = q.max(0.0).sqrt();
            if params.num_centers > 0 && !(norm > 1e-6) {
                degenerate = true;
                break;
            }
            players.push(Expansion { centers, alphas, norm });
        }
        if !degenerate {
            return SyntheticGame::try_from(SyntheticData {
                params: params.clone(),
                seed_used,
                contexts,
                players,
            })
            .map_err(KernelError::InvalidSpec);
        }
    }
    Err(KernelError::InvalidSpec(
        "could not draw a non-degenerate kernel expansion".into(),
    ))
}

impl TryFrom<SyntheticData> for SyntheticGame {
    type Error = String;

    fn try_from(data: SyntheticData) -> Result<Self, String> {
        let features = data
            .players
            .iter()
            .map(|p| {
                p.centers
                    .iter()
                    .map(|c| data.params.kernel.featurize(c))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        Ok(SyntheticGame { data, features })
    }
}

impl From<SyntheticGame> for SyntheticData {
    fn from(g: SyntheticGame) -> Self {
        g.data
    }
}

impl SyntheticGame {
    pub fn params(&self) -> &SyntheticGameParams {
        &self.data.params
    }

    /// The seed the expansions were finally drawn from.
    pub fn seed_used(&self) -> u64 {
        self.data.seed_used
    }

    /// Finite context set, empty when contexts range over the whole box.
    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.data.contexts
    }

    /// Uniform i.i.d. contexts over the game's context space.
    pub fn context_generator(&self) -> ContextGenerator {
        if self.data.contexts.is_empty() {
            ContextGenerator::UniformBox {
                dim: self.data.params.context_dim,
            }
        } else {
            ContextGenerator::uniform_over(self.data.contexts.clone())
        }
    }

    /// `sqrt(αᵀ K α)` of player `i`'s expansion before rescaling.
    pub fn raw_norm(&self, player: usize) -> f64 {
        self.data.players[player].norm
    }

    /// RKHS-norm bound `B` of the centred reward `r^i − 0.5`.
    pub fn bound(&self, player: usize) -> f64 {
        if self.data.players[player].centers.is_empty() {
            0.0
        } else {
            self.data.params.amplitude
        }
    }

    /// Centres and weights of player `i`'s expansion.
    pub fn expansion(&self, player: usize) -> (&[Point], &[f64]) {
        let p = &self.data.players[player];
        (&p.centers, &p.alphas)
    }

    /// The regression input of player `i` for a joint action and context.
    pub fn point(&self, player: usize, joint: &[usize], context: &[f64]) -> Point {
        let k = self.data.params.actions;
        Point::new(
            vec![encode(joint[player], k)],
            self.opponent_view(player, joint),
            context.to_vec(),
        )
    }

    /// Reward at an arbitrary regression input.
    pub fn reward_at(&self, player: usize, x: &Point) -> f64 {
        let p = &self.data.players[player];
        if p.centers.is_empty() {
            return 0.5;
        }
        let kernel = &self.data.params.kernel;
        let fx = kernel.featurize(x).expect("point matches the game's kernel");
        let f: f64 = self.features[player]
            .iter()
            .zip(&p.alphas)
            .map(|(c, a)| a * kernel.eval_features(c, &fx))
            .sum();
        0.5 + self.data.params.amplitude * f / p.norm
    }
}

impl ContextualGame for SyntheticGame {
    fn num_players(&self) -> usize {
        self.data.params.players
    }

    fn num_actions(&self, _player: usize) -> usize {
        self.data.params.actions
    }

    fn reward(&self, player: usize, joint: &[usize], context: &[f64]) -> f64 {
        self.reward_at(player, &self.point(player, joint, context))
    }

    fn action_vectors(&self, _player: usize) -> Vec<Vec<f64>> {
        let k = self.data.params.actions;
        (0..k).map(|a| vec![encode(a, k)]).collect()
    }

    fn opponent_view(&self, player: usize, joint: &[usize]) -> Vec<f64> {
        let k = self.data.params.actions;
        joint
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != player)
            .map(|(_, a)| encode(*a, k))
            .collect()
    }
}
