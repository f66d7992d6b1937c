use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use contextual_games::game::{ContextGenerator, ContextualGame, SyntheticGame, SyntheticGameParams, TabularGame};
use contextual_games::game::make_synthetic_rkhs_game;
use contextual_games::kernels::{InputMap, KernelSpec, Normalization, Projection};
use contextual_games::routing::{
    build_agents, context_sampler, load_tntp, subsample_agents, RoutingGame,
};

use crate::error::{HarnessError, Result};

fn default_routes() -> usize {
    5
}

fn default_profiles() -> usize {
    10
}

fn default_samples() -> usize {
    10_000
}

fn default_multiplier() -> f64 {
    1.0
}

/// Inputs of a routing game. The context profiles are drawn from `seed` and
/// the reward calibration from `seed + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingSpec {
    pub net: PathBuf,
    pub trips: PathBuf,
    #[serde(default)]
    pub nodes: Option<PathBuf>,
    #[serde(default = "default_routes")]
    pub routes: usize,
    #[serde(default = "default_profiles")]
    pub profiles: usize,
    #[serde(default = "default_samples")]
    pub calibration_samples: usize,
    #[serde(default = "default_multiplier")]
    pub demand_multiplier: f64,
    /// Keep this many evenly spaced agents (demand rescaled).
    #[serde(default)]
    pub agents: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// A game that can be rebuilt deterministically from its description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GameSpec {
    Synthetic { params: SyntheticGameParams },
    Tabular { game: TabularGame },
    Routing(RoutingSpec),
}

impl GameSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::config(path.display().to_string(), e.to_string()))
    }

    /// Resolves relative file references against `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let GameSpec::Routing(r) = self {
            for p in [&mut r.net, &mut r.trips].into_iter().chain(r.nodes.as_mut()) {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// Copy with routing file paths made absolute, so the description stays
    /// valid from any working directory.
    pub fn canonicalized(&self) -> GameSpec {
        let mut spec = self.clone();
        if let GameSpec::Routing(r) = &mut spec {
            for p in [&mut r.net, &mut r.trips].into_iter().chain(r.nodes.as_mut()) {
                if let Ok(abs) = std::fs::canonicalize(&*p) {
                    *p = abs;
                }
            }
        }
        spec
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            GameSpec::Synthetic { params } => {
                if params.players == 0 || params.actions == 0 {
                    return Err(HarnessError::config(format!("{path}.params"), "players and actions must be positive"));
                }
                params
                    .kernel
                    .validate()
                    .map_err(|e| HarnessError::config(format!("{path}.params.kernel"), e.to_string()))
            }
            GameSpec::Tabular { .. } => Ok(()),
            GameSpec::Routing(r) => {
                for (field, p) in [("net", Some(&r.net)), ("trips", Some(&r.trips)), ("nodes", r.nodes.as_ref())] {
                    if let Some(p) = p {
                        if !p.is_file() {
                            return Err(HarnessError::config(
                                format!("{path}.{field}"),
                                format!("file not found: {}", p.display()),
                            ));
                        }
                    }
                }
                let positive = [
                    ("routes", r.routes),
                    ("profiles", r.profiles),
                    ("calibration_samples", r.calibration_samples),
                ];
                for (field, v) in positive {
                    if v == 0 {
                        return Err(HarnessError::config(format!("{path}.{field}"), "must be positive"));
                    }
                }
                if !(r.demand_multiplier > 0.0) {
                    return Err(HarnessError::config(format!("{path}.demand_multiplier"), "must be positive"));
                }
                if r.agents == Some(0) {
                    return Err(HarnessError::config(format!("{path}.agents"), "must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self) -> Result<SimGame> {
        Ok(match self {
            GameSpec::Synthetic { params } => SimGame::Synthetic(make_synthetic_rkhs_game(params)?),
            GameSpec::Tabular { game } => SimGame::Tabular(game.clone()),
            GameSpec::Routing(r) => {
                let (net, trips) = load_tntp(&r.net, &r.trips, r.nodes.as_deref())?;
                let mut agents = build_agents(&net, &trips, r.routes, r.demand_multiplier)?;
                if let Some(n) = r.agents {
                    agents = subsample_agents(&agents, n)?;
                }
                let contexts = context_sampler(&net, r.profiles, r.seed);
                SimGame::Routing(Box::new(RoutingGame::new(
                    &net,
                    agents,
                    contexts,
                    r.calibration_samples,
                    r.seed.wrapping_add(1),
                )?))
            }
        })
    }
}

/// Any of the supported games behind one reward oracle.
pub enum SimGame {
    Synthetic(SyntheticGame),
    Tabular(TabularGame),
    Routing(Box<RoutingGame>),
}

macro_rules! delegate {
    ($self:ident, $g:ident => $e:expr) => {
        match $self {
            SimGame::Synthetic($g) => $e,
            SimGame::Tabular($g) => $e,
            SimGame::Routing($g) => $e,
        }
    };
}

impl ContextualGame for SimGame {
    fn num_players(&self) -> usize {
        delegate!(self, g => g.num_players())
    }

    fn num_actions(&self, player: usize) -> usize {
        delegate!(self, g => g.num_actions(player))
    }

    fn reward(&self, player: usize, joint: &[usize], context: &[f64]) -> f64 {
        delegate!(self, g => g.reward(player, joint, context))
    }

    fn rewards(&self, joint: &[usize], context: &[f64]) -> Vec<f64> {
        delegate!(self, g => g.rewards(joint, context))
    }

    fn deviation_rewards(&self, player: usize, joint: &[usize], context: &[f64]) -> Vec<f64> {
        delegate!(self, g => g.deviation_rewards(player, joint, context))
    }

    fn action_vectors(&self, player: usize) -> Vec<Vec<f64>> {
        delegate!(self, g => g.action_vectors(player))
    }

    fn opponent_view(&self, player: usize, joint: &[usize]) -> Vec<f64> {
        delegate!(self, g => g.opponent_view(player, joint))
    }

    fn opponent_views(&self, joint: &[usize]) -> Vec<Vec<f64>> {
        delegate!(self, g => g.opponent_views(joint))
    }

    fn context_view(&self, player: usize, context: &[f64]) -> Vec<f64> {
        delegate!(self, g => g.context_view(player, context))
    }
}

impl SimGame {
    pub fn context_generator(&self) -> ContextGenerator {
        match self {
            SimGame::Synthetic(g) => g.context_generator(),
            SimGame::Tabular(g) => ContextGenerator::uniform_over(g.contexts().to_vec()),
            SimGame::Routing(g) => ContextGenerator::uniform_over(g.contexts().to_vec()),
        }
    }

    /// The finite context support, if the context law has one.
    pub fn finite_support(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            SimGame::Synthetic(g) => (!g.contexts().is_empty()).then(|| g.contexts().to_vec()),
            SimGame::Tabular(g) => Some(g.contexts().to_vec()),
            SimGame::Routing(g) => Some(g.contexts().to_vec()),
        }
    }

    /// Kernel used by the learners of `player`; the context-blind variant
    /// does not read the context.
    pub fn learner_kernel(&self, player: usize, contextual: bool) -> KernelSpec {
        match self {
            SimGame::Routing(g) if contextual => g.contextual_kernel(player),
            SimGame::Routing(g) => g.blind_kernel(player),
            SimGame::Synthetic(g) if contextual => g.params().kernel.clone(),
            _ if contextual => KernelSpec::squared_exponential(0.5, InputMap::new(Projection::Joint, Normalization::None)),
            _ => KernelSpec::product(vec![
                KernelSpec::squared_exponential(0.5, InputMap::new(Projection::Own, Normalization::None)),
                KernelSpec::squared_exponential(0.5, InputMap::new(Projection::Opponents, Normalization::None)),
            ]),
        }
    }

    /// Dimension of the context as `player` observes it.
    pub fn context_dim(&self, player: usize) -> usize {
        match self {
            SimGame::Synthetic(g) => g.params().context_dim,
            _ => self
                .finite_support()
                .and_then(|s| s.first().map(|z| self.context_view(player, z).len()))
                .unwrap_or(0),
        }
    }

    /// Whether `context` lies in the game's context space, so that rewards
    /// can be evaluated at it.
    pub fn accepts_context(&self, context: &[f64]) -> bool {
        match self {
            SimGame::Synthetic(g) => context.len() == g.params().context_dim,
            SimGame::Tabular(g) => g.context_index(context).is_some(),
            SimGame::Routing(g) => context.len() == g.num_edges() && context.iter().all(|v| *v > 0.0),
        }
    }

    pub fn routing(&self) -> Option<&RoutingGame> {
        match self {
            SimGame::Routing(g) => Some(g),
            _ => None,
        }
    }

    /// Unscaled rewards (travel-time based for routing, the rewards
    /// themselves otherwise).
    pub fn raw_rewards(&self, joint: &[usize], context: &[f64]) -> Vec<f64> {
        match self {
            SimGame::Routing(g) => g.raw_rewards(joint, context),
            _ => self.rewards(joint, context),
        }
    }

    /// Network-average congestion; zero for non-routing games.
    pub fn congestion(&self, joint: &[usize], context: &[f64]) -> f64 {
        match self {
            SimGame::Routing(g) => g.average_congestion(joint, context),
            _ => 0.0,
        }
    }
}
