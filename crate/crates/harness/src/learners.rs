use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use contextual_games::baselines::{
    gpmw, ContextDistribution, Exp3, Exp3Config, FeatureMap, NoLearning, RobustLinExp3, RobustLinExp3Params,
};
use contextual_games::game::{ContextualGame, Learner};
use contextual_games::kernels::{BetaRule, KernelSpec};
use contextual_games::no_regret::{default_radius, CgpmwConfig, CgpmwLearner, RateRule, StrategyConfig, UcbTiming};

use crate::error::{HarnessError, Result};
use crate::spec::SimGame;

/// Hyperparameters shared by the kernel-based learners. Unset fields fall
/// back to the game's presets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub beta: Option<BetaRule>,
    #[serde(default)]
    pub rate: Option<RateRule>,
    #[serde(default)]
    pub data_budget: Option<usize>,
    #[serde(default)]
    pub ucb_timing: UcbTiming,
    /// Only read by the ε-net rule; defaults to the game's preset radius.
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3Params {
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
}

/// One learner family and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerSpec {
    CgpmwStochastic(KernelParams),
    CgpmwEpsnet(KernelParams),
    CgpmwFinite(KernelParams),
    Gpmw(KernelParams),
    Exp3(Exp3Params),
    SExp3(Exp3Params),
    RobustLinExp3(RobustLinExp3Params),
    NoLearning {
        #[serde(default)]
        action: usize,
    },
}

impl LearnerSpec {
    pub const KINDS: [&'static str; 8] = [
        "cgpmw-stochastic",
        "cgpmw-epsnet",
        "cgpmw-finite",
        "gpmw",
        "exp3",
        "s-exp3",
        "robust-lin-exp3",
        "no-learning",
    ];

    /// Default hyperparameters for a kind name.
    pub fn from_kind(kind: &str) -> Option<Self> {
        Some(match kind {
            "cgpmw-stochastic" => LearnerSpec::CgpmwStochastic(KernelParams::default()),
            "cgpmw-epsnet" => LearnerSpec::CgpmwEpsnet(KernelParams::default()),
            "cgpmw-finite" => LearnerSpec::CgpmwFinite(KernelParams::default()),
            "gpmw" => LearnerSpec::Gpmw(KernelParams::default()),
            "exp3" => LearnerSpec::Exp3(Exp3Params::default()),
            "s-exp3" => LearnerSpec::SExp3(Exp3Params::default()),
            "robust-lin-exp3" => LearnerSpec::RobustLinExp3(RobustLinExp3Params::default()),
            "no-learning" => LearnerSpec::NoLearning { action: 0 },
            _ => return None,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::CgpmwStochastic(_) => "cgpmw-stochastic",
            LearnerSpec::CgpmwEpsnet(_) => "cgpmw-epsnet",
            LearnerSpec::CgpmwFinite(_) => "cgpmw-finite",
            LearnerSpec::Gpmw(_) => "gpmw",
            LearnerSpec::Exp3(_) => "exp3",
            LearnerSpec::SExp3(_) => "s-exp3",
            LearnerSpec::RobustLinExp3(_) => "robust-lin-exp3",
            LearnerSpec::NoLearning { .. } => "no-learning",
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |field: &str, msg: String| Err(HarnessError::config(format!("{path}.{field}"), msg));
        match self {
            LearnerSpec::CgpmwStochastic(p)
            | LearnerSpec::CgpmwEpsnet(p)
            | LearnerSpec::CgpmwFinite(p)
            | LearnerSpec::Gpmw(p) => {
                if let Some(k) = &p.kernel {
                    if let Err(e) = k.validate() {
                        return bad("kernel", e.to_string());
                    }
                }
                if let Some(l) = p.lambda {
                    if !(l > 0.0) {
                        return bad("lambda", format!("must be positive, got {l}"));
                    }
                }
                if let Some(b) = &p.beta {
                    if let Err(e) = b.validate() {
                        return bad("beta", e.to_string());
                    }
                }
                if let Some(r) = &p.rate {
                    if let Err(e) = r.validate() {
                        return bad("rate", e);
                    }
                }
                if let Some(r) = p.radius {
                    if !(r > 0.0) {
                        return bad("radius", format!("must be positive, got {r}"));
                    }
                }
                if p.data_budget == Some(0) {
                    return bad("data_budget", "must be positive".into());
                }
                Ok(())
            }
            LearnerSpec::Exp3(p) | LearnerSpec::SExp3(p) => {
                if !(0.0..=1.0).contains(&p.gamma) {
                    return bad("gamma", format!("must lie in [0, 1], got {}", p.gamma));
                }
                match p.eta {
                    Some(e) if !(e > 0.0) => bad("eta", format!("must be positive, got {e}")),
                    _ => Ok(()),
                }
            }
            LearnerSpec::RobustLinExp3(p) => {
                if !(p.eta > 0.0) {
                    return bad("eta", format!("must be positive, got {}", p.eta));
                }
                if !(0.0..=1.0).contains(&p.gamma) {
                    return bad("gamma", format!("must lie in [0, 1], got {}", p.gamma));
                }
                Ok(())
            }
            LearnerSpec::NoLearning { .. } => Ok(()),
        }
    }
}

/// A labelled learner configuration: every player runs `spec` unless
/// `players` assigns it something else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub label: String,
    pub spec: LearnerSpec,
    #[serde(default)]
    pub players: BTreeMap<usize, LearnerSpec>,
}

impl LearnerConfig {
    pub fn uniform(spec: LearnerSpec) -> Self {
        LearnerConfig {
            label: spec.kind().to_string(),
            spec,
            players: BTreeMap::new(),
        }
    }

    pub fn spec_for(&self, player: usize) -> &LearnerSpec {
        self.players.get(&player).unwrap_or(&self.spec)
    }

    /// Instantiates one learner per player of `game`.
    pub fn build(&self, game: &SimGame, rounds: usize) -> Result<Vec<Box<dyn Learner>>> {
        (0..game.num_players())
            .map(|i| build_learner(self.spec_for(i), game, i, rounds))
            .collect()
    }
}

fn kernel_config(p: &KernelParams, strategy: StrategyConfig, kernel: KernelSpec, rate: RateRule) -> CgpmwConfig {
    let mut c = CgpmwConfig::new(strategy, p.kernel.clone().unwrap_or(kernel));
    if let Some(l) = p.lambda {
        c.lambda = l;
    }
    if let Some(b) = p.beta {
        c.beta = b;
    }
    c.rate = p.rate.unwrap_or(rate);
    c.data_budget = p.data_budget;
    c.ucb_timing = p.ucb_timing;
    c
}

fn context_distribution(game: &SimGame, player: usize) -> Option<ContextDistribution> {
    if let Some(g) = game.routing() {
        return Some(g.context_distribution(player));
    }
    match game.context_generator().distribution() {
        Some(d) => {
            let (support, weights): (Vec<_>, Vec<_>) =
                d.into_iter().map(|(z, w)| (game.context_view(player, &z), w)).unzip();
            Some(ContextDistribution { support, weights })
        }
        None => None,
    }
}

pub fn build_learner(spec: &LearnerSpec, game: &SimGame, player: usize, rounds: usize) -> Result<Box<dyn Learner>> {
    let k = game.num_actions(player);
    let actions = || game.action_vectors(player);
    Ok(match spec {
        LearnerSpec::CgpmwStochastic(p) => {
            let known = game
                .finite_support()
                .map(|s| s.iter().map(|z| game.context_view(player, z)).collect());
            let strategy = StrategyConfig::Stochastic { known_contexts: known };
            let c = kernel_config(p, strategy, game.learner_kernel(player, true), RateRule::Horizon { rounds });
            Box::new(CgpmwLearner::new(c, actions())?)
        }
        LearnerSpec::CgpmwEpsnet(p) => {
            let radius = match (p.radius, game.routing()) {
                (Some(r), _) => r,
                (None, Some(g)) => g.net_radius(player),
                (None, None) => {
                    default_radius(1.0, 1.0, rounds.max(1), game.context_dim(player))
                }
            };
            let strategy = StrategyConfig::EpsilonNet { radius };
            let c = kernel_config(p, strategy, game.learner_kernel(player, true), RateRule::Visits);
            Box::new(CgpmwLearner::new(c, actions())?)
        }
        LearnerSpec::CgpmwFinite(p) => {
            let c = kernel_config(p, StrategyConfig::FiniteContext, game.learner_kernel(player, true), RateRule::Visits);
            Box::new(CgpmwLearner::new(c, actions())?)
        }
        LearnerSpec::Gpmw(p) => {
            let c = kernel_config(p, StrategyConfig::FiniteContext, game.learner_kernel(player, false), RateRule::Visits);
            Box::new(gpmw(c, actions())?)
        }
        LearnerSpec::Exp3(p) | LearnerSpec::SExp3(p) => {
            let config = Exp3Config {
                eta: p.eta,
                gamma: p.gamma,
                horizon: rounds,
            };
            Box::new(Exp3::new(k, config, matches!(spec, LearnerSpec::SExp3(_)))?)
        }
        LearnerSpec::RobustLinExp3(p) => {
            let map = match game.routing() {
                Some(g) => g.linear_features(player),
                None => FeatureMap {
                    scale: None,
                    bias: true,
                },
            };
            Box::new(RobustLinExp3::new(k, *p, map, context_distribution(game, player))?)
        }
        LearnerSpec::NoLearning { action } => Box::new(NoLearning::new(k, *action)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for kind in LearnerSpec::KINDS {
            let spec = LearnerSpec::from_kind(kind).unwrap();
            assert_eq!(spec.kind(), kind);
            let json = serde_json::to_string(&spec).unwrap();
            assert!(json.contains(kind), "{json}");
            assert_eq!(serde_json::from_str::<LearnerSpec>(&json).unwrap(), spec);
        }
        assert!(LearnerSpec::from_kind("ucb").is_none());
    }

    #[test]
    fn parses_hyperparameters() {
        let spec: LearnerSpec =
            serde_json::from_str(r#"{"kind": "cgpmw-epsnet", "radius": 0.5, "beta": {"kind": "constant", "value": 1.0}}"#)
                .unwrap();
        let LearnerSpec::CgpmwEpsnet(p) = spec else { panic!() };
        assert_eq!(p.radius, Some(0.5));
        assert_eq!(p.beta, Some(BetaRule::Constant { value: 1.0 }));
    }

    #[test]
    fn validation_names_the_field() {
        let spec = LearnerSpec::Exp3(Exp3Params { eta: Some(-1.0), gamma: 0.0 });
        match spec.validate("learners[2].spec") {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "learners[2].spec.eta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn per_player_override() {
        let mut c = LearnerConfig::uniform(LearnerSpec::from_kind("exp3").unwrap());
        c.players.insert(1, LearnerSpec::NoLearning { action: 0 });
        assert_eq!(c.spec_for(0).kind(), "exp3");
        assert_eq!(c.spec_for(1).kind(), "no-learning");
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<LearnerConfig>(&json).unwrap(), c);
    }
}
