use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{exp_weights, mw_distribution, EpsilonNet, MWState, RateRule};
use crate::game::{sample_index, Choice, ContextKey, Feedback, Learner, ProtocolError};
use crate::kernels::{BetaRule, KernelSpec, Point, PosteriorModel};

/// How the per-round action distribution is built from past ucb functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyConfig {
    /// One MW learner per exactly repeated context.
    FiniteContext,
    /// One MW learner per L1 ball of a greedily built net.
    EpsilonNet { radius: f64 },
    /// All past ucb functions re-evaluated at the current context. With
    /// `known_contexts`, running sums are kept for those contexts.
    Stochastic {
        #[serde(default)]
        known_contexts: Option<Vec<Vec<f64>>>,
    },
}

/// Whether the score of round `t` uses the model before or after round
/// `t`'s own observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UcbTiming {
    #[default]
    Before,
    After,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgpmwConfig {
    pub strategy: StrategyConfig,
    pub kernel: KernelSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub beta: BetaRule,
    #[serde(default)]
    pub rate: RateRule,
    #[serde(default)]
    pub data_budget: Option<usize>,
    #[serde(default)]
    pub ucb_timing: UcbTiming,
    /// Keep every per-round gain vector for later auditing.
    #[serde(default)]
    pub record_scores: bool,
}

impl CgpmwConfig {
    pub fn new(strategy: StrategyConfig, kernel: KernelSpec) -> Self {
        CgpmwConfig {
            strategy,
            kernel,
            lambda: 1.0,
            beta: BetaRule::default(),
            rate: RateRule::default(),
            data_budget: None,
            ucb_timing: UcbTiming::default(),
            record_scores: false,
        }
    }
}

/// Gains fed to one MW learner in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// Context or ball index.
    pub group: usize,
    pub gains: Vec<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone)]
struct Stored {
    opponents: Vec<f64>,
    epoch: usize,
    len: usize,
    beta: f64,
}

#[derive(Debug, Clone)]
enum StrategyState {
    Finite {
        index: HashMap<ContextKey, usize>,
        states: Vec<MWState>,
    },
    Net(EpsilonNet),
    Stochastic {
        history: Vec<Stored>,
        known: Vec<Vec<f64>>,
        sums: HashMap<ContextKey, Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
struct Pending {
    context: Vec<f64>,
    action: usize,
    group: usize,
    eta: f64,
}

/// Per-player c.GP-MW state: a kernel reward model shared by one of three
/// context strategies.
#[derive(Debug, Clone)]
pub struct CgpmwLearner {
    config: CgpmwConfig,
    actions: Vec<Vec<f64>>,
    model: PosteriorModel,
    /// Models retired by data-budget evictions, still referenced by stored ucb functions.
    frozen: Vec<PosteriorModel>,
    strategy: StrategyState,
    pending: Option<Pending>,
    rounds: usize,
    score_log: Vec<ScoreRecord>,
}

impl CgpmwLearner {
    /// `actions[a]` is the vector fed to the kernel for own action `a`.
    pub fn new(config: CgpmwConfig, actions: Vec<Vec<f64>>) -> Result<Self, ProtocolError> {
        if actions.is_empty() {
            return Err(ProtocolError::Uninitialized);
        }
        config.beta.validate()?;
        config.rate.validate().map_err(ProtocolError::Config)?;
        let model = PosteriorModel::new(config.kernel.clone(), config.lambda)?.with_budget(config.data_budget);
        let k = actions.len();
        let strategy = match &config.strategy {
            StrategyConfig::FiniteContext => StrategyState::Finite {
                index: HashMap::new(),
                states: Vec::new(),
            },
            StrategyConfig::EpsilonNet { radius } => {
                if !(*radius > 0.0) {
                    return Err(ProtocolError::Config(format!("radius must be positive, got {radius}")));
                }
                StrategyState::Net(EpsilonNet::new(*radius, k))
            }
            StrategyConfig::Stochastic { known_contexts } => {
                let known = known_contexts.clone().unwrap_or_default();
                let sums = known.iter().map(|z| (ContextKey::new(z), vec![0.0; k])).collect();
                StrategyState::Stochastic {
                    history: Vec::new(),
                    known,
                    sums,
                }
            }
        };
        Ok(CgpmwLearner {
            config,
            actions,
            model,
            frozen: Vec::new(),
            strategy,
            pending: None,
            rounds: 0,
            score_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &CgpmwConfig {
        &self.config
    }

    pub fn model(&self) -> &PosteriorModel {
        &self.model
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn score_log(&self) -> &[ScoreRecord] {
        &self.score_log
    }

    /// Number of contexts or balls with their own MW learner.
    pub fn num_groups(&self) -> usize {
        match &self.strategy {
            StrategyState::Finite { states, .. } => states.len(),
            StrategyState::Net(net) => net.len(),
            StrategyState::Stochastic { .. } => 1,
        }
    }

    pub fn epsilon_net(&self) -> Option<&EpsilonNet> {
        match &self.strategy {
            StrategyState::Net(net) => Some(net),
            _ => None,
        }
    }

    /// MW state of an exactly matching context (finite-context strategy).
    pub fn context_state(&self, context: &[f64]) -> Option<&MWState> {
        match &self.strategy {
            StrategyState::Finite { index, states } => index.get(&ContextKey::new(context)).map(|i| &states[*i]),
            _ => None,
        }
    }

    pub fn clamp_count(&self) -> u64 {
        self.model.clamp_count() + self.frozen.iter().map(|m| m.clamp_count()).sum::<u64>()
    }

    fn point(&self, action: usize, opponents: &[f64], context: &[f64]) -> Point {
        Point::new(self.actions[action].clone(), opponents.to_vec(), context.to_vec())
    }

    fn epoch_model(&self, epoch: usize) -> &PosteriorModel {
        self.frozen.get(epoch).unwrap_or(&self.model)
    }

    /// `ucb(a, opponents, context)` for every own action on the live model.
    fn live_gains(&self, opponents: &[f64], context: &[f64], beta: f64) -> Result<Vec<f64>, ProtocolError> {
        let view = self.model.view();
        (0..self.actions.len())
            .map(|a| {
                let f = self.model.featurize(&self.point(a, opponents, context))?;
                Ok(view.ucb(&f, beta))
            })
            .collect()
    }

    /// `Σ_τ ucb_τ(a, a^{-i}_τ, z)` over the whole stored history.
    fn stochastic_scores(&self, history: &[Stored], context: &[f64]) -> Result<Vec<f64>, ProtocolError> {
        let k = self.actions.len();
        // Rounds sharing a model epoch and an opponent view share one
        // query point per action, so one forward pass serves all of them.
        let mut groups: Vec<(usize, &[f64], Vec<(usize, f64)>)> = Vec::new();
        let mut lookup: HashMap<(usize, ContextKey), usize> = HashMap::new();
        for s in history {
            let key = (s.epoch, ContextKey::new(&s.opponents));
            let g = *lookup.entry(key).or_insert_with(|| {
                groups.push((s.epoch, &s.opponents, Vec::new()));
                groups.len() - 1
            });
            groups[g].2.push((s.len, s.beta));
        }
        let mut scores = vec![0.0; k];
        for (epoch, opponents, members) in &groups {
            let model = self.epoch_model(*epoch);
            let max_len = members.iter().map(|m| m.0).max().unwrap_or(0);
            for (a, score) in scores.iter_mut().enumerate() {
                let f = model.featurize(&self.point(a, opponents, context))?;
                let post = model.prefix_mean_vars(&f, max_len);
                for &(len, beta) in members {
                    let (m, v) = post[len];
                    *score += (m + beta * v.sqrt()).min(1.0);
                }
            }
        }
        Ok(scores)
    }

    fn check_pending(&mut self, fb: &Feedback<'_>) -> Result<Pending, ProtocolError> {
        let pending = self.pending.take().ok_or(ProtocolError::FeedbackWithoutChoose)?;
        if pending.action != fb.action || ContextKey::new(&pending.context) != ContextKey::new(fb.context) {
            let got = fb.action;
            let expected = pending.action;
            self.pending = Some(pending);
            return Err(ProtocolError::Mismatch { expected, got });
        }
        Ok(pending)
    }

    /// Appends the observation, freezing the model first if the budget
    /// is about to evict data.
    fn observe(&mut self, x: Point, y: f64) -> Result<(), ProtocolError> {
        if self.model.will_evict() {
            self.frozen.push(self.model.clone());
        }
        self.model.update(x, y)?;
        Ok(())
    }

    fn record_gains(&mut self, pending: &Pending, gains: &[f64]) {
        match &mut self.strategy {
            StrategyState::Finite { states, .. } => states[pending.group].update(gains),
            StrategyState::Net(net) => net.state_mut(pending.group).update(gains),
            StrategyState::Stochastic { .. } => unreachable!("stochastic rule keeps no per-round gains"),
        }
        if self.config.record_scores {
            self.score_log.push(ScoreRecord {
                group: pending.group,
                gains: gains.to_vec(),
                eta: pending.eta,
            });
        }
    }

    fn stochastic_store(&mut self, opponents: &[f64], beta: f64) -> Result<(), ProtocolError> {
        let epoch = self.frozen.len();
        let len = self.model.len();
        // Running sums for known contexts.
        let known = match &self.strategy {
            StrategyState::Stochastic { known, .. } => known.clone(),
            _ => unreachable!(),
        };
        let mut increments = Vec::with_capacity(known.len());
        for z in &known {
            increments.push((ContextKey::new(z), self.live_gains(opponents, z, beta)?));
        }
        if let StrategyState::Stochastic { history, sums, .. } = &mut self.strategy {
            history.push(Stored {
                opponents: opponents.to_vec(),
                epoch,
                len,
                beta,
            });
            for (key, inc) in increments {
                let s = sums.get_mut(&key).expect("known context");
                s.iter_mut().zip(&inc).for_each(|(s, g)| *s += g);
            }
        }
        Ok(())
    }
}

impl Learner for CgpmwLearner {
    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn choose(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<Choice, ProtocolError> {
        let k = self.actions.len();
        let rate = self.config.rate;
        let (distribution, group, eta) = match &mut self.strategy {
            StrategyState::Finite { index, states } => {
                let g = *index.entry(ContextKey::new(context)).or_insert_with(|| {
                    states.push(MWState::new(k));
                    states.len() - 1
                });
                let eta = rate.eta(k, states[g].update_count() + 1);
                (mw_distribution(&states[g], eta), g, eta)
            }
            StrategyState::Net(net) => {
                let (g, _) = net.assign(context);
                let eta = rate.eta(k, net.state(g).update_count() + 1);
                (mw_distribution(net.state(g), eta), g, eta)
            }
            StrategyState::Stochastic { history, sums, .. } => {
                let eta = rate.eta(k, history.len() + 1);
                if history.is_empty() {
                    (vec![1.0 / k as f64; k], 0, eta)
                } else if let Some(s) = sums.get(&ContextKey::new(context)) {
                    (exp_weights(s, eta), 0, eta)
                } else {
                    let history = std::mem::take(history);
                    let scores = self.stochastic_scores(&history, context);
                    if let StrategyState::Stochastic { history: h, .. } = &mut self.strategy {
                        *h = history;
                    }
                    (exp_weights(&scores?, eta), 0, eta)
                }
            }
        };
        let action = sample_index(&distribution, rng);
        self.pending = Some(Pending {
            context: context.to_vec(),
            action,
            group,
            eta,
        });
        Ok(Choice { action, distribution })
    }

    fn feedback(&mut self, fb: &Feedback<'_>) -> Result<(), ProtocolError> {
        let pending = self.check_pending(fb)?;
        let beta = self.config.beta.beta(self.config.lambda, self.model.realized_information_gain());
        let x = self.point(fb.action, fb.opponents, fb.context);
        let stochastic = matches!(self.strategy, StrategyState::Stochastic { .. });
        match self.config.ucb_timing {
            UcbTiming::Before => {
                if stochastic {
                    self.stochastic_store(fb.opponents, beta)?;
                } else {
                    let gains = self.live_gains(fb.opponents, fb.context, beta)?;
                    self.record_gains(&pending, &gains);
                }
                self.observe(x, fb.reward)?;
            }
            UcbTiming::After => {
                self.observe(x, fb.reward)?;
                if stochastic {
                    self.stochastic_store(fb.opponents, beta)?;
                } else {
                    let gains = self.live_gains(fb.opponents, fb.context, beta)?;
                    self.record_gains(&pending, &gains);
                }
            }
        }
        self.rounds += 1;
        Ok(())
    }
}
