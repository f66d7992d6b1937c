use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use contextual_games::analysis::AnalysisOptions;
use contextual_games::game::SyntheticGameParams;
use contextual_games::kernels::{BetaRule, InputMap, KernelSpec};

use crate::error::{HarnessError, Result};
use crate::learners::{KernelParams, LearnerConfig, LearnerSpec};
use crate::spec::{GameSpec, RoutingSpec};

pub const SCHEMA_VERSION: u32 = 1;

fn default_runs() -> usize {
    5
}

fn default_true() -> bool {
    true
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Common `μ` for the smoothness certificate; none skips the efficiency bound.
    #[serde(default)]
    pub smoothness_mu: Option<f64>,
    #[serde(default)]
    pub conservative: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            enabled: true,
            delta: default_delta(),
            smoothness_mu: None,
            conservative: false,
        }
    }
}

impl AnalysisSettings {
    pub fn options(&self, zeta: Option<Vec<(Vec<f64>, f64)>>) -> AnalysisOptions {
        AnalysisOptions {
            zeta,
            delta: self.delta,
            smoothness_mu: self.smoothness_mu,
            conservative: self.conservative,
        }
    }
}

/// Everything needed to reproduce an experiment.
///
/// Run `r` is seeded with `seed + r`; inside a run the engine splits that
/// seed into one stream for Nature, one per player for action sampling and
/// one per player for observation noise. The game itself is built once from
/// `game`, independently of `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub game: GameSpec,
    pub rounds: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Standard deviation of the Gaussian noise on observed rewards.
    #[serde(default)]
    pub noise_std: f64,
    pub learners: Vec<LearnerConfig>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub save_trace_json: bool,
    /// Poll learners one after another instead of concurrently.
    #[serde(default)]
    pub sequential_polling: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SyntheticSmall,
    SiouxFalls,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "synthetic-small" => Some(Preset::SyntheticSmall),
            "sioux-falls" => Some(Preset::SiouxFalls),
            _ => None,
        }
    }

    pub fn config(self, data_dir: &Path) -> ExperimentConfig {
        match self {
            Preset::SyntheticSmall => ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                game: GameSpec::Synthetic {
                    params: synthetic_small_params(0),
                },
                rounds: 2000,
                runs: 1,
                seed: 0,
                output_dir: PathBuf::from("out/synthetic-small"),
                noise_std: 0.01,
                learners: vec![LearnerConfig::uniform(LearnerSpec::CgpmwStochastic(KernelParams {
                    beta: Some(SYNTHETIC_SMALL_BETA),
                    ..KernelParams::default()
                }))],
                analysis: AnalysisSettings::default(),
                save_trace_json: true,
                sequential_polling: false,
            },
            Preset::SiouxFalls => ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                game: GameSpec::Routing(RoutingSpec {
                    net: data_dir.join("SiouxFalls_net.tntp"),
                    trips: data_dir.join("SiouxFalls_trips.tntp"),
                    nodes: Some(data_dir.join("SiouxFalls_node.tntp")),
                    routes: 5,
                    profiles: 10,
                    calibration_samples: 10_000,
                    demand_multiplier: 1.0,
                    agents: None,
                    seed: 0,
                }),
                rounds: 100,
                runs: 5,
                seed: 0,
                output_dir: PathBuf::from("out/sioux-falls"),
                noise_std: 0.001,
                learners: ["cgpmw-stochastic", "cgpmw-epsnet", "gpmw", "robust-lin-exp3", "no-learning"]
                    .iter()
                    .map(|k| LearnerConfig::uniform(LearnerSpec::from_kind(k).unwrap()))
                    .collect(),
                analysis: AnalysisSettings::default(),
                save_trace_json: false,
                sequential_polling: false,
            },
        }
    }
}

/// Confidence width of the synthetic-small learners: the schedule for the
/// preset's RKHS bound and noise level.
pub const SYNTHETIC_SMALL_BETA: BetaRule = BetaRule::Schedule {
    bound: 0.5,
    noise_std: 0.01,
    delta: 0.1,
    two_sided: true,
};

/// Two players, three actions, two contexts in `[0, 1]^2`, squared
/// exponential rewards.
pub fn synthetic_small_params(seed: u64) -> SyntheticGameParams {
    SyntheticGameParams {
        players: 2,
        actions: 3,
        context_dim: 2,
        num_contexts: Some(2),
        kernel: KernelSpec::squared_exponential(0.5, InputMap::default()),
        num_centers: 20,
        amplitude: 0.5,
        seed,
    }
}

/// Directory holding the bundled Sioux-Falls files: `CGAMES_DATA_DIR`, then
/// `data/sioux-falls` under the working directory, then the copy in this
/// source tree.
pub fn default_data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("CGAMES_DATA_DIR") {
        return PathBuf::from(dir);
    }
    let local = PathBuf::from("data/sioux-falls");
    if local.is_dir() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sioux-falls")
}

fn is_safe_label(label: &str) -> bool {
    !label.is_empty()
        && label != "."
        && label != ".."
        && label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl ExperimentConfig {
    /// Reads a config file; relative game file paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::config(path.display().to_string(), e.to_string()))?;
        if let Some(dir) = path.parent() {
            config.game.rebase(dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.rounds == 0 {
            return Err(HarnessError::config("rounds", "must be positive"));
        }
        if self.runs == 0 {
            return Err(HarnessError::config("runs", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(HarnessError::config("noise_std", format!("must be a finite non-negative number, got {}", self.noise_std)));
        }
        if !(self.analysis.delta > 0.0 && self.analysis.delta < 1.0) {
            return Err(HarnessError::config("analysis.delta", format!("must lie in (0, 1), got {}", self.analysis.delta)));
        }
        if let Some(mu) = self.analysis.smoothness_mu {
            if !(mu > -1.0) {
                return Err(HarnessError::config("analysis.smoothness_mu", format!("must exceed -1, got {mu}")));
            }
        }
        self.game.validate("game")?;
        if self.learners.is_empty() {
            return Err(HarnessError::config("learners", "at least one learner is required"));
        }
        let mut labels = BTreeSet::new();
        for (i, l) in self.learners.iter().enumerate() {
            if !is_safe_label(&l.label) {
                return Err(HarnessError::config(
                    format!("learners[{i}].label"),
                    format!("`{}` must be non-empty and use only [A-Za-z0-9._-]", l.label),
                ));
            }
            if !labels.insert(l.label.as_str()) {
                return Err(HarnessError::config(format!("learners[{i}].label"), format!("duplicate label `{}`", l.label)));
            }
            l.spec.validate(&format!("learners[{i}].spec"))?;
            for (p, spec) in &l.players {
                spec.validate(&format!("learners[{i}].players.{p}"))?;
            }
        }
        Ok(())
    }

    /// Checks the per-player assignments against the built game's size.
    pub fn validate_players(&self, num_players: usize) -> Result<()> {
        for (i, l) in self.learners.iter().enumerate() {
            if let Some(p) = l.players.keys().find(|p| **p >= num_players) {
                return Err(HarnessError::config(
                    format!("learners[{i}].players.{p}"),
                    format!("the game has {num_players} players"),
                ));
            }
        }
        Ok(())
    }
}
