use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use contextual_games::analysis::{analyze, AnalysisReport};
use contextual_games::game::{ContextualGame, GameTrace, NoiseModel, RoundEngine};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::learners::LearnerConfig;
use crate::spec::SimGame;

/// Per-round series of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    /// `(1/t) Σ_{τ≤t}` of the agent-averaged loss `1 − r`.
    pub time_averaged_loss: Vec<f64>,
    pub congestion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub label: String,
    pub runs: usize,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    /// Congestion averaged over rounds, then over runs.
    pub congestion_mean: f64,
    pub congestion_std: f64,
    #[serde(default)]
    pub max_average_regret_mean: Option<f64>,
    #[serde(default)]
    pub cce_gap_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rounds: usize,
    pub runs: usize,
    pub seed: u64,
    pub players: usize,
    pub learners: Vec<LearnerSummary>,
}

/// One row of `aggregate.csv`. Rounds are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub learner: String,
    pub round: usize,
    pub loss_mean: f64,
    pub loss_std: f64,
    pub congestion_mean: f64,
    pub congestion_std: f64,
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    round: usize,
    agent: usize,
    action: usize,
    reward: f64,
    observed: f64,
    raw_reward: f64,
    loss: f64,
    avg_congestion: f64,
}

/// A finished run with its trace still in memory.
pub struct RunResult {
    pub trace: GameTrace,
    pub series: RunSeries,
    pub analysis: Option<AnalysisReport>,
}

/// Plays one run of `learner` seeded with `seed`.
pub fn play_run(game: &SimGame, config: &ExperimentConfig, learner: &LearnerConfig, seed: u64) -> Result<RunResult> {
    let n = game.num_players();
    let mut learners = learner.build(game, config.rounds)?;
    let mut engine = RoundEngine::new(seed, n, NoiseModel::new(config.noise_std));
    if config.sequential_polling {
        engine = engine.with_poll_order((0..n).collect());
    }
    let mut generator = game.context_generator();
    let mut rows = Vec::with_capacity(config.rounds);
    let mut loss_sum = 0.0;
    let mut series = RunSeries {
        time_averaged_loss: Vec::with_capacity(config.rounds),
        congestion: Vec::with_capacity(config.rounds),
    };
    for t in 0..config.rounds {
        let row = engine.step(game, &mut learners, &mut generator, &rows)?;
        loss_sum += row.rewards.iter().map(|r| 1.0 - r).sum::<f64>() / n as f64;
        series.time_averaged_loss.push(loss_sum / (t + 1) as f64);
        series.congestion.push(game.congestion(&row.actions, &row.context));
        rows.push(row);
    }
    let trace = GameTrace::new(n, rows);
    let analysis = if config.analysis.enabled {
        let zeta = game.context_generator().distribution();
        Some(analyze(&trace, game, &config.analysis.options(zeta))?)
    } else {
        None
    };
    Ok(RunResult { trace, series, analysis })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::Other(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Other(format!("{}: {e}", path.display()))
}

/// `round,agent,action,reward,observed,raw_reward,loss,avg_congestion`, one
/// line per agent and round, rounds numbered from 1.
pub fn write_trace_csv(path: &Path, game: &SimGame, trace: &GameTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in trace.rows() {
        let raw = game.raw_rewards(&row.actions, &row.context);
        let congestion = game.congestion(&row.actions, &row.context);
        for agent in 0..trace.num_players() {
            w.serialize(TraceCsvRow {
                round: row.round + 1,
                agent,
                action: row.actions[agent],
                reward: row.rewards[agent],
                observed: row.observed[agent],
                raw_reward: raw[agent],
                loss: 1.0 - row.rewards[agent],
                avg_congestion: congestion,
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-round mean and sample standard deviation across runs.
pub fn aggregate(label: &str, runs: &[RunSeries]) -> Vec<AggregateRow> {
    let rounds = runs.iter().map(|r| r.time_averaged_loss.len()).min().unwrap_or(0);
    (0..rounds)
        .map(|t| {
            let loss: Vec<f64> = runs.iter().map(|r| r.time_averaged_loss[t]).collect();
            let cong: Vec<f64> = runs.iter().map(|r| r.congestion[t]).collect();
            let (loss_mean, loss_std) = mean_std(&loss);
            let (congestion_mean, congestion_std) = mean_std(&cong);
            AggregateRow {
                learner: label.to_string(),
                round: t + 1,
                loss_mean,
                loss_std,
                congestion_mean,
                congestion_std,
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

struct RunRecord {
    series: RunSeries,
    analysis: Option<(f64, f64)>,
}

fn run_into(dir: &Path, game: &SimGame, config: &ExperimentConfig, learner: &LearnerConfig, run: usize) -> Result<RunRecord> {
    let result = play_run(game, config, learner, config.seed.wrapping_add(run as u64))?;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_trace_csv(&dir.join("trace.csv"), game, &result.trace)?;
    if config.save_trace_json {
        let path = dir.join("trace.json");
        let mut w = create(&path)?;
        result.trace.to_json(&mut w)?;
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }
    if let Some(report) = &result.analysis {
        write_json(&dir.join("analysis.json"), report)?;
    }
    Ok(RunRecord {
        series: result.series,
        analysis: result.analysis.map(|a| (a.max_average_regret, a.cce_gap)),
    })
}

fn summarize(label: &str, records: &[RunRecord]) -> LearnerSummary {
    let finals: Vec<f64> = records
        .iter()
        .map(|r| *r.series.time_averaged_loss.last().unwrap_or(&0.0))
        .collect();
    let congestion: Vec<f64> = records
        .iter()
        .map(|r| r.series.congestion.iter().sum::<f64>() / r.series.congestion.len().max(1) as f64)
        .collect();
    let (final_loss_mean, final_loss_std) = mean_std(&finals);
    let (congestion_mean, congestion_std) = mean_std(&congestion);
    let analysed: Vec<(f64, f64)> = records.iter().filter_map(|r| r.analysis).collect();
    let (regret, gap) = if analysed.len() == records.len() && !analysed.is_empty() {
        let n = analysed.len() as f64;
        (
            Some(analysed.iter().map(|a| a.0).sum::<f64>() / n),
            Some(analysed.iter().map(|a| a.1).sum::<f64>() / n),
        )
    } else {
        (None, None)
    };
    LearnerSummary {
        label: label.to_string(),
        runs: records.len(),
        final_loss_mean,
        final_loss_std,
        congestion_mean,
        congestion_std,
        max_average_regret_mean: regret,
        cce_gap_mean: gap,
    }
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial"))
}

fn publish(staging: &Path, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let entries = fs::read_dir(staging).map_err(|e| HarnessError::io(staging, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| HarnessError::io(staging, e))?;
        let target = out.join(entry.file_name());
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(|e| HarnessError::io(&target, e))?;
        } else if target.exists() {
            fs::remove_file(&target).map_err(|e| HarnessError::io(&target, e))?;
        }
        fs::rename(entry.path(), &target).map_err(|e| HarnessError::io(&target, e))?;
    }
    fs::remove_dir_all(staging).map_err(|e| HarnessError::io(staging, e))
}

fn write_all(staging: &Path, game: &SimGame, config: &ExperimentConfig) -> Result<ExperimentSummary> {
    fs::create_dir_all(staging).map_err(|e| HarnessError::io(staging, e))?;
    write_json(&staging.join("config.json"), config)?;
    write_json(&staging.join("game.json"), &config.game.canonicalized())?;

    let jobs: Vec<(usize, usize)> = (0..config.learners.len())
        .flat_map(|l| (0..config.runs).map(move |r| (l, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(l, r)| {
            let learner = &config.learners[l];
            let dir = staging.join(&learner.label).join(format!("run-{r}"));
            run_into(&dir, game, config, learner, r)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut learners = Vec::new();
    for (l, chunk) in records.chunks(config.runs).enumerate() {
        let label = &config.learners[l].label;
        let series: Vec<RunSeries> = chunk.iter().map(|r| r.series.clone()).collect();
        rows.extend(aggregate(label, &series));
        learners.push(summarize(label, chunk));
    }
    write_aggregate_csv(&staging.join("aggregate.csv"), &rows)?;
    let summary = ExperimentSummary {
        rounds: config.rounds,
        runs: config.runs,
        seed: config.seed,
        players: game.num_players(),
        learners,
    };
    write_json(&staging.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Validates `config`, plays every (learner, run) pair in parallel and
/// writes the artifacts under `config.output_dir`:
///
/// ```text
/// config.json  game.json  aggregate.csv  summary.json
/// <label>/run-<r>/trace.csv  [trace.json]  [analysis.json]
/// ```
///
/// Outputs are staged next to the output directory and only moved into
/// place once everything succeeded; on failure nothing is left behind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let game = config.game.build()?;
    config.validate_players(game.num_players())?;
    run_with_game(config, &game)
}

/// [`run_experiment`] with a game that was already built from `config.game`.
pub fn run_with_game(config: &ExperimentConfig, game: &SimGame) -> Result<ExperimentSummary> {
    let staging = staging_dir(&config.output_dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| HarnessError::io(&staging, e))?;
    }
    let result = write_all(&staging, game, config).and_then(|s| publish(&staging, &config.output_dir).map(|_| s));
    if result.is_err() && staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

/// Reads an aggregate CSV back.
pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| csv_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn aggregate_rows() {
        let runs = vec![
            RunSeries {
                time_averaged_loss: vec![0.5, 0.25],
                congestion: vec![1.0, 2.0],
            },
            RunSeries {
                time_averaged_loss: vec![0.5, 0.75],
                congestion: vec![3.0, 2.0],
            },
        ];
        let rows = aggregate("x", &runs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].round, 1);
        assert_eq!((rows[0].loss_mean, rows[0].loss_std), (0.5, 0.0));
        assert_eq!(rows[1].loss_mean, 0.5);
        assert_eq!(rows[0].congestion_mean, 2.0);
        assert_eq!(rows[1].congestion_std, 0.0);
    }

    #[test]
    fn staging_is_a_sibling() {
        assert_eq!(staging_dir(Path::new("a/b/out")), PathBuf::from("a/b/.out.partial"));
    }
}
