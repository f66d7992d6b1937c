use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Choice, ContextGenerator, ContextualGame, Feedback, GameTrace, Learner, ProtocolError, TraceRow};

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn derive_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-run randomness: one stream for Nature, and per player one stream for
/// action sampling and one for observation noise.
#[derive(Debug, Clone)]
pub struct Streams {
    pub nature: ChaCha8Rng,
    pub players: Vec<ChaCha8Rng>,
    pub noise: Vec<ChaCha8Rng>,
}

impl Streams {
    pub fn new(seed: u64, players: usize) -> Self {
        Streams {
            nature: derive_stream(seed, 0),
            players: (0..players as u64).map(|i| derive_stream(seed, 2 * i + 1)).collect(),
            noise: (0..players as u64).map(|i| derive_stream(seed, 2 * i + 2)).collect(),
        }
    }
}

/// Gaussian observation noise with standard deviation `std` times the
/// reward range (the range is 1 for rewards in `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub std: f64,
}

impl NoiseModel {
    pub fn new(std: f64) -> Self {
        NoiseModel { std }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.std * z
    }
}

/// Plays one round with contexts already drawn: learners choose, rewards are
/// computed, noise is added and feedback is delivered.
///
/// With `order = None`, learners choose concurrently. Otherwise they are
/// polled sequentially in the given order; the result does not depend on it.
pub fn play_round(
    game: &dyn ContextualGame,
    learners: &mut [Box<dyn Learner>],
    round: usize,
    context: Vec<f64>,
    streams: &mut Streams,
    noise: NoiseModel,
    order: Option<&[usize]>,
) -> Result<TraceRow, ProtocolError> {
    let n = game.num_players();
    if learners.len() != n {
        return Err(ProtocolError::Config(format!(
            "{} learners supplied for a {n}-player game",
            learners.len()
        )));
    }
    for (i, l) in learners.iter().enumerate() {
        if l.num_actions() != game.num_actions(i) {
            return Err(ProtocolError::Config(format!(
                "learner {i} has {} actions, game expects {}",
                l.num_actions(),
                game.num_actions(i)
            )));
        }
    }
    let views: Vec<Vec<f64>> = (0..n).map(|i| game.context_view(i, &context)).collect();

    let choices: Vec<Choice> = match order {
        None => learners
            .par_iter_mut()
            .zip(streams.players.par_iter_mut())
            .zip(views.par_iter())
            .map(|((l, rng), z)| l.choose(z, rng))
            .collect::<Result<_, _>>()?,
        Some(order) => {
            let mut slots: Vec<Option<Choice>> = vec![None; n];
            for &i in order {
                slots[i] = Some(learners[i].choose(&views[i], &mut streams.players[i])?);
            }
            slots
                .into_iter()
                .enumerate()
                .map(|(i, c)| c.ok_or_else(|| ProtocolError::Config(format!("player {i} missing from poll order"))))
                .collect::<Result<_, _>>()?
        }
    };

    let actions: Vec<usize> = choices.iter().map(|c| c.action).collect();
    let rewards = game.rewards(&actions, &context);
    let observed: Vec<f64> = rewards
        .iter()
        .zip(streams.noise.iter_mut())
        .map(|(r, rng)| r + noise.sample(rng))
        .collect();
    let opponents = game.opponent_views(&actions);

    learners
        .par_iter_mut()
        .enumerate()
        .map(|(i, l)| {
            l.feedback(&Feedback {
                context: &views[i],
                action: actions[i],
                opponents: &opponents[i],
                reward: observed[i],
            })
        })
        .collect::<Result<Vec<()>, _>>()?;

    Ok(TraceRow {
        round,
        context,
        actions,
        rewards,
        observed,
        distributions: choices.into_iter().map(|c| c.distribution).collect(),
    })
}

/// Drives a game round by round with its own randomness streams.
#[derive(Debug, Clone)]
pub struct RoundEngine {
    streams: Streams,
    noise: NoiseModel,
    round: usize,
    order: Option<Vec<usize>>,
}

impl RoundEngine {
    pub fn new(seed: u64, players: usize, noise: NoiseModel) -> Self {
        RoundEngine {
            streams: Streams::new(seed, players),
            noise,
            round: 0,
            order: None,
        }
    }

    /// Polls learners sequentially in `order` instead of concurrently.
    pub fn with_poll_order(mut self, order: Vec<usize>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn step(
        &mut self,
        game: &dyn ContextualGame,
        learners: &mut [Box<dyn Learner>],
        generator: &mut ContextGenerator,
        history: &[TraceRow],
    ) -> Result<TraceRow, ProtocolError> {
        let context = generator.next(self.round, history, &mut self.streams.nature);
        let row = play_round(
            game,
            learners,
            self.round,
            context,
            &mut self.streams,
            self.noise,
            self.order.as_deref(),
        )?;
        self.round += 1;
        Ok(row)
    }
}

/// Plays `rounds` rounds from a fresh engine and returns the full trace.
pub fn run_game(
    game: &dyn ContextualGame,
    learners: &mut [Box<dyn Learner>],
    generator: &mut ContextGenerator,
    rounds: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<GameTrace, ProtocolError> {
    let mut engine = RoundEngine::new(seed, game.num_players(), noise);
    let mut rows = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let row = engine.step(game, learners, generator, &rows)?;
        rows.push(row);
    }
    Ok(GameTrace::new(game.num_players(), rows))
}
