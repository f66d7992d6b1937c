use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ContextualGame;

/// One round of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub context: Vec<f64>,
    pub actions: Vec<usize>,
    /// True rewards `r^i(a_t, z_t)`.
    pub rewards: Vec<f64>,
    /// Noisy rewards delivered to the learners.
    pub observed: Vec<f64>,
    pub distributions: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no rounds")]
    Empty,
    #[error("round {round}: {what}")]
    Inconsistent { round: usize, what: String },
    #[error("round {round}, player {player}: stored reward {stored} differs from recomputed {recomputed}")]
    RewardMismatch {
        round: usize,
        player: usize,
        stored: f64,
        recomputed: f64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Round-by-round record of a repeated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    num_players: usize,
    rows: Vec<TraceRow>,
}

impl GameTrace {
    pub fn new(num_players: usize, rows: Vec<TraceRow>) -> Self {
        GameTrace { num_players, rows }
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First `t` rounds.
    pub fn truncated(&self, t: usize) -> GameTrace {
        GameTrace::new(self.num_players, self.rows[..t.min(self.len())].to_vec())
    }

    /// Checks that every row has one entry per player.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.rows.is_empty() {
            return Err(TraceError::Empty);
        }
        let n = self.num_players;
        for row in &self.rows {
            for (what, len) in [
                ("actions", row.actions.len()),
                ("rewards", row.rewards.len()),
                ("observed", row.observed.len()),
                ("distributions", row.distributions.len()),
            ] {
                if len != n {
                    return Err(TraceError::Inconsistent {
                        round: row.round,
                        what: format!("{len} {what} for {n} players"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Recomputes true rewards from `game` and requires bit-identical values.
    pub fn verify_rewards(&self, game: &dyn ContextualGame) -> Result<(), TraceError> {
        self.validate()?;
        if game.num_players() != self.num_players {
            return Err(TraceError::Inconsistent {
                round: 0,
                what: format!("trace has {} players, game has {}", self.num_players, game.num_players()),
            });
        }
        for row in &self.rows {
            for (i, &a) in row.actions.iter().enumerate() {
                if a >= game.num_actions(i) {
                    return Err(TraceError::Inconsistent {
                        round: row.round,
                        what: format!("player {i} action {a} out of range"),
                    });
                }
            }
            let recomputed = game.rewards(&row.actions, &row.context);
            for (i, (s, r)) in row.rewards.iter().zip(&recomputed).enumerate() {
                if s.to_bits() != r.to_bits() {
                    return Err(TraceError::RewardMismatch {
                        round: row.round,
                        player: i,
                        stored: *s,
                        recomputed: *r,
                    });
                }
            }
        }
        Ok(())
    }

    /// One line per player-round. Vector fields are `;`-separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        writeln!(w, "round,player,context,action,reward,observed,distribution")?;
        for row in &self.rows {
            let ctx = join(&row.context);
            for i in 0..self.num_players {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    row.round,
                    i,
                    ctx,
                    row.actions[i],
                    row.rewards[i],
                    row.observed[i],
                    join(&row.distributions[i])
                )?;
            }
        }
        Ok(())
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<(), TraceError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_json<R: std::io::Read>(r: R) -> Result<Self, TraceError> {
        let trace: GameTrace = serde_json::from_reader(r)?;
        trace.validate()?;
        Ok(trace)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TabularGame;

    fn game() -> TabularGame {
        TabularGame::new(
            vec![2],
            vec![vec![0.0]],
            vec![vec![vec![0.1], vec![0.7]]],
        )
        .unwrap()
    }

    fn row(round: usize, a: usize, r: f64) -> TraceRow {
        TraceRow {
            round,
            context: vec![0.0],
            actions: vec![a],
            rewards: vec![r],
            observed: vec![r],
            distributions: vec![vec![0.5, 0.5]],
        }
    }

    #[test]
    fn replay_reproduces_stored_rewards() {
        let t = GameTrace::new(1, vec![row(0, 0, 0.1), row(1, 1, 0.7)]);
        t.verify_rewards(&game()).unwrap();
        let bad = GameTrace::new(1, vec![row(0, 1, 0.1)]);
        assert!(matches!(
            bad.verify_rewards(&game()),
            Err(TraceError::RewardMismatch { round: 0, player: 0, .. })
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = GameTrace::new(1, vec![row(0, 0, 0.1), row(1, 1, 0.7)]);
        let mut buf = Vec::new();
        t.to_json(&mut buf).unwrap();
        assert_eq!(GameTrace::from_json(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn csv_has_one_line_per_player_round() {
        let t = GameTrace::new(1, vec![row(0, 0, 0.1), row(1, 1, 0.7)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "1,0,0,1,0.7,0.7,0.5;0.5");
    }

    #[test]
    fn empty_and_ragged_traces_are_rejected() {
        assert!(matches!(GameTrace::new(1, vec![]).validate(), Err(TraceError::Empty)));
        let mut r = row(0, 0, 0.1);
        r.rewards.push(0.2);
        assert!(matches!(
            GameTrace::new(1, vec![r]).validate(),
            Err(TraceError::Inconsistent { .. })
        ));
    }
}
