//! Contextual traffic routing on a TNTP network: route enumeration, BPR
//! travel times, random capacity contexts and reward scaling.

mod game;
mod paths;
mod tntp;

pub use game::{build_agents, subsample_agents, Agent, RewardScaler, RoutingGame};
pub use paths::{k_shortest_routes, Route, RouteSet};
pub use tntp::{load_tntp, parse_net, parse_nodes, parse_trips, write_net, write_trips, Edge, Network, Node, OdDemand};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("no path from {origin} to {destination}")]
    Disconnected { origin: usize, destination: usize },
    #[error("agent {agent} has a constant sampled reward ({value}); cannot scale")]
    Degenerate { agent: usize, value: f64 },
}

/// Fraction of the nominal capacity below which sampled capacities are floored.
pub const CAPACITY_FLOOR: f64 = 1e-3;

/// `f (1 + 0.15 (x/z)^4)`.
pub fn bpr_traveltime(free_flow: f64, load: f64, capacity: f64) -> Result<f64, RoutingError> {
    if !(capacity > 0.0) {
        return Err(RoutingError::Input(format!("capacity must be positive, got {capacity}")));
    }
    Ok(bpr(free_flow, load, capacity))
}

#[inline]
pub(crate) fn bpr(free_flow: f64, load: f64, capacity: f64) -> f64 {
    let r = load / capacity;
    let r2 = r * r;
    free_flow * (1.0 + 0.15 * r2 * r2)
}

/// `−Σ_e own[e] · t_e(own[e] + others[e], z[e])` over full edge vectors.
pub fn agent_reward(free_flow: &[f64], own: &[f64], others: &[f64], capacity: &[f64]) -> Result<f64, RoutingError> {
    let e = free_flow.len();
    if own.len() != e || others.len() != e || capacity.len() != e {
        return Err(RoutingError::Input(format!(
            "edge vectors of lengths {}, {}, {}, {} differ",
            e,
            own.len(),
            others.len(),
            capacity.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..e {
        if own[i] != 0.0 {
            total -= own[i] * bpr_traveltime(free_flow[i], own[i] + others[i], capacity[i])?;
        }
    }
    Ok(total)
}

/// `0.15 (load/z)^4` per edge.
pub fn congestion_metric(load: &[f64], capacity: &[f64]) -> Vec<f64> {
    load.iter()
        .zip(capacity)
        .map(|(x, z)| {
            let r = x / z;
            0.15 * r * r * r * r
        })
        .collect()
}

/// `profiles` capacity vectors with `z[e]` uniform on `[0, 1.2 C_e]`,
/// floored at `CAPACITY_FLOOR · C_e`.
pub fn context_sampler(network: &Network, profiles: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..profiles)
        .map(|_| {
            network
                .edges
                .iter()
                .map(|e| (rng.gen::<f64>() * 1.2 * e.capacity).max(CAPACITY_FLOOR * e.capacity))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpr_hand_values() {
        assert_eq!(bpr_traveltime(2.0, 0.0, 5.0).unwrap(), 2.0);
        assert!((bpr_traveltime(2.0, 5.0, 5.0).unwrap() - 2.3).abs() < 1e-12);
        assert!((bpr_traveltime(1.0, 10.0, 5.0).unwrap() - 3.4).abs() < 1e-12);
        assert!(bpr_traveltime(1.0, 1.0, 0.0).is_err());
        assert!(bpr_traveltime(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn free_flow_limit() {
        let r = agent_reward(&[2.0, 5.0], &[1.0, 0.0], &[0.0, 3.0], &[1e12, 1.0]).unwrap();
        assert!((r + 2.0).abs() < 1e-12);
    }

    #[test]
    fn reward_decreases_with_capacity() {
        let ff = [1.0, 2.0, 3.0];
        let own = [4.0, 4.0, 0.0];
        let others = [10.0, 3.0, 7.0];
        let mut z = vec![10.0, 10.0, 10.0];
        let mut prev = agent_reward(&ff, &own, &others, &z).unwrap();
        for _ in 0..5 {
            z[1] *= 0.8;
            let r = agent_reward(&ff, &own, &others, &z).unwrap();
            assert!(r < prev);
            prev = r;
        }
        assert!(agent_reward(&ff, &own[..2], &others, &z).is_err());
    }

    #[test]
    fn congestion_values() {
        assert_eq!(congestion_metric(&[0.0, 0.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(congestion_metric(&[3.0], &[3.0]), vec![0.15]);
    }

    #[test]
    fn sampled_capacities_stay_in_range() {
        let net = Network {
            num_nodes: 2,
            num_zones: 2,
            first_thru_node: 1,
            edges: (0..30)
                .map(|i| Edge {
                    from: 1,
                    to: 2,
                    capacity: 10.0 + i as f64,
                    length: 1.0,
                    free_flow_time: 1.0,
                    b: 0.15,
                    power: 4.0,
                    speed: 0.0,
                    toll: 0.0,
                    link_type: 1,
                })
                .collect(),
            nodes: Vec::new(),
        };
        let z = context_sampler(&net, 10, 7);
        assert_eq!(z.len(), 10);
        for profile in &z {
            for (v, e) in profile.iter().zip(&net.edges) {
                assert!(*v > 0.0 && *v <= 1.2 * e.capacity);
                assert!(*v >= CAPACITY_FLOOR * e.capacity);
            }
        }
        assert_eq!(context_sampler(&net, 10, 7), z);
        assert_ne!(context_sampler(&net, 10, 8), z);
    }
}
