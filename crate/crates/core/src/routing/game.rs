use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bpr, k_shortest_routes, Network, OdDemand, Route, RoutingError};
use crate::baselines::{ContextDistribution, FeatureMap};
use crate::game::ContextualGame;
use crate::kernels::{InputMap, KernelSpec, Normalization, Projection};

/// One origin-destination pair with its demand and candidate routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    pub routes: Vec<Route>,
    /// Union of route edges, ascending.
    pub relevant: Vec<usize>,
    /// Fewer than the requested number of routes exist.
    pub incomplete: bool,
}

impl Agent {
    fn new(origin: usize, destination: usize, demand: f64, routes: Vec<Route>, incomplete: bool) -> Self {
        let mut relevant: Vec<usize> = routes.iter().flat_map(|r| r.edges.iter().copied()).collect();
        relevant.sort_unstable();
        relevant.dedup();
        Agent {
            origin,
            destination,
            demand,
            routes,
            relevant,
            incomplete,
        }
    }

    /// Route incidence `x^i` over all `num_edges` edges.
    pub fn route_vector(&self, action: usize, num_edges: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_edges];
        for &e in &self.routes[action].edges {
            x[e] = self.demand;
        }
        x
    }

    /// Route incidence restricted to the relevant edges.
    pub fn local_route_vector(&self, action: usize) -> Vec<f64> {
        let route = &self.routes[action].edges;
        self.relevant
            .iter()
            .map(|e| if route.contains(e) { self.demand } else { 0.0 })
            .collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.relevant.iter().map(|&e| full[e]).collect()
    }
}

/// One agent per OD pair with `k` free-flow-shortest routes each. Demands
/// are multiplied by `demand_multiplier`.
pub fn build_agents(
    network: &Network,
    demands: &[OdDemand],
    k: usize,
    demand_multiplier: f64,
) -> Result<Vec<Agent>, RoutingError> {
    if !(demand_multiplier > 0.0) {
        return Err(RoutingError::Input(format!(
            "demand multiplier must be positive, got {demand_multiplier}"
        )));
    }
    demands
        .iter()
        .map(|od| {
            let set = k_shortest_routes(network, od.origin, od.destination, k)?;
            Ok(Agent::new(
                od.origin,
                od.destination,
                od.demand * demand_multiplier,
                set.routes,
                set.incomplete,
            ))
        })
        .collect()
}

/// Keeps `n` evenly spaced agents and scales their demand by `N/n`, so the
/// network carries roughly the original total demand.
pub fn subsample_agents(agents: &[Agent], n: usize) -> Result<Vec<Agent>, RoutingError> {
    let total = agents.len();
    if n == 0 || n > total {
        return Err(RoutingError::Input(format!("cannot keep {n} of {total} agents")));
    }
    let factor = total as f64 / n as f64;
    Ok((0..n)
        .map(|j| {
            let mut a = agents[j * total / n].clone();
            a.demand *= factor;
            a
        })
        .collect())
}

/// Per-agent raw reward range `[lo, hi]` mapped affinely onto `[0, 1]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RewardScaler {
    pub bounds: Vec<(f64, f64)>,
    #[serde(skip)]
    clamps: AtomicU64,
}

impl Clone for RewardScaler {
    fn clone(&self) -> Self {
        RewardScaler {
            bounds: self.bounds.clone(),
            clamps: AtomicU64::new(self.clamp_count()),
        }
    }
}

impl PartialEq for RewardScaler {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds
    }
}

impl RewardScaler {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, RoutingError> {
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(hi > lo) {
                return Err(RoutingError::Degenerate { agent: i, value: *lo });
            }
        }
        Ok(RewardScaler {
            bounds,
            clamps: AtomicU64::new(0),
        })
    }

    /// `(raw − lo)/(hi − lo)`, clamped into `[0, 1]`.
    pub fn scale(&self, agent: usize, raw: f64) -> f64 {
        let (lo, hi) = self.bounds[agent];
        let s = (raw - lo) / (hi - lo);
        if s < 0.0 || s > 1.0 {
            self.clamps.fetch_add(1, Ordering::Relaxed);
            s.clamp(0.0, 1.0)
        } else {
            s
        }
    }

    /// Raw rewards that fell outside the sampled range so far.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }
}

/// Quantile used to turn sampled load norms into kernel input scales.
const SCALE_QUANTILE: f64 = 0.95;

/// Sioux-Falls-style contextual routing game. Contexts are full capacity
/// vectors; agents observe them and the opponents' load on their relevant
/// edges only. Rewards are scaled travel times in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingGame {
    free_flow: Vec<f64>,
    capacity: Vec<f64>,
    agents: Vec<Agent>,
    contexts: Vec<Vec<f64>>,
    scaler: RewardScaler,
    load_scales: Vec<f64>,
    ratio_scales: Vec<f64>,
}

/// Sum of per-edge contributions in ascending order, so the result does not
/// depend on agent order.
fn sorted_sum(bucket: &mut [f64]) -> f64 {
    bucket.sort_unstable_by(f64::total_cmp);
    bucket.iter().sum()
}

fn total_loads(agents: &[Agent], num_edges: usize, joint: &[usize]) -> Vec<f64> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); num_edges];
    for (agent, &a) in agents.iter().zip(joint) {
        for &e in &agent.routes[a].edges {
            buckets[e].push(agent.demand);
        }
    }
    buckets.iter_mut().map(|b| sorted_sum(b)).collect()
}

/// Raw reward of `agent` taking `action` against opponents' loads derived
/// from `total` and the action the agent actually took.
fn deviation_raw(
    free_flow: &[f64],
    agent: &Agent,
    taken: usize,
    action: usize,
    total: &[f64],
    z: &[f64],
) -> f64 {
    let d = agent.demand;
    let taken_edges = &agent.routes[taken].edges;
    let mut r = 0.0;
    for &e in &agent.routes[action].edges {
        let own_before = if taken_edges.contains(&e) { d } else { 0.0 };
        let load = (total[e] - own_before) + d;
        r -= d * bpr(free_flow[e], load, z[e]);
    }
    r
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx]
}

impl RoutingGame {
    /// Calibrates reward bounds and kernel input scales from `samples`
    /// uniformly random joint plays under contexts drawn uniformly from
    /// `contexts`.
    pub fn new(
        network: &Network,
        agents: Vec<Agent>,
        contexts: Vec<Vec<f64>>,
        samples: usize,
        seed: u64,
    ) -> Result<Self, RoutingError> {
        let e = network.num_edges();
        if agents.is_empty() {
            return Err(RoutingError::Input("no agents".into()));
        }
        if contexts.is_empty() || contexts.iter().any(|z| z.len() != e || z.iter().any(|v| !(*v > 0.0))) {
            return Err(RoutingError::Input(format!(
                "contexts must be positive vectors of length {e}"
            )));
        }
        if samples == 0 {
            return Err(RoutingError::Input("at least one calibration sample is needed".into()));
        }
        let free_flow = network.free_flow_times();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = agents.len();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
        let mut load_norms = vec![Vec::with_capacity(samples); n];
        let mut ratio_norms = vec![Vec::with_capacity(samples); n];
        for _ in 0..samples {
            let z = &contexts[rng.gen_range(0..contexts.len())];
            let joint: Vec<usize> = agents.iter().map(|a| rng.gen_range(0..a.routes.len())).collect();
            let total = total_loads(&agents, e, &joint);
            for (i, agent) in agents.iter().enumerate() {
                let raw = deviation_raw(&free_flow, agent, joint[i], joint[i], &total, z);
                let b = &mut bounds[i];
                b.0 = b.0.min(raw);
                b.1 = b.1.max(raw);
                let (mut ln, mut rn) = (0.0, 0.0);
                for &edge in &agent.relevant {
                    ln += total[edge] * total[edge];
                    let q = total[edge] / z[edge];
                    rn += q * q;
                }
                load_norms[i].push(ln.sqrt());
                ratio_norms[i].push(rn.sqrt());
            }
        }
        let scaler = RewardScaler::new(bounds)?;
        let positive = |v: f64| if v > 0.0 { v } else { 1.0 };
        Ok(RoutingGame {
            free_flow,
            capacity: network.capacities(),
            load_scales: load_norms.into_iter().map(|v| positive(quantile(v, SCALE_QUANTILE))).collect(),
            ratio_scales: ratio_norms.into_iter().map(|v| positive(quantile(v, SCALE_QUANTILE))).collect(),
            agents,
            contexts,
            scaler,
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_edges(&self) -> usize {
        self.free_flow.len()
    }

    /// The finite context support `Z`.
    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    pub fn scaler(&self) -> &RewardScaler {
        &self.scaler
    }

    /// `Σ_j x^j`, independent of agent order.
    pub fn loads(&self, joint: &[usize]) -> Vec<f64> {
        total_loads(&self.agents, self.num_edges(), joint)
    }

    pub fn raw_reward(&self, agent: usize, joint: &[usize], z: &[f64]) -> f64 {
        let a = &self.agents[agent];
        let mut total = vec![0.0; self.num_edges()];
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); a.relevant.len()];
        for (other, &act) in self.agents.iter().zip(joint) {
            for &e in &other.routes[act].edges {
                if let Ok(p) = a.relevant.binary_search(&e) {
                    buckets[p].push(other.demand);
                }
            }
        }
        for (p, &e) in a.relevant.iter().enumerate() {
            total[e] = sorted_sum(&mut buckets[p]);
        }
        deviation_raw(&self.free_flow, a, joint[agent], joint[agent], &total, z)
    }

    pub fn raw_rewards(&self, joint: &[usize], z: &[f64]) -> Vec<f64> {
        let total = self.loads(joint);
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| deviation_raw(&self.free_flow, a, joint[i], joint[i], &total, z))
            .collect()
    }

    /// Network-average congestion `mean_e 0.15 (load_e / z_e)^4`.
    pub fn average_congestion(&self, joint: &[usize], z: &[f64]) -> f64 {
        let c = super::congestion_metric(&self.loads(joint), z);
        c.iter().sum::<f64>() / c.len() as f64
    }

    /// Composite kernel for the context-aware learner:
    /// linear on the own route times degree-4 polynomial on load/capacity.
    pub fn contextual_kernel(&self, agent: usize) -> KernelSpec {
        KernelSpec::product(vec![
            KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm)),
            KernelSpec::polynomial(
                4,
                1.0,
                InputMap::new(
                    Projection::LoadOverContext,
                    Normalization::Scale {
                        factor: self.ratio_scales[agent],
                    },
                ),
            ),
        ])
    }

    /// Context-blind counterpart: the polynomial acts on the raw load.
    pub fn blind_kernel(&self, agent: usize) -> KernelSpec {
        KernelSpec::product(vec![
            KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm)),
            KernelSpec::polynomial(
                4,
                1.0,
                InputMap::new(
                    Projection::Load,
                    Normalization::Scale {
                        factor: self.load_scales[agent],
                    },
                ),
            ),
        ])
    }

    /// `30 |E^i|`.
    pub fn net_radius(&self, agent: usize) -> f64 {
        30.0 * self.agents[agent].relevant.len() as f64
    }

    /// Capacity features `z[e] / (1.2 C_e)` on the relevant edges plus a bias.
    pub fn linear_features(&self, agent: usize) -> FeatureMap {
        FeatureMap {
            scale: Some(self.agents[agent].relevant.iter().map(|&e| 1.2 * self.capacity[e]).collect()),
            bias: true,
        }
    }

    /// The uniform context law as seen by `agent`.
    pub fn context_distribution(&self, agent: usize) -> ContextDistribution {
        let n = self.contexts.len();
        ContextDistribution {
            support: self.contexts.iter().map(|z| self.agents[agent].restrict(z)).collect(),
            weights: vec![1.0 / n as f64; n],
        }
    }
}

impl ContextualGame for RoutingGame {
    fn num_players(&self) -> usize {
        self.agents.len()
    }

    fn num_actions(&self, player: usize) -> usize {
        self.agents[player].routes.len()
    }

    fn reward(&self, player: usize, joint: &[usize], context: &[f64]) -> f64 {
        self.scaler.scale(player, self.raw_reward(player, joint, context))
    }

    fn rewards(&self, joint: &[usize], context: &[f64]) -> Vec<f64> {
        self.raw_rewards(joint, context)
            .into_iter()
            .enumerate()
            .map(|(i, r)| self.scaler.scale(i, r))
            .collect()
    }

    fn deviation_rewards(&self, player: usize, joint: &[usize], context: &[f64]) -> Vec<f64> {
        let total = self.loads(joint);
        let a = &self.agents[player];
        (0..a.routes.len())
            .map(|k| {
                let raw = deviation_raw(&self.free_flow, a, joint[player], k, &total, context);
                self.scaler.scale(player, raw)
            })
            .collect()
    }

    fn action_vectors(&self, player: usize) -> Vec<Vec<f64>> {
        let a = &self.agents[player];
        (0..a.routes.len()).map(|k| a.local_route_vector(k)).collect()
    }

    fn opponent_view(&self, player: usize, joint: &[usize]) -> Vec<f64> {
        let total = self.loads(joint);
        self.view_from_total(player, joint, &total)
    }

    fn opponent_views(&self, joint: &[usize]) -> Vec<Vec<f64>> {
        let total = self.loads(joint);
        (0..self.agents.len())
            .map(|i| self.view_from_total(i, joint, &total))
            .collect()
    }

    fn context_view(&self, player: usize, context: &[f64]) -> Vec<f64> {
        self.agents[player].restrict(context)
    }
}

impl RoutingGame {
    /// `x^{-i}` on the relevant edges.
    fn view_from_total(&self, player: usize, joint: &[usize], total: &[f64]) -> Vec<f64> {
        let a = &self.agents[player];
        let taken = &a.routes[joint[player]].edges;
        a.relevant
            .iter()
            .map(|e| total[*e] - if taken.contains(e) { a.demand } else { 0.0 })
            .collect()
    }
}
