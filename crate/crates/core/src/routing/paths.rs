use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Network, RoutingError};

/// A simple path as a node sequence (1-based ids) and the edge indices
/// between consecutive nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    /// Sum of free-flow times along the path.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSet {
    pub routes: Vec<Route>,
    /// Fewer simple paths exist than were requested.
    pub incomplete: bool,
}

struct Graph<'a> {
    net: &'a Network,
    out: Vec<Vec<usize>>,
}

#[derive(PartialEq)]
struct Item {
    cost: f64,
    node: usize,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Graph<'a> {
    fn new(net: &'a Network) -> Self {
        let mut out = vec![Vec::new(); net.num_nodes + 1];
        for (i, e) in net.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        Graph { net, out }
    }

    fn path_cost(&self, edges: &[usize]) -> f64 {
        edges.iter().map(|&e| self.net.edges[e].free_flow_time).sum()
    }

    /// Dijkstra on free-flow times avoiding the given edges and nodes.
    /// Returns the edge sequence.
    fn shortest(&self, src: usize, dst: usize, banned_edges: &HashSet<usize>, banned_nodes: &[bool]) -> Option<Vec<usize>> {
        let n = self.net.num_nodes + 1;
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item { cost: 0.0, node: src });
        while let Some(Item { cost, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            if node == dst {
                break;
            }
            for &e in &self.out[node] {
                let to = self.net.edges[e].to;
                if banned_edges.contains(&e) || banned_nodes[to] || done[to] {
                    continue;
                }
                let c = cost + self.net.edges[e].free_flow_time;
                if c < dist[to] {
                    dist[to] = c;
                    via[to] = Some(e);
                    heap.push(Item { cost: c, node: to });
                }
            }
        }
        if !done[dst] {
            return None;
        }
        let mut edges = Vec::new();
        let mut at = dst;
        while at != src {
            let e = via[at]?;
            edges.push(e);
            at = self.net.edges[e].from;
        }
        edges.reverse();
        Some(edges)
    }

    fn route(&self, src: usize, edges: Vec<usize>) -> Route {
        let mut nodes = vec![src];
        nodes.extend(edges.iter().map(|&e| self.net.edges[e].to));
        Route {
            cost: self.path_cost(&edges),
            nodes,
            edges,
        }
    }
}

fn route_order(a: &Route, b: &Route) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| a.nodes.cmp(&b.nodes))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Up to `k` loopless paths from `origin` to `destination` by ascending
/// free-flow time (Yen), ties broken by the lexicographic node sequence.
pub fn k_shortest_routes(net: &Network, origin: usize, destination: usize, k: usize) -> Result<RouteSet, RoutingError> {
    let valid = |v: usize| v >= 1 && v <= net.num_nodes;
    if !valid(origin) || !valid(destination) {
        return Err(RoutingError::Input(format!("unknown node in {origin}→{destination}")));
    }
    if origin == destination {
        return Err(RoutingError::Input(format!("origin equals destination ({origin})")));
    }
    if k == 0 {
        return Err(RoutingError::Input("at least one route must be requested".into()));
    }
    let g = Graph::new(net);
    let none = vec![false; net.num_nodes + 1];
    let first = g
        .shortest(origin, destination, &HashSet::new(), &none)
        .ok_or(RoutingError::Disconnected { origin, destination })?;
    let mut accepted = vec![g.route(origin, first)];
    let mut candidates: Vec<Route> = Vec::new();
    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for j in 0..last.edges.len() {
            let spur = last.nodes[j];
            let root_edges = &last.edges[..j];
            let mut banned_edges = HashSet::new();
            for p in &accepted {
                if p.edges.len() > j && p.edges[..j] == *root_edges {
                    banned_edges.insert(p.edges[j]);
                }
            }
            let mut banned_nodes = vec![false; net.num_nodes + 1];
            for &v in &last.nodes[..j] {
                banned_nodes[v] = true;
            }
            if let Some(tail) = g.shortest(spur, destination, &banned_edges, &banned_nodes) {
                let mut edges = root_edges.to_vec();
                edges.extend(tail);
                let r = g.route(origin, edges);
                if !accepted.iter().chain(&candidates).any(|p| p.edges == r.edges) {
                    candidates.push(r);
                }
            }
        }
        if candidates.is_empty() {
            return Ok(RouteSet {
                routes: accepted,
                incomplete: true,
            });
        }
        let best = (0..candidates.len())
            .min_by(|&a, &b| route_order(&candidates[a], &candidates[b]))
            .unwrap();
        accepted.push(candidates.swap_remove(best));
    }
    Ok(RouteSet {
        routes: accepted,
        incomplete: false,
    })
}
