use std::path::PathBuf;
use std::time::Instant;

use contextual_games::game::ContextualGame;
use contextual_games::routing::{build_agents, context_sampler, load_tntp, parse_net, write_net, RoutingGame};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sioux-falls").join(name)
}

fn load() -> (contextual_games::routing::Network, Vec<contextual_games::routing::OdDemand>) {
    load_tntp(
        &data("SiouxFalls_net.tntp"),
        &data("SiouxFalls_trips.tntp"),
        Some(&data("SiouxFalls_node.tntp")),
    )
    .unwrap()
}

#[test]
fn network_dimensions() {
    let (net, trips) = load();
    assert_eq!(net.num_nodes, 24);
    assert_eq!(net.num_edges(), 76);
    assert_eq!(net.nodes.len(), 24);
    assert_eq!(trips.len(), 528);
    assert_eq!(trips.iter().map(|t| t.demand).sum::<f64>(), 360600.0);
    assert_eq!(parse_net(&write_net(&net)).unwrap().edges, net.edges);
}

#[test]
fn five_routes_per_agent() {
    let (net, trips) = load();
    let agents = build_agents(&net, &trips, 5, 1.0).unwrap();
    assert_eq!(agents.len(), 528);
    for a in &agents {
        assert_eq!(a.routes.len(), 5);
        assert!(!a.incomplete);
        for w in a.routes.windows(2) {
            assert!(w[0].cost <= w[1].cost);
            assert_ne!(w[0].edges, w[1].edges);
        }
    }
}

#[test]
fn calibrated_game() {
    let (net, trips) = load();
    let agents = build_agents(&net, &trips, 5, 1.0).unwrap();
    let contexts = context_sampler(&net, 10, 0);
    let start = Instant::now();
    let game = RoutingGame::new(&net, agents, contexts, 10_000, 0).unwrap();
    eprintln!("calibration: {:?}", start.elapsed());
    assert_eq!(game.num_players(), 528);
    let joint = vec![0; 528];
    let r = game.rewards(&joint, &game.contexts()[0]);
    assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
}
