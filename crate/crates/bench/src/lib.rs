//! Fixtures shared by the benchmarks.

use pathdist_core::synthgen::{
    corridor, gen_trajectories, model_network, CostProfile, GroundTruthModel, RouteSpec,
    UniformComponent,
};
use pathdist_core::{build_store, LearnParams, Path, TrajectoryStore, VariableStore};

/// `n` integer costs spread over 97 distinct values with uneven frequencies.
pub fn costs(n: usize) -> Vec<f64> {
    (0..n).map(|i| (20 + (i * i * 7919) % 97) as f64).collect()
}

/// A dependent corridor of `edges` edges with a store learned from `n` trips.
pub fn corridor_store(edges: usize, n: usize) -> (Path, VariableStore) {
    let model = GroundTruthModel {
        rows: 1,
        cols: edges + 1,
        length_m: 500.0,
        speed_limit_kmh: 50.0,
        profiles: vec![CostProfile {
            start: 0,
            end: 1440,
            components: vec![
                UniformComponent {
                    weight: 0.6,
                    low: 18.0,
                    high: 24.0,
                },
                UniformComponent {
                    weight: 0.4,
                    low: 30.0,
                    high: 36.0,
                },
            ],
        }],
        edge_profiles: Default::default(),
        rho: 0.5,
        driver_spread: 0.1,
        departures: vec![[480, 540]],
        routes: RouteSpec::Corridor {
            min_len: 2,
            max_len: edges.min(8),
        },
        origin: 1_704_067_200.0,
        seed: 1,
    };
    let net = model_network(&model).expect("valid model");
    let trajs = gen_trajectories(&model, &net, n).expect("valid model");
    let trajs = TrajectoryStore::ingest(&net, trajs).expect("generated trajectories are valid");
    let store = build_store(&net, &trajs, &LearnParams::default()).expect("valid parameters");
    let path = corridor(&net, model.cols).expect("row 0 exists");
    (path, store)
}
