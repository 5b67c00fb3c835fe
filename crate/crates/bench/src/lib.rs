//! Fixtures shared by the benchmarks.

use genesis_core::{GenesisModel, Network, NetworkKind, PhaseType};

/// Seeded geometric graph with Erlang laws of the given orders.
pub fn geometric_model(n: usize, p: usize, q: usize) -> GenesisModel {
    let g = Network::generate(&NetworkKind::RandomGeometric {
        n,
        radius: (4.0 / n as f64).sqrt().min(1.0),
        seed: 1,
    })
    .expect("valid generator");
    GenesisModel::new(
        g,
        PhaseType::erlang(p, p as f64).expect("valid law"),
        PhaseType::erlang(q, 2.0 * q as f64).expect("valid law"),
        [0],
    )
    .expect("valid model")
}

pub fn path_model(n: usize, p: usize, q: usize) -> GenesisModel {
    GenesisModel::new(
        Network::generate(&NetworkKind::Path { n }).expect("valid generator"),
        PhaseType::erlang(p, p as f64).expect("valid law"),
        PhaseType::erlang(q, 3.0 * q as f64).expect("valid law"),
        [0],
    )
    .expect("valid model")
}
