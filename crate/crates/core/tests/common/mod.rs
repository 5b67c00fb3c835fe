#![allow(dead_code)]

use genesis_core::{GenesisModel, Matrix, Network, PhaseType, Vector};
use rand::Rng;

/// Random phase-type law of order `p`: dense initial vector, sparse
/// positive off-diagonal moves and strictly positive exit rates.
pub fn random_ph<R: Rng>(rng: &mut R, p: usize) -> PhaseType {
    let mut initial = Vector::from_fn(p, |_, _| rng.random_range(0.05..1.0));
    initial /= initial.sum();
    let mut sub = Matrix::zeros(p, p);
    for m in 0..p {
        for k in (0..p).filter(|&k| k != m) {
            if rng.random_bool(0.5) {
                sub[(m, k)] = rng.random_range(0.1..2.0);
            }
        }
        let exit = rng.random_range(0.1..2.0);
        sub[(m, m)] = -(sub.row(m).sum() + exit);
    }
    PhaseType::new(initial, sub).unwrap()
}

/// Connected random graph on `n ≥ 2` nodes: a random spanning tree plus
/// extra edges with probability `extra`.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, extra: f64) -> Network {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random_bool(extra) {
                edges.push((i, j));
            }
        }
    }
    Network::from_edges(n, &edges).unwrap()
}

pub fn path(n: usize) -> Network {
    Network::generate(&genesis_core::NetworkKind::Path { n }).unwrap()
}

pub fn triangle() -> Network {
    Network::generate(&genesis_core::NetworkKind::Complete { n: 3 }).unwrap()
}

pub fn exp_model(g: Network, beta: f64, delta: f64, init: &[usize]) -> GenesisModel {
    GenesisModel::new(
        g,
        PhaseType::exponential(beta).unwrap(),
        PhaseType::exponential(delta).unwrap(),
        init.iter().copied(),
    )
    .unwrap()
}

/// Classical SIS generator over infection bitsets (bit `i` set when node
/// `i` is infected).
pub fn classical_sis_generator(g: &Network, beta: f64, delta: f64) -> Matrix {
    let n = g.node_count();
    let size = 1usize << n;
    let mut q = Matrix::zeros(size, size);
    for s in 0..size {
        for i in 0..n {
            if s >> i & 1 == 1 {
                q[(s, s & !(1 << i))] += delta;
            } else {
                let pressure = g.neighbors(i).iter().filter(|&&j| s >> j & 1 == 1).count();
                if pressure > 0 {
                    q[(s, s | 1 << i)] += beta * pressure as f64;
                }
            }
        }
        let out: f64 = q.row(s).sum();
        q[(s, s)] = -out;
    }
    q
}
