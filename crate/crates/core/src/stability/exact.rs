//! The full Markov chain of per-node recovery phases and per-channel
//! transmission phases, and its generator.
//!
//! Node `i` has local states `0` (susceptible) and
//! `1 + ℓ·p^{deg i} + code(m)` (infected, recovery phase `ℓ`, channel
//! phases `m` toward its sorted neighbors, first neighbor most
//! significant). Global states are node-major mixed-radix numbers over
//! the local states, so index 0 is the all-susceptible absorbing state.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::GenesisModel;
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalState {
    Susceptible,
    Infected {
        recovery_phase: usize,
        /// Phase of the channel toward each neighbor, in sorted neighbor order.
        channel_phases: Vec<usize>,
    },
}

/// `∏ᵢ (1 + p^{deg i} q)`, saturating at `u128::MAX`.
pub fn predicted_state_count(model: &GenesisModel) -> u128 {
    let g = model.network();
    let p = model.transmission().order() as u128;
    let q = model.recovery().order() as u128;
    (0..g.node_count()).fold(1u128, |acc, i| {
        let local = (p.checked_pow(g.degree(i) as u32))
            .and_then(|x| x.checked_mul(q))
            .and_then(|x| x.checked_add(1));
        local.and_then(|l| acc.checked_mul(l)).unwrap_or(u128::MAX)
    })
}

/// Index ⟷ description table of the exact chain's states.
#[derive(Clone, Debug)]
pub struct ExactStates {
    p: usize,
    degrees: Vec<usize>,
    /// `p^{deg i}` per node.
    channel_counts: Vec<usize>,
    /// `1 + q p^{deg i}` per node.
    local_counts: Vec<usize>,
    strides: Vec<usize>,
    count: usize,
}

impl ExactStates {
    pub fn new(model: &GenesisModel, tol: &Tolerances) -> Result<Self> {
        let predicted = predicted_state_count(model);
        if predicted > tol.exact_max_states as u128 {
            return Err(Error::TooLarge {
                what: "exact state space prod_i (1 + p^deg_i q)",
                size: predicted,
                cap: tol.exact_max_states as u128,
            });
        }
        let g = model.network();
        let n = g.node_count();
        let p = model.transmission().order();
        let q = model.recovery().order();
        let channel_counts: Vec<usize> = (0..n).map(|i| p.pow(g.degree(i) as u32)).collect();
        let local_counts: Vec<usize> = channel_counts.iter().map(|c| 1 + q * c).collect();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * local_counts[i + 1];
        }
        Ok(ExactStates {
            p,
            degrees: (0..n).map(|i| g.degree(i)).collect(),
            channel_counts,
            local_counts,
            strides,
            count: predicted as usize,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn node_count(&self) -> usize {
        self.local_counts.len()
    }

    /// Local state index of node `i` in global state `index`.
    pub fn local(&self, index: usize, i: usize) -> usize {
        (index / self.strides[i]) % self.local_counts[i]
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub fn local_count(&self, i: usize) -> usize {
        self.local_counts[i]
    }

    pub fn channel_count(&self, i: usize) -> usize {
        self.channel_counts[i]
    }

    pub fn decode_local(&self, i: usize, local: usize) -> LocalState {
        if local == 0 {
            return LocalState::Susceptible;
        }
        let rest = local - 1;
        let cc = self.channel_counts[i];
        let mut code = rest % cc;
        let degree = self.degrees[i];
        let mut channel_phases = vec![0; degree];
        for k in (0..degree).rev() {
            channel_phases[k] = code % self.p;
            code /= self.p;
        }
        LocalState::Infected {
            recovery_phase: rest / cc,
            channel_phases,
        }
    }

    pub fn encode_local(&self, i: usize, state: &LocalState) -> usize {
        match state {
            LocalState::Susceptible => 0,
            LocalState::Infected {
                recovery_phase,
                channel_phases,
            } => {
                let code = channel_phases.iter().fold(0, |acc, &m| acc * self.p + m);
                1 + recovery_phase * self.channel_counts[i] + code
            }
        }
    }

    pub fn describe(&self, index: usize) -> Vec<LocalState> {
        (0..self.node_count())
            .map(|i| self.decode_local(i, self.local(index, i)))
            .collect()
    }

    pub fn index_of(&self, states: &[LocalState]) -> usize {
        states
            .iter()
            .enumerate()
            .map(|(i, s)| self.encode_local(i, s) * self.strides[i])
            .sum()
    }

    pub fn infected_count(&self, index: usize) -> usize {
        (0..self.node_count()).filter(|&i| self.local(index, i) != 0).count()
    }
}

/// Exact chain: state table plus sparse generator `Π`.
#[derive(Clone, Debug)]
pub struct ExactChain {
    pub states: ExactStates,
    pub generator: SparseMatrix,
}

/// Probability of each infected local state of node `j` right after it is
/// infected: recovery phase from `ψ`, every channel from `φ`.
fn infection_distribution(model: &GenesisModel, states: &ExactStates, j: usize) -> Vec<(usize, f64)> {
    let phi = model.transmission().initial();
    let psi = model.recovery().initial();
    let p = model.transmission().order();
    let cc = states.channel_count(j);
    let degree = model.network().degree(j);
    let mut out = Vec::new();
    for (l, &pl) in psi.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        for code in 0..cc {
            let mut rest = code;
            let mut prob = pl;
            for _ in 0..degree {
                prob *= phi[rest % p];
                rest /= p;
            }
            if prob > 0.0 {
                out.push((1 + l * cc + code, prob));
            }
        }
    }
    out
}

/// Builds the generator of the exact chain.
pub fn build_exact_generator(model: &GenesisModel, tol: &Tolerances) -> Result<ExactChain> {
    let states = ExactStates::new(model, tol)?;
    let g = model.network();
    let n = g.node_count();
    let t = model.transmission().subgenerator();
    let b = model.transmission().exit();
    let phi = model.transmission().initial();
    let r = model.recovery().subgenerator();
    let d = model.recovery().exit();
    let p = model.transmission().order();
    let q = model.recovery().order();
    let infect: Vec<Vec<(usize, f64)>> = (0..n).map(|j| infection_distribution(model, &states, j)).collect();
    // Place value of neighbor position k inside node i's channel code.
    let place: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let deg = g.degree(i);
            (0..deg).map(|k| p.pow((deg - 1 - k) as u32)).collect()
        })
        .collect();

    let mut triplets = Vec::new();
    for s in 0..states.count() {
        let mut out_total = 0.0;
        let mut push = |target: usize, rate: f64, triplets: &mut Vec<(usize, usize, f64)>| {
            if target != s && rate > 0.0 {
                triplets.push((s, target, rate));
                out_total += rate;
            }
        };
        for i in 0..n {
            let li = states.local(s, i);
            if li == 0 {
                continue;
            }
            let cc = states.channel_count(i);
            let ell = (li - 1) / cc;
            let code = (li - 1) % cc;
            let base = s - li * states.stride(i);
            for l2 in (0..q).filter(|&l2| l2 != ell) {
                let target = base + (1 + l2 * cc + code) * states.stride(i);
                push(target, r[(ell, l2)], &mut triplets);
            }
            push(base, d[ell], &mut triplets);
            for (k, &j) in g.neighbors(i).iter().enumerate() {
                let m = (code / place[i][k]) % p;
                let code_without = code - m * place[i][k];
                let with_phase = |m2: usize| base + (1 + ell * cc + code_without + m2 * place[i][k]) * states.stride(i);
                for m2 in (0..p).filter(|&m2| m2 != m) {
                    push(with_phase(m2), t[(m, m2)], &mut triplets);
                }
                if b[m] <= 0.0 {
                    continue;
                }
                let lj = states.local(s, j);
                for m2 in (0..p).filter(|&m2| phi[m2] > 0.0) {
                    let reset = with_phase(m2);
                    let rate = b[m] * phi[m2];
                    if lj == 0 {
                        for &(new_local, prob) in &infect[j] {
                            push(reset + new_local * states.stride(j), rate * prob, &mut triplets);
                        }
                    } else {
                        push(reset, rate, &mut triplets);
                    }
                }
            }
        }
        if out_total > 0.0 {
            triplets.push((s, s, -out_total));
        }
    }
    let count = states.count();
    Ok(ExactChain {
        states,
        generator: SparseMatrix::from_triplets(count, count, triplets),
    })
}

impl ExactChain {
    /// Generator restricted to the transient states (index 0 removed).
    pub fn transient_block(&self) -> Matrix {
        self.generator.to_dense_without(0)
    }

    /// Distribution of the initial state: every node in `Λ` infected with
    /// recovery phase from `ψ` and channel phases from `φ`.
    pub fn initial_distribution(&self, model: &GenesisModel) -> Vec<(usize, f64)> {
        let mut dist = vec![(0usize, 1.0)];
        for &i in model.initial_infected() {
            let local = infection_distribution(model, &self.states, i);
            dist = dist
                .iter()
                .flat_map(|&(idx, w)| {
                    local
                        .iter()
                        .map(move |&(l, pl)| (idx + l * self.states.stride(i), w * pl))
                })
                .collect();
        }
        dist
    }
}
