use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{replica_rng, Event, EventKind, EventLog, ExtinctionTime};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::Vector;
use crate::model::GenesisModel;

const MAX_NODES: usize = 10;
const MAX_ORDER: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Counter jumps, no-ops included.
    pub jumps: u64,
    /// Jumps that changed the state.
    pub effective_jumps: u64,
    /// Always zero in a returned report: a violation aborts the run.
    pub violations: u64,
}

#[derive(Clone, Copy, Debug)]
enum Counter {
    /// `N^{ji}_{T_{mm'}}` on channel `c` (node `i` toward neighbor `j`).
    ChannelMove { c: usize, m: usize, next: usize },
    /// `N^{ji}_{b_m}`.
    ChannelExit { c: usize, m: usize },
    /// `N^i_{R_{ℓℓ'}}`.
    RecoveryMove { i: usize, l: usize, next: usize },
    /// `N^i_{d_ℓ}`.
    RecoveryExit { i: usize, l: usize },
}

/// Literal state of the vectorial representation: `x[c] ∈ ℝ^p` per
/// directed channel and `y[i] ∈ ℝ^q` per node.
struct Reference<'a> {
    model: &'a GenesisModel,
    /// Channel index → (source, target).
    ends: Vec<(usize, usize)>,
    /// Node → its outgoing channels.
    owned: Vec<Vec<usize>>,
    counters: Vec<Counter>,
    cumulative: Vec<f64>,
    x: Vec<Vector>,
    y: Vec<Vector>,
    clock: f64,
    jumps: u64,
    effective: u64,
    rng: ChaCha8Rng,
}

fn unit(dim: usize, k: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[k] = 1.0;
    v
}

impl<'a> Reference<'a> {
    fn new(model: &'a GenesisModel, rng: ChaCha8Rng) -> Result<Reference<'a>> {
        let g = model.network();
        let (p, q) = (model.transmission().order(), model.recovery().order());
        if g.node_count() > MAX_NODES || p > MAX_ORDER || q > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "the reference simulator handles at most {MAX_NODES} nodes and orders up to {MAX_ORDER}"
            )));
        }
        let t = model.transmission().subgenerator();
        let b = model.transmission().exit();
        let r = model.recovery().subgenerator();
        let d = model.recovery().exit();
        let mut ends = Vec::new();
        let mut owned = vec![Vec::new(); g.node_count()];
        let mut counters = Vec::new();
        let mut rates = Vec::new();
        for i in 0..g.node_count() {
            for &j in g.neighbors(i) {
                let c = ends.len();
                ends.push((i, j));
                owned[i].push(c);
                for m in 0..p {
                    for next in (0..p).filter(|&k| k != m && t[(m, k)] > 0.0) {
                        counters.push(Counter::ChannelMove { c, m, next });
                        rates.push(t[(m, next)]);
                    }
                }
                for m in (0..p).filter(|&m| b[m] > 0.0) {
                    counters.push(Counter::ChannelExit { c, m });
                    rates.push(b[m]);
                }
            }
            for l in 0..q {
                for next in (0..q).filter(|&k| k != l && r[(l, k)] > 0.0) {
                    counters.push(Counter::RecoveryMove { i, l, next });
                    rates.push(r[(l, next)]);
                }
            }
            for l in (0..q).filter(|&l| d[l] > 0.0) {
                counters.push(Counter::RecoveryExit { i, l });
                rates.push(d[l]);
            }
        }
        let cumulative = rates
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        let mut sim = Reference {
            model,
            x: vec![Vector::zeros(p); ends.len()],
            y: vec![Vector::zeros(q); g.node_count()],
            ends,
            owned,
            counters,
            cumulative,
            clock: 0.0,
            jumps: 0,
            effective: 0,
            rng,
        };
        for &i in model.initial_infected() {
            let l = model.recovery().sample_initial_phase(&mut sim.rng);
            sim.y[i] = unit(q, l);
            for k in 0..sim.owned[i].len() {
                let m = model.transmission().sample_initial_phase(&mut sim.rng);
                sim.x[sim.owned[i][k]] = unit(p, m);
            }
        }
        Ok(sim)
    }

    fn z(&self, i: usize) -> f64 {
        self.y[i].sum()
    }

    fn extinct(&self) -> bool {
        self.y.iter().all(|y| y.sum() == 0.0)
    }

    fn e_phi(&mut self) -> Vector {
        let p = self.model.transmission().order();
        unit(p, self.model.transmission().sample_initial_phase(&mut self.rng))
    }

    fn f_psi(&mut self) -> Vector {
        let q = self.model.recovery().order();
        unit(q, self.model.recovery().sample_initial_phase(&mut self.rng))
    }

    /// Applies one counter jump from the left limits `x`, `y`.
    fn apply(&mut self, counter: Counter) {
        match counter {
            Counter::ChannelMove { c, m, next } => {
                // (E_{m'm} - E_{mm}) x
                let xm = self.x[c][m];
                self.x[c][next] += xm;
                self.x[c][m] -= xm;
            }
            Counter::ChannelExit { c, m } => {
                let (_, j) = self.ends[c];
                let xm = self.x[c][m];
                let s = (1.0 - self.z(j)) * xm;
                // (e_φ e_mᵀ - E_mm) x on the firing channel
                let reset = self.e_phi();
                self.x[c] += reset * xm;
                self.x[c][m] -= xm;
                // infection term of the target: e_φ (1 - 1ᵀy^j) a_{ji} x_m
                if s != 0.0 {
                    for k in 0..self.owned[j].len() {
                        let fresh = self.e_phi();
                        let cj = self.owned[j][k];
                        self.x[cj] += fresh * s;
                    }
                    let fresh = self.f_psi();
                    self.y[j] += fresh * s;
                }
            }
            Counter::RecoveryMove { i, l, next } => {
                let yl = self.y[i][l];
                self.y[i][next] += yl;
                self.y[i][l] -= yl;
            }
            Counter::RecoveryExit { i, l } => {
                let yl = self.y[i][l];
                self.y[i] *= 1.0 - yl;
                for k in 0..self.owned[i].len() {
                    let c = self.owned[i][k];
                    self.x[c] *= 1.0 - yl;
                }
            }
        }
    }

    fn active_phase(v: &Vector) -> Option<usize> {
        v.iter().position(|&e| e == 1.0)
    }

    fn jump(&mut self, horizon: Option<f64>) -> Result<Option<Option<Event>>> {
        let total = *self.cumulative.last().expect("at least one counter");
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / total;
        if let Some(h) = horizon {
            if self.clock + wait > h {
                self.clock = h;
                return Ok(None);
            }
        }
        self.clock += wait;
        let u = self.rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.counters.len() - 1);
        let counter = self.counters[k];
        let z_before: Vec<f64> = (0..self.y.len()).map(|i| self.z(i)).collect();
        let x_before = self.x.clone();
        let y_before = self.y.clone();
        self.apply(counter);
        self.jumps += 1;
        self.audit(counter, &z_before, &x_before, &y_before)?;
        let event = self.classify(counter, &x_before, &y_before);
        if event.is_some() {
            self.effective += 1;
        }
        Ok(Some(event))
    }

    fn violation(&self, message: String) -> Error {
        Error::AuditViolation {
            jump: self.jumps,
            time: self.clock,
            message,
        }
    }

    /// Checks the invariants that must hold after every jump: each channel
    /// vector and each recovery vector is zero or a unit vector, a channel
    /// is active exactly when its owner is infected, infections happen only
    /// through an active channel absorbing on a susceptible target, and
    /// recoveries only through the active recovery phase absorbing.
    fn audit(&self, counter: Counter, z_before: &[f64], x_before: &[Vector], y_before: &[Vector]) -> Result<()> {
        let is_unit_or_zero = |v: &Vector| {
            v.iter().all(|&e| e == 0.0 || e == 1.0) && v.sum() <= 1.0
        };
        for (i, y) in self.y.iter().enumerate() {
            if !is_unit_or_zero(y) {
                return Err(self.violation(format!("y^{i} = {:?} is not in {{0, f_1, .., f_q}}", y.as_slice())));
            }
        }
        for (c, x) in self.x.iter().enumerate() {
            let (i, j) = self.ends[c];
            if !is_unit_or_zero(x) {
                return Err(self.violation(format!(
                    "x^{{{j}{i}}} = {:?} is not in {{0, e_1, .., e_p}}",
                    x.as_slice()
                )));
            }
            if x.sum() != self.z(i) {
                return Err(self.violation(format!(
                    "1ᵀx^{{{j}{i}}} = {} differs from 1ᵀy^{i} = {} after {counter:?}",
                    x.sum(),
                    self.z(i)
                )));
            }
        }
        for i in 0..self.y.len() {
            let (before, after) = (z_before[i], self.z(i));
            if before == after {
                continue;
            }
            let legit = match counter {
                Counter::ChannelExit { c, m } => {
                    before == 0.0 && self.ends[c].1 == i && x_before[c][m] == 1.0
                }
                Counter::RecoveryExit { i: k, l } => before == 1.0 && k == i && y_before[i][l] == 1.0,
                _ => false,
            };
            if !legit {
                return Err(self.violation(format!(
                    "node {i} changed status {before} -> {after} through {counter:?}"
                )));
            }
        }
        match counter {
            Counter::ChannelExit { c, m } if x_before[c][m] == 1.0 => {
                let j = self.ends[c].1;
                if self.z(j) != 1.0 {
                    return Err(self.violation(format!(
                        "attempt on node {j} through {counter:?} left it susceptible"
                    )));
                }
            }
            Counter::RecoveryExit { i, l } if y_before[i][l] == 1.0 && self.z(i) != 0.0 => {
                return Err(self.violation(format!("node {i} did not recover through {counter:?}")));
            }
            _ => {}
        }
        Ok(())
    }

    fn classify(&self, counter: Counter, x_before: &[Vector], y_before: &[Vector]) -> Option<Event> {
        let event = |kind, src, dst, from, to| Event {
            time: self.clock,
            kind,
            src,
            dst,
            from: Some(from),
            to,
        };
        match counter {
            Counter::ChannelMove { c, m, next } if x_before[c][m] == 1.0 => {
                let (i, j) = self.ends[c];
                Some(event(EventKind::PhaseMoveTrans, i, j, m, Some(next)))
            }
            Counter::ChannelExit { c, m } if x_before[c][m] == 1.0 => {
                let (i, j) = self.ends[c];
                if y_before[j].sum() == 0.0 {
                    Some(event(EventKind::Infection, i, j, m, Self::active_phase(&self.y[j])))
                } else {
                    Some(event(EventKind::InfectionAttempt, i, j, m, Self::active_phase(&self.x[c])))
                }
            }
            Counter::RecoveryMove { i, l, next } if y_before[i][l] == 1.0 => {
                Some(event(EventKind::PhaseMoveRec, i, i, l, Some(next)))
            }
            Counter::RecoveryExit { i, l } if y_before[i][l] == 1.0 => {
                Some(event(EventKind::Recovery, i, i, l, None))
            }
            _ => None,
        }
    }

    fn infected_nodes(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.z(i) == 1.0).collect()
    }
}

/// Literal counter-level trajectory up to `horizon` or extinction, with
/// the invariant audit run after every jump.
pub fn simulate_reference_sde(model: &GenesisModel, horizon: f64, seed: u64) -> Result<(EventLog, AuditReport)> {
    simulate_reference_sde_with(model, horizon, seed, &Tolerances::default())
}

pub fn simulate_reference_sde_with(
    model: &GenesisModel,
    horizon: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<(EventLog, AuditReport)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let mut sim = Reference::new(model, replica_rng(seed, 0))?;
    let mut events = Vec::new();
    while !sim.extinct() && sim.jumps < tol.sim_max_events {
        match sim.jump(Some(horizon))? {
            None => break,
            Some(Some(e)) => events.push(e),
            Some(None) => {}
        }
    }
    let log = EventLog {
        node_count: model.network().node_count(),
        initial_infected: model.initial_infected().to_vec(),
        events,
        end_time: sim.clock,
        final_infected: sim.infected_nodes(),
        extinct: sim.extinct(),
    };
    let report = AuditReport {
        jumps: sim.jumps,
        effective_jumps: sim.effective,
        violations: 0,
    };
    Ok((log, report))
}

/// Extinction time under the reference dynamics; `sim_max_events` caps
/// the number of counter jumps.
pub fn reference_extinction_time(model: &GenesisModel, seed: u64, tol: &Tolerances) -> Result<ExtinctionTime> {
    reference_extinction_time_rng(model, replica_rng(seed, 0), tol)
}

pub(crate) fn reference_extinction_time_rng(
    model: &GenesisModel,
    rng: ChaCha8Rng,
    tol: &Tolerances,
) -> Result<ExtinctionTime> {
    let mut sim = Reference::new(model, rng)?;
    while !sim.extinct() && sim.jumps < tol.sim_max_events {
        sim.jump(None)?;
    }
    Ok(ExtinctionTime {
        time: sim.clock,
        events: sim.jumps,
        censored: !sim.extinct(),
    })
}
