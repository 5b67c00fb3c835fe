//! Stochastic simulation of the networked SIS process.
//!
//! [`simulate_event_driven`] runs the Gillespie direct method on the
//! compact state (status, recovery phase, one phase per outgoing channel).
//! [`simulate_reference_sde`] fires every Poisson counter of the vectorial
//! representation literally, no-op jumps included, and audits the state
//! after each jump. It is slow and meant as an oracle on small instances.

mod estimate;
mod event_driven;
mod reference;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_type::PhaseType;

pub use estimate::{
    estimate_decay_rate, estimate_prevalence, extinction_times, DecayEstimate, DecayOptions,
    PrevalenceSeries,
};
pub use event_driven::{extinction_time, simulate_event_driven, simulate_event_driven_with};
pub use reference::{
    reference_extinction_time, simulate_reference_sde, simulate_reference_sde_with, AuditReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    PhaseMoveTrans,
    PhaseMoveRec,
    /// A channel absorbed while its target was already infected: only the
    /// channel phase is redrawn.
    InfectionAttempt,
    /// A channel absorbed on a susceptible target, which becomes infected.
    Infection,
    Recovery,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PhaseMoveTrans => "phase-move-trans",
            EventKind::PhaseMoveRec => "phase-move-rec",
            EventKind::InfectionAttempt => "infection-attempt",
            EventKind::Infection => "infection",
            EventKind::Recovery => "recovery",
        }
    }

    /// Infections and attempts both mark an absorption of the channel.
    pub fn is_attempt(self) -> bool {
        matches!(self, EventKind::InfectionAttempt | EventKind::Infection)
    }
}

/// One state change.
///
/// Channel events carry the source and target nodes and the channel phase
/// before (`from`) and after (`to`); for an infection `to` is the target's
/// new recovery phase. Recovery-clock events have `src == dst`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub src: usize,
    pub dst: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub node_count: usize,
    pub initial_infected: Vec<usize>,
    pub events: Vec<Event>,
    /// Clock value when the run stopped.
    pub end_time: f64,
    pub final_infected: Vec<usize>,
    /// The all-susceptible state was reached.
    pub extinct: bool,
}

impl EventLog {
    /// One event per line: time, kind, src, dst, phase-from, phase-to.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 48);
        let opt = |p: Option<usize>| p.map_or_else(|| "-".to_string(), |p| p.to_string());
        for e in &self.events {
            writeln!(
                out,
                "{:.16e} {} {} {} {} {}",
                e.time,
                e.kind.as_str(),
                e.src,
                e.dst,
                opt(e.from),
                opt(e.to)
            )
            .expect("writing to a String");
        }
        out
    }

    /// Replays the log and checks its invariants: strictly increasing
    /// times, infections only on susceptible targets, attempts only on
    /// infected ones, every event sourced by an infected node, and the
    /// recorded final state.
    pub fn validate(&self) -> Result<()> {
        let mut infected = vec![false; self.node_count];
        for &i in &self.initial_infected {
            infected[i] = true;
        }
        let mut last = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            let fail = |message: &str| {
                Err(Error::AuditViolation {
                    jump: k as u64,
                    time: e.time,
                    message: message.into(),
                })
            };
            if !(e.time > last) {
                return fail("event times are not strictly increasing");
            }
            last = e.time;
            if !infected[e.src] {
                return fail("event sourced by a susceptible node");
            }
            match e.kind {
                EventKind::Infection if infected[e.dst] => {
                    return fail("infection of an infected node")
                }
                EventKind::Infection => infected[e.dst] = true,
                EventKind::InfectionAttempt if !infected[e.dst] => {
                    return fail("attempt on a susceptible node logged as a no-op")
                }
                EventKind::Recovery => infected[e.src] = false,
                _ => {}
            }
        }
        let finals: Vec<usize> = (0..self.node_count).filter(|&i| infected[i]).collect();
        if finals != self.final_infected {
            return Err(Error::AuditViolation {
                jump: self.events.len() as u64,
                time: self.end_time,
                message: "replayed final state differs from the recorded one".into(),
            });
        }
        Ok(())
    }

    /// Number of infected nodes right after time `t`.
    pub fn infected_at(&self, t: f64) -> usize {
        let mut count = self.initial_infected.len() as i64;
        for e in self.events.iter().take_while(|e| e.time <= t) {
            match e.kind {
                EventKind::Infection => count += 1,
                EventKind::Recovery => count -= 1,
                _ => {}
            }
        }
        count as usize
    }
}

/// Outcome of a run without horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionTime {
    pub time: f64,
    pub events: u64,
    /// The event cap was hit before extinction; `time` is then a lower bound.
    pub censored: bool,
}

/// Generator for replica `k` of master seed `seed`. Replica `k` draws
/// from stream `k` of the same key, so a replica set does not depend on
/// how many replicas are requested.
pub fn replica_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Outgoing moves of each phase of a clock: `(Some(next), rate)` for
/// phase changes, `(None, rate)` for absorption.
#[derive(Clone, Debug)]
pub(crate) struct ClockTable {
    pub(crate) out: Vec<f64>,
    pub(crate) moves: Vec<Vec<(Option<usize>, f64)>>,
}

impl ClockTable {
    pub(crate) fn new(law: &PhaseType) -> ClockTable {
        let p = law.order();
        let sub = law.subgenerator();
        let exit = law.exit();
        let moves: Vec<Vec<(Option<usize>, f64)>> = (0..p)
            .map(|m| {
                let mut row: Vec<_> = (0..p)
                    .filter(|&k| k != m && sub[(m, k)] > 0.0)
                    .map(|k| (Some(k), sub[(m, k)]))
                    .collect();
                if exit[m] > 0.0 {
                    row.push((None, exit[m]));
                }
                row
            })
            .collect();
        let out = moves.iter().map(|row| row.iter().map(|(_, r)| r).sum()).collect();
        ClockTable { out, moves }
    }

    /// Picks the move of phase `m` at offset `u ∈ [0, out[m])`.
    pub(crate) fn pick(&self, m: usize, mut u: f64) -> Option<usize> {
        let row = &self.moves[m];
        for &(next, rate) in row {
            if u < rate {
                return next;
            }
            u -= rate;
        }
        row.last().expect("phase with no outgoing move").0
    }
}
