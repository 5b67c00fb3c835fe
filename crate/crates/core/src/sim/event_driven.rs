use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{replica_rng, ClockTable, Event, EventKind, EventLog, ExtinctionTime};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::GenesisModel;

/// Gillespie direct-method engine over the compact state.
///
/// Rates are cached per node and the total is updated incrementally; every
/// `rate_audit_interval` events the total is recomputed from scratch and
/// compared against the running value.
pub(crate) struct Engine<'a> {
    model: &'a GenesisModel,
    trans: ClockTable,
    rec: ClockTable,
    /// Start of node `i`'s channels in `channel`; channel `offset[i] + k`
    /// points at the `k`-th neighbor of `i`.
    offset: Vec<usize>,
    infected: Vec<bool>,
    rec_phase: Vec<usize>,
    channel: Vec<usize>,
    subtotal: Vec<f64>,
    total: f64,
    infected_count: usize,
    clock: f64,
    events: u64,
    audit_interval: u64,
    drift_tol: f64,
    rng: ChaCha8Rng,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(model: &'a GenesisModel, rng: ChaCha8Rng, tol: &Tolerances) -> Engine<'a> {
        let g = model.network();
        let n = g.node_count();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + g.degree(i));
        }
        let mut engine = Engine {
            model,
            trans: ClockTable::new(model.transmission()),
            rec: ClockTable::new(model.recovery()),
            channel: vec![0; offset[n]],
            offset,
            infected: vec![false; n],
            rec_phase: vec![0; n],
            subtotal: vec![0.0; n],
            total: 0.0,
            infected_count: 0,
            clock: 0.0,
            events: 0,
            audit_interval: tol.rate_audit_interval.max(1),
            drift_tol: tol.rate_drift_tol,
            rng,
        };
        for &i in model.initial_infected() {
            engine.infect(i);
        }
        engine
    }

    pub(crate) fn clock(&self) -> f64 {
        self.clock
    }

    pub(crate) fn events(&self) -> u64 {
        self.events
    }

    pub(crate) fn infected_count(&self) -> usize {
        self.infected_count
    }

    pub(crate) fn infected_nodes(&self) -> Vec<usize> {
        (0..self.infected.len()).filter(|&i| self.infected[i]).collect()
    }

    fn node_rate(&self, i: usize) -> f64 {
        if !self.infected[i] {
            return 0.0;
        }
        let channels: f64 = self.channel[self.offset[i]..self.offset[i + 1]]
            .iter()
            .map(|&m| self.trans.out[m])
            .sum();
        self.rec.out[self.rec_phase[i]] + channels
    }

    fn refresh(&mut self, i: usize) {
        let rate = self.node_rate(i);
        self.total += rate - self.subtotal[i];
        self.subtotal[i] = rate;
        if self.infected_count == 0 {
            self.total = 0.0;
        }
    }

    /// Recovery phase from `ψ`, then every channel phase from `φ`.
    fn infect(&mut self, i: usize) {
        self.infected[i] = true;
        self.infected_count += 1;
        self.rec_phase[i] = self.model.recovery().sample_initial_phase(&mut self.rng);
        for c in self.offset[i]..self.offset[i + 1] {
            self.channel[c] = self.model.transmission().sample_initial_phase(&mut self.rng);
        }
        self.refresh(i);
    }

    fn audit(&mut self) -> Result<()> {
        let fresh: Vec<f64> = (0..self.infected.len()).map(|i| self.node_rate(i)).collect();
        let recomputed: f64 = fresh.iter().sum();
        if (recomputed - self.total).abs() > self.drift_tol * recomputed.abs().max(1.0) {
            return Err(Error::RateDrift {
                incremental: self.total,
                recomputed,
            });
        }
        self.subtotal = fresh;
        self.total = recomputed;
        Ok(())
    }

    /// Advances to the next event. Returns `None` once the process is
    /// extinct or the next event would fall after `horizon`, in which case
    /// the clock is left at `horizon`.
    pub(crate) fn step(&mut self, horizon: Option<f64>) -> Result<Option<Event>> {
        if self.infected_count == 0 {
            return Ok(None);
        }
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / self.total;
        if let Some(h) = horizon {
            if self.clock + wait > h {
                self.clock = h;
                return Ok(None);
            }
        }
        self.clock += wait;
        let u = self.rng.random::<f64>() * self.total;
        let event = self.fire(u);
        self.events += 1;
        if self.events % self.audit_interval == 0 {
            self.audit()?;
        }
        Ok(Some(event))
    }

    /// Cumulative-rate scan: node-major, channels in neighbor order, then
    /// the recovery clock.
    fn fire(&mut self, mut u: f64) -> Event {
        let n = self.infected.len();
        let mut node = None;
        for i in (0..n).filter(|&i| self.infected[i]) {
            node = Some(i);
            if u < self.subtotal[i] {
                break;
            }
            u -= self.subtotal[i];
        }
        let i = node.expect("an infected node exists when the total rate is positive");
        u = u.min(self.subtotal[i]);
        for c in self.offset[i]..self.offset[i + 1] {
            let m = self.channel[c];
            let rate = self.trans.out[m];
            if u < rate {
                return self.fire_channel(i, c, u);
            }
            u -= rate;
        }
        self.fire_recovery(i, u)
    }

    fn fire_channel(&mut self, i: usize, c: usize, u: f64) -> Event {
        let m = self.channel[c];
        let j = self.model.network().neighbors(i)[c - self.offset[i]];
        let mut event = Event {
            time: self.clock,
            kind: EventKind::PhaseMoveTrans,
            src: i,
            dst: j,
            from: Some(m),
            to: None,
        };
        match self.trans.pick(m, u) {
            Some(next) => {
                self.channel[c] = next;
                event.to = Some(next);
            }
            None => {
                let reset = self.model.transmission().sample_initial_phase(&mut self.rng);
                self.channel[c] = reset;
                if self.infected[j] {
                    event.kind = EventKind::InfectionAttempt;
                    event.to = Some(reset);
                } else {
                    self.infect(j);
                    event.kind = EventKind::Infection;
                    event.to = Some(self.rec_phase[j]);
                }
            }
        }
        self.refresh(i);
        event
    }

    fn fire_recovery(&mut self, i: usize, u: f64) -> Event {
        let l = self.rec_phase[i];
        let mut event = Event {
            time: self.clock,
            kind: EventKind::PhaseMoveRec,
            src: i,
            dst: i,
            from: Some(l),
            to: None,
        };
        match self.rec.pick(l, u.min(self.rec.out[l])) {
            Some(next) => {
                self.rec_phase[i] = next;
                event.to = Some(next);
            }
            None => {
                self.infected[i] = false;
                self.infected_count -= 1;
                event.kind = EventKind::Recovery;
            }
        }
        self.refresh(i);
        event
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("horizon must be positive and finite, got {horizon}")))
    }
}

/// Full trajectory up to `horizon` or extinction, whichever comes first.
pub fn simulate_event_driven(model: &GenesisModel, horizon: f64, seed: u64) -> Result<EventLog> {
    simulate_event_driven_with(model, horizon, seed, &Tolerances::default())
}

pub fn simulate_event_driven_with(
    model: &GenesisModel,
    horizon: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<EventLog> {
    check_horizon(horizon)?;
    let mut engine = Engine::new(model, replica_rng(seed, 0), tol);
    let mut events = Vec::new();
    while let Some(e) = engine.step(Some(horizon))? {
        events.push(e);
    }
    let extinct = engine.infected_count() == 0;
    Ok(EventLog {
        node_count: model.network().node_count(),
        initial_infected: model.initial_infected().to_vec(),
        events,
        end_time: engine.clock(),
        final_infected: engine.infected_nodes(),
        extinct,
    })
}

/// First time the all-susceptible state is reached, or a censored time
/// once `sim_max_events` events have fired.
pub fn extinction_time(model: &GenesisModel, seed: u64, tol: &Tolerances) -> Result<ExtinctionTime> {
    extinction_time_rng(model, replica_rng(seed, 0), tol)
}

pub(crate) fn extinction_time_rng(
    model: &GenesisModel,
    rng: ChaCha8Rng,
    tol: &Tolerances,
) -> Result<ExtinctionTime> {
    let mut engine = Engine::new(model, rng, tol);
    while engine.events() < tol.sim_max_events {
        if engine.step(None)?.is_none() {
            return Ok(ExtinctionTime {
                time: engine.clock(),
                events: engine.events(),
                censored: false,
            });
        }
    }
    Ok(ExtinctionTime {
        time: engine.clock(),
        events: engine.events(),
        censored: engine.infected_count() > 0,
    })
}
