//! Competing-clocks simulation of the network dynamics.
//!
//! Arrivals are thinned against the intensity at the last state change, which
//! bounds the future intensity because every kernel is nonincreasing and all
//! excitation changes happen at events. Departures and reroutes run at the
//! piecewise-constant rates mu_j Q_j and mu_ij Q_j (rate semantics), or at
//! epochs scheduled from the service law (scheduled semantics).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{Result, SimError};
use crate::model::{
    validate_network, Event, EventKind, EventLog, ExcitationMode, Kernel, NetworkModel, ServiceSemantics,
    Snapshot,
};
use crate::rng::{SimRng, StreamKey};

#[derive(Debug, Clone)]
enum Accumulator {
    Silent,
    /// Running sum of mark * scale * exp(-rate (t - s)), valid at time `at`.
    Exponential { rate: f64, scale: f64, value: f64, at: f64 },
    /// Explicit anchors (time, mark, particle).
    General { kernel: Kernel, anchors: Vec<(f64, f64, u64)> },
}

impl Accumulator {
    fn new(kernel: &Kernel) -> Self {
        match kernel {
            _ if kernel.is_zero() => Accumulator::Silent,
            Kernel::Exponential { rate, scale } => Accumulator::Exponential {
                rate: *rate,
                scale: *scale,
                value: 0.0,
                at: 0.0,
            },
            k => Accumulator::General {
                kernel: k.clone(),
                anchors: Vec::new(),
            },
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self {
            Accumulator::Silent => 0.0,
            Accumulator::Exponential { rate, value, at, .. } => value * (-rate * (t - at)).exp(),
            Accumulator::General { kernel, anchors } => anchors
                .iter()
                .filter(|a| a.0 < t)
                .map(|a| a.1 * kernel.eval(t - a.0))
                .sum(),
        }
    }

    fn install(&mut self, t: f64, mark: f64, particle: u64) {
        let current = self.value(t);
        match self {
            Accumulator::Silent => {}
            Accumulator::Exponential { scale, value, at, .. } => {
                *value = current + mark * *scale;
                *at = t;
            }
            Accumulator::General { anchors, .. } => anchors.push((t, mark, particle)),
        }
    }

    fn expire(&mut self, t: f64, anchor_time: f64, mark: f64, particle: u64) {
        let current = self.value(t);
        match self {
            Accumulator::Silent => {}
            Accumulator::Exponential { rate, scale, value, at } => {
                *value = (current - mark * *scale * (-*rate * (t - anchor_time)).exp()).max(0.0);
                *at = t;
            }
            Accumulator::General { anchors, .. } => anchors.retain(|a| a.2 != particle),
        }
    }
}

/// Excitation anchors of a trajectory, grouped by (target, source).
#[derive(Debug, Clone)]
pub struct ExcitationState {
    acc: Vec<Vec<Accumulator>>,
}

impl ExcitationState {
    pub fn new(model: &NetworkModel) -> Self {
        ExcitationState {
            acc: model
                .kernels
                .iter()
                .map(|row| row.iter().map(Accumulator::new).collect())
                .collect(),
        }
    }

    /// Install an anchor in source coordinate `source` at time `t` with one mark per target.
    pub fn install(&mut self, source: usize, t: f64, marks: &[f64], particle: u64) {
        for (i, row) in self.acc.iter_mut().enumerate() {
            row[source].install(t, marks[i], particle);
        }
    }

    /// Remove the anchor installed at `anchor_time` (ephemeral expiry), evaluated at `t`.
    pub fn expire(&mut self, source: usize, t: f64, anchor_time: f64, marks: &[f64], particle: u64) {
        for (i, row) in self.acc.iter_mut().enumerate() {
            row[source].expire(t, anchor_time, marks[i], particle);
        }
    }

    /// Accumulated excitation of every target at time t.
    pub fn excitation(&self, t: f64) -> Vec<f64> {
        self.acc.iter().map(|row| row.iter().map(|a| a.value(t)).sum()).collect()
    }

    /// Conditional intensity of every coordinate at time t (t not before the last change).
    pub fn conditional_intensity(&self, model: &NetworkModel, t: f64) -> Vec<f64> {
        self.excitation(t)
            .into_iter()
            .enumerate()
            .map(|(i, x)| model.rate(i, x))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Particle {
    origin: usize,
    coordinate: usize,
    arrival: f64,
    marks: Vec<f64>,
    slot: usize,
    log_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Due(f64, u64);

impl Eq for Due {}

impl Ord for Due {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Due {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine<'a> {
    model: &'a NetworkModel,
    rng: SimRng,
    semantics: ServiceSemantics,
    state: ExcitationState,
    particles: Vec<Particle>,
    members: Vec<Vec<u64>>,
    due: BinaryHeap<Due>,
    n: Vec<u64>,
    exit_rate: Vec<f64>,
    log: Option<Vec<Event>>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a NetworkModel, key: StreamKey, record: bool) -> Result<Self> {
        validate_network(model)?;
        for (i, row) in model.kernels.iter().enumerate() {
            for (j, k) in row.iter().enumerate() {
                if !k.is_nonincreasing() {
                    return Err(SimError::KernelNotMonotone { target: i, origin: j });
                }
            }
        }
        let d = model.d;
        let semantics = model.semantics();
        let exit_rate = (0..d)
            .map(|j| model.mu[j] + (0..d).map(|i| model.mu_route[i][j]).sum::<f64>())
            .collect();
        Ok(Engine {
            model,
            rng: key.named("thinning").rng(),
            semantics,
            state: ExcitationState::new(model),
            particles: Vec::new(),
            members: vec![Vec::new(); d],
            due: BinaryHeap::new(),
            n: vec![0; d],
            exit_rate,
            log: record.then(Vec::new),
        })
    }

    fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot {
            time: t,
            n: self.n.clone(),
            q: self.members.iter().map(|m| m.len() as u64).collect(),
            lambda: self.state.conditional_intensity(self.model, t),
        }
    }

    fn draw_marks(&mut self, source: usize) -> Vec<f64> {
        let model = self.model;
        (0..model.d).map(|i| model.marks[i][source].sample(&mut self.rng)).collect()
    }

    fn arrive(&mut self, t: f64, i: usize) {
        let id = self.particles.len() as u64;
        let mode = self.model.mode;
        let marks = if mode == ExcitationMode::Delayed {
            Vec::new()
        } else {
            let m = self.draw_marks(i);
            self.state.install(i, t, &m, id);
            m
        };
        let service = match self.semantics {
            ServiceSemantics::Scheduled => {
                let s = self.model.services[i].sample(&mut self.rng);
                self.due.push(Due(t + s, id));
                Some(s)
            }
            ServiceSemantics::Rate => None,
        };
        let log_index = self.log.as_mut().map(|log| {
            log.push(Event {
                time: t,
                coordinate: i,
                kind: EventKind::Arrival,
                marks: marks.clone(),
                service,
                particle: id,
                parent: None,
            });
            log.len() - 1
        });
        self.n[i] += 1;
        self.members[i].push(id);
        self.particles.push(Particle {
            origin: i,
            coordinate: i,
            arrival: t,
            marks,
            slot: self.members[i].len() - 1,
            log_index,
        });
    }

    fn detach(&mut self, id: u64) {
        let p = &self.particles[id as usize];
        let (j, slot) = (p.coordinate, p.slot);
        self.members[j].swap_remove(slot);
        if let Some(&moved) = self.members[j].get(slot) {
            self.particles[moved as usize].slot = slot;
        }
    }

    fn depart(&mut self, t: f64, id: u64) {
        self.detach(id);
        let (j, origin, arrival, log_index) = {
            let p = &self.particles[id as usize];
            (p.coordinate, p.origin, p.arrival, p.log_index)
        };
        let marks = match self.model.mode {
            ExcitationMode::Delayed => {
                let m = self.draw_marks(j);
                self.state.install(j, t, &m, id);
                m
            }
            ExcitationMode::Ephemeral => {
                let m = std::mem::take(&mut self.particles[id as usize].marks);
                self.state.expire(origin, t, arrival, &m, id);
                Vec::new()
            }
            ExcitationMode::Hawkes => Vec::new(),
        };
        if let Some(log) = self.log.as_mut() {
            if let (Some(k), ServiceSemantics::Rate) = (log_index, self.semantics) {
                log[k].service = Some(t - arrival);
            }
            log.push(Event {
                time: t,
                coordinate: j,
                kind: EventKind::Departure,
                marks,
                service: None,
                particle: id,
                parent: None,
            });
        }
    }

    fn reroute(&mut self, t: f64, id: u64, to: usize) {
        self.detach(id);
        let from = self.particles[id as usize].coordinate;
        self.members[to].push(id);
        let p = &mut self.particles[id as usize];
        p.coordinate = to;
        p.slot = self.members[to].len() - 1;
        if let Some(log) = self.log.as_mut() {
            log.push(Event {
                time: t,
                coordinate: from,
                kind: EventKind::Reroute { from, to },
                marks: Vec::new(),
                service: None,
                particle: id,
                parent: None,
            });
        }
    }

    /// Pick the departing/rerouted particle given u uniform on [0, total exit rate).
    fn exit(&mut self, t: f64, mut u: f64) {
        let d = self.model.d;
        for j in 0..d {
            let w = self.exit_rate[j] * self.members[j].len() as f64;
            if u >= w && j + 1 < d {
                u -= w;
                continue;
            }
            let q = self.members[j].len();
            let pick = ((u / self.exit_rate[j]) as usize).min(q - 1);
            let id = self.members[j][pick];
            // remaining fraction selects departure versus reroute target
            let mut v = u - pick as f64 * self.exit_rate[j];
            if v < self.model.mu[j] {
                self.depart(t, id);
                return;
            }
            v -= self.model.mu[j];
            let mut to = None;
            for i in 0..d {
                let r = self.model.mu_route[i][j];
                if r > 0.0 {
                    to = Some(i);
                    if v < r {
                        break;
                    }
                    v -= r;
                }
            }
            match to {
                Some(i) => self.reroute(t, id, i),
                None => self.depart(t, id),
            }
            return;
        }
    }

    fn run(&mut self, horizon: f64, observe: &[f64]) -> Vec<Snapshot> {
        let mut snaps = Vec::with_capacity(observe.len());
        let mut obs = observe.iter().peekable();
        let mut t = 0.0;
        loop {
            let bound = self.state.conditional_intensity(self.model, t);
            let arrival_bound: f64 = bound.iter().sum();
            let exit_total: f64 = match self.semantics {
                ServiceSemantics::Rate => (0..self.model.d)
                    .map(|j| self.exit_rate[j] * self.members[j].len() as f64)
                    .sum(),
                ServiceSemantics::Scheduled => 0.0,
            };
            let total = arrival_bound + exit_total;
            let candidate = if total > 0.0 {
                let e: f64 = Exp1.sample(&mut self.rng);
                t + e / total
            } else {
                f64::INFINITY
            };
            let scheduled = self.due.peek().map_or(f64::INFINITY, |d| d.0);
            let next = candidate.min(scheduled);
            while let Some(&&s) = obs.peek() {
                if s < next && s <= horizon {
                    snaps.push(self.snapshot(s));
                    obs.next();
                } else {
                    break;
                }
            }
            if next > horizon {
                break;
            }
            t = next;
            if scheduled <= candidate {
                let Due(_, id) = self.due.pop().expect("peeked");
                self.depart(t, id);
                continue;
            }
            let u = self.rng.random::<f64>() * total;
            if u < exit_total {
                self.exit(t, u);
                continue;
            }
            let mut v = u - exit_total;
            let now = self.state.conditional_intensity(self.model, t);
            if v >= now.iter().sum::<f64>() {
                continue; // rejected candidate
            }
            let mut target = now.len() - 1;
            for (i, rate) in now.iter().enumerate() {
                if v < *rate {
                    target = i;
                    break;
                }
                v -= rate;
            }
            self.arrive(t, target);
        }
        snaps
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon >= 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidHorizon(horizon))
    }
}

/// Simulate the linear network on [0, horizon].
pub fn simulate_network(model: &NetworkModel, horizon: f64, key: StreamKey) -> Result<EventLog> {
    check_horizon(horizon)?;
    let mut engine = Engine::new(model, key, true)?;
    engine.run(horizon, &[]);
    let mut log = EventLog::new(model.d, model.mode, horizon, key.master_seed());
    log.events = engine.log.take().unwrap_or_default();
    Ok(log)
}

/// Simulate a model with rate maps phi_i; identical engine, bound phi(excitation).
pub fn simulate_nonlinear(model: &NetworkModel, horizon: f64, key: StreamKey) -> Result<EventLog> {
    if model.phi.is_none() {
        return Err(SimError::Model(crate::model::ModelError::InvalidParameter {
            field: "phi",
            reason: "nonlinear simulation needs rate maps".into(),
        }));
    }
    simulate_network(model, horizon, key)
}

/// Snapshots of N, Q and Lambda at the sorted `times` without storing the event log.
pub fn thinning_snapshots(model: &NetworkModel, times: &[f64], key: StreamKey) -> Result<Vec<Snapshot>> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    check_horizon(horizon)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::UnsortedGrid);
    }
    let mut engine = Engine::new(model, key, false)?;
    Ok(engine.run(horizon, times))
}
