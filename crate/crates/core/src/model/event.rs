use serde::{Deserialize, Serialize};

use super::ExcitationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Arrival,
    Departure,
    Reroute { from: usize, to: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// Coordinate where the event happens; the origin for reroutes.
    pub coordinate: usize,
    pub kind: EventKind,
    /// Marks B_ij for every target i, present on the event that installs
    /// excitation (arrival for hawkes/ephemeral, departure for delayed).
    pub marks: Vec<f64>,
    pub service: Option<f64>,
    pub particle: u64,
    pub parent: Option<u64>,
}

/// Time-ordered events of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub d: usize,
    pub mode: ExcitationMode,
    pub horizon: f64,
    pub master_seed: u64,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn new(d: usize, mode: ExcitationMode, horizon: f64, master_seed: u64) -> Self {
        EventLog {
            d,
            mode,
            horizon,
            master_seed,
            events: Vec::new(),
        }
    }

    /// Sort by time, ties broken by particle id.
    pub fn sort(&mut self) {
        self.events.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.particle.cmp(&b.particle))
                .then(kind_rank(&a.kind).cmp(&kind_rank(&b.kind)))
        });
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time <= w[1].time)
    }

    pub fn count(&self, kind: fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| kind(&e.kind)).count()
    }
}

fn kind_rank(k: &EventKind) -> u8 {
    match k {
        EventKind::Arrival => 0,
        EventKind::Reroute { .. } => 1,
        EventKind::Departure => 2,
    }
}

/// Counts, queue lengths and intensities at a single time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub n: Vec<u64>,
    pub q: Vec<u64>,
    pub lambda: Vec<f64>,
}

/// Per-coordinate paths evaluated on a grid, indexed `[coordinate][grid point]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: Vec<f64>,
    pub n: Vec<Vec<u64>>,
    pub q: Vec<Vec<u64>>,
    pub lambda: Vec<Vec<f64>>,
}

impl PathSample {
    pub fn snapshot(&self, k: usize) -> Snapshot {
        Snapshot {
            time: self.grid[k],
            n: self.n.iter().map(|v| v[k]).collect(),
            q: self.q.iter().map(|v| v[k]).collect(),
            lambda: self.lambda.iter().map(|v| v[k]).collect(),
        }
    }
}
