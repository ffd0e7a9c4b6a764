//! Exact simulators.
//!
//! [`cluster`] builds trajectories from independent branching clusters;
//! [`thinning`] runs competing clocks on the network state and supports
//! rerouting, nonlinear rate maps and scheduled departures.

pub mod cluster;
pub mod thinning;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{EventKind, EventLog, ExcitationMode, Kernel, ModelError, NetworkModel, PathSample};
use crate::rng::StreamKey;

pub use cluster::{
    cluster_snapshots, simulate_arrivals, simulate_cluster, simulate_paths, Cluster, ClusterNode,
    DEFAULT_GENERATION_CAP,
};
pub use thinning::{simulate_network, simulate_nonlinear, thinning_snapshots, ExcitationState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cluster exceeded the generation cap of {cap} nodes")]
    GenerationCapExceeded { cap: usize },
    #[error("kernel h[{target}][{origin}] is not nonincreasing; the thinning bound would be invalid")]
    KernelNotMonotone { target: usize, origin: usize },
    #[error("the cluster engine does not support {0}")]
    Unsupported(&'static str),
    #[error("event log is not sorted at position {0}")]
    UnsortedLog(usize),
    #[error("evaluation grid must be nondecreasing")]
    UnsortedGrid,
    #[error("event log is inconsistent: {0}")]
    InconsistentLog(String),
    #[error("horizon must be finite and nonnegative, got {0}")]
    InvalidHorizon(f64),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// The random excitation function of one particle toward one target.
#[derive(Debug, Clone, Copy)]
pub struct RealizedKernel<'a> {
    pub mode: ExcitationMode,
    pub mark: f64,
    pub service: f64,
    pub kernel: &'a Kernel,
}

impl RealizedKernel<'_> {
    /// Value at the given age (time since arrival).
    pub fn eval(&self, age: f64) -> f64 {
        match self.mode {
            ExcitationMode::Hawkes => self.mark * self.kernel.eval(age),
            ExcitationMode::Delayed if age > self.service => self.mark * self.kernel.eval(age - self.service),
            ExcitationMode::Ephemeral if age < self.service => self.mark * self.kernel.eval(age),
            _ => 0.0,
        }
    }

    /// Age interval [lo, hi] on which the excitation can be positive, within `window`.
    fn active(&self, window: f64) -> (f64, f64) {
        let end = match self.mode {
            ExcitationMode::Ephemeral => window.min(self.service),
            _ => window,
        };
        let shift = self.shift();
        (shift, end.min(shift + self.kernel.support_end()))
    }

    fn shift(&self) -> f64 {
        match self.mode {
            ExcitationMode::Delayed => self.service,
            _ => 0.0,
        }
    }

    /// Expected number of offspring with age in [0, window].
    pub fn expected_count(&self, window: f64) -> f64 {
        let (lo, hi) = self.active(window);
        if hi <= lo {
            return 0.0;
        }
        self.mark * self.kernel.cumulative(hi - lo)
    }
}

/// Offspring ages of one particle toward one target, ascending.
///
/// Exponential and power-law shapes are sampled by exact inversion of the
/// cumulative kernel; piecewise-constant shapes by thinning against the
/// window supremum.
pub fn sample_offspring_times<R: Rng + ?Sized>(realized: &RealizedKernel<'_>, window: f64, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = realized.active(window);
    if hi <= lo || realized.mark <= 0.0 || realized.kernel.is_zero() {
        return Vec::new();
    }
    let span = hi - lo;
    let kernel = realized.kernel;
    let mut ages = match kernel {
        Kernel::Exponential { .. } | Kernel::PowerLaw { .. } => {
            let total = kernel.cumulative(span);
            let n = poisson(realized.mark * total, rng);
            (0..n)
                .map(|_| {
                    let y = rng.random::<f64>() * total;
                    lo + kernel.inverse_cumulative(y).expect("invertible shape").min(span)
                })
                .collect::<Vec<_>>()
        }
        Kernel::PiecewiseConstant { .. } => {
            let sup = kernel.sup_on(0.0, span);
            let n = poisson(realized.mark * sup * span, rng);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let x = rng.random::<f64>() * span;
                if rng.random::<f64>() * sup < kernel.eval(x) {
                    out.push(lo + x);
                }
            }
            out
        }
        Kernel::Zero => Vec::new(),
    };
    ages.sort_by(f64::total_cmp);
    ages
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(mean).expect("finite positive mean").sample(rng);
    x as usize
}

/// Evaluate N, Q and Lambda on `grid` from a sorted event log.
///
/// N and Q are right-continuous; Lambda uses only anchors strictly before the
/// grid point. Anchors sit at arrivals (hawkes), departures (delayed) or
/// arrivals with expiry at the particle's departure (ephemeral).
pub fn reconstruct_paths(log: &EventLog, model: &NetworkModel, grid: &[f64]) -> Result<PathSample> {
    if let Some(k) = log.events.windows(2).position(|w| w[1].time < w[0].time) {
        return Err(SimError::UnsortedLog(k + 1));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::UnsortedGrid);
    }
    let d = model.d;
    let mut n = vec![vec![0u64; grid.len()]; d];
    let mut q = vec![vec![0u64; grid.len()]; d];
    let mut qn = vec![0i64; d];
    let mut nn = vec![0u64; d];
    let mut e = 0;
    for (g, &t) in grid.iter().enumerate() {
        while e < log.events.len() && log.events[e].time <= t {
            let ev = &log.events[e];
            match ev.kind {
                EventKind::Arrival => {
                    qn[ev.coordinate] += 1;
                    nn[ev.coordinate] += 1;
                }
                EventKind::Departure => qn[ev.coordinate] -= 1,
                EventKind::Reroute { from, to } => {
                    qn[from] -= 1;
                    qn[to] += 1;
                }
            }
            if qn.iter().any(|v| *v < 0) {
                return Err(SimError::InconsistentLog(format!(
                    "negative queue after event {e} at time {}",
                    ev.time
                )));
            }
            e += 1;
        }
        for j in 0..d {
            n[j][g] = nn[j];
            q[j][g] = qn[j] as u64;
        }
    }

    // excitation anchors: (time, source coordinate, marks, expiry)
    let mut anchors: Vec<(f64, usize, &[f64], f64)> = Vec::new();
    let mut departures = std::collections::HashMap::new();
    if model.mode == ExcitationMode::Ephemeral {
        for ev in &log.events {
            if ev.kind == EventKind::Departure {
                departures.insert(ev.particle, ev.time);
            }
        }
    }
    for ev in &log.events {
        if ev.marks.is_empty() {
            continue;
        }
        match (model.mode, ev.kind) {
            (ExcitationMode::Hawkes, EventKind::Arrival) | (ExcitationMode::Delayed, EventKind::Departure) => {
                anchors.push((ev.time, ev.coordinate, &ev.marks, f64::INFINITY))
            }
            (ExcitationMode::Ephemeral, EventKind::Arrival) => {
                let expiry = departures
                    .get(&ev.particle)
                    .copied()
                    .or(ev.service.map(|s| ev.time + s))
                    .unwrap_or(f64::INFINITY);
                anchors.push((ev.time, ev.coordinate, &ev.marks, expiry));
            }
            _ => {}
        }
    }
    let mut lambda = vec![vec![0.0; grid.len()]; d];
    for (g, &t) in grid.iter().enumerate() {
        let mut x = vec![0.0; d];
        for &(s, j, marks, expiry) in &anchors {
            if s >= t {
                break;
            }
            if t >= expiry {
                continue;
            }
            for i in 0..d {
                x[i] += marks[i] * model.kernels[i][j].eval(t - s);
            }
        }
        for i in 0..d {
            lambda[i][g] = model.rate(i, x[i]);
        }
    }
    Ok(PathSample {
        grid: grid.to_vec(),
        n,
        q,
        lambda,
    })
}

/// Run `reps` independent replications in parallel; replication r gets
/// `key.child(r)`. Output order and values do not depend on the thread count.
pub fn replicate<T, F>(reps: usize, key: StreamKey, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(StreamKey) -> T + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(|r| f(key.child(r))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, MarkDistribution, ServiceDistribution};

    #[test]
    fn offspring_examples() {
        let mut rng = StreamKey::new(11).rng();
        let zero = RealizedKernel {
            mode: ExcitationMode::Hawkes,
            mark: 1.0,
            service: 1.0,
            kernel: &Kernel::Zero,
        };
        assert!(sample_offspring_times(&zero, f64::INFINITY, &mut rng).is_empty());
        let h = Kernel::exponential(1.0, 1.0);
        let delayed = RealizedKernel {
            mode: ExcitationMode::Delayed,
            mark: 1.0,
            service: 2.0,
            kernel: &h,
        };
        for _ in 0..100 {
            assert!(sample_offspring_times(&delayed, 2.0, &mut rng).is_empty());
            for a in sample_offspring_times(&delayed, 10.0, &mut rng) {
                assert!(a > 2.0 && a <= 10.0);
            }
        }
        let hawkes = RealizedKernel {
            mode: ExcitationMode::Hawkes,
            ..delayed
        };
        let reps = 20_000;
        let total: usize = (0..reps)
            .map(|_| sample_offspring_times(&hawkes, f64::INFINITY, &mut rng).len())
            .sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 1.0).abs() < 4.0 * (1.0 / reps as f64).sqrt());
    }

    #[test]
    fn piecewise_thinning_mean() {
        let k = Kernel::PiecewiseConstant {
            breakpoints: vec![0.0, 1.0, 2.0],
            values: vec![1.5, 0.5],
        };
        let r = RealizedKernel {
            mode: ExcitationMode::Ephemeral,
            mark: 2.0,
            service: 1.5,
            kernel: &k,
        };
        // 2 * (1.5 * 1 + 0.5 * 0.5)
        assert!((r.expected_count(10.0) - 3.5).abs() < 1e-12);
        let mut rng = StreamKey::new(5).rng();
        let reps = 20_000;
        let mut total = 0;
        for _ in 0..reps {
            let ages = sample_offspring_times(&r, 10.0, &mut rng);
            assert!(ages.iter().all(|a| *a < 1.5));
            total += ages.len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 3.5).abs() < 4.0 * (3.5 / reps as f64).sqrt());
    }

    fn arrival(time: f64, id: u64, mark: f64, service: Option<f64>) -> Event {
        Event {
            time,
            coordinate: 0,
            kind: EventKind::Arrival,
            marks: vec![mark],
            service,
            particle: id,
            parent: None,
        }
    }

    #[test]
    fn reconstruct_examples() {
        let mut model = NetworkModel::univariate(
            0.7,
            Kernel::exponential(1.0, 1.0),
            MarkDistribution::Deterministic { value: 1.0 },
            ServiceDistribution::Exponential { rate: 1.0 },
            ExcitationMode::Hawkes,
        );
        let empty = EventLog::new(1, model.mode, 5.0, 0);
        let p = reconstruct_paths(&empty, &model, &[0.0, 1.0, 5.0]).unwrap();
        assert!(p.q[0].iter().all(|v| *v == 0));
        assert!(p.lambda[0].iter().all(|v| *v == 0.7));

        let mut log = EventLog::new(1, model.mode, 5.0, 0);
        log.events.push(arrival(1.0, 0, 1.0, Some(1.0)));
        let p = reconstruct_paths(&log, &model, &[2.0]).unwrap();
        assert!((p.lambda[0][0] - (0.7 + (-1f64).exp())).abs() < 1e-15);

        model.mode = ExcitationMode::Delayed;
        let mut log = EventLog::new(1, model.mode, 5.0, 0);
        let mut a = arrival(1.0, 0, 1.0, Some(1.0));
        a.marks.clear();
        log.events.push(a);
        log.events.push(Event {
            time: 2.0,
            coordinate: 0,
            kind: EventKind::Departure,
            marks: vec![1.0],
            service: None,
            particle: 0,
            parent: None,
        });
        let p = reconstruct_paths(&log, &model, &[1.5, 2.5]).unwrap();
        assert_eq!(p.lambda[0][0], 0.7);
        assert!((p.lambda[0][1] - (0.7 + (-0.5f64).exp())).abs() < 1e-15);
        assert_eq!(p.q[0], vec![1, 0]);
        assert_eq!(p.n[0], vec![1, 1]);

        log.events.swap(0, 1);
        assert_eq!(reconstruct_paths(&log, &model, &[1.0]), Err(SimError::UnsortedLog(1)));
    }
}
