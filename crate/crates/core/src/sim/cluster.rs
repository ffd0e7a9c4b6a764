//! Branching-cluster simulation.
//!
//! Immigrants arrive in coordinate j as a Poisson(lambda0_j) stream. Each
//! particle draws a service time and one mark per target, and spawns children
//! in target i as an inhomogeneous Poisson process with its realized kernel.
//! Every cluster owns the substream `key / "cluster" / j / immigrant index`.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{sample_offspring_times, RealizedKernel, Result, SimError};
use crate::model::{validate_network, Event, EventKind, EventLog, ExcitationMode, NetworkModel, Snapshot};
use crate::rng::StreamKey;

pub const DEFAULT_GENERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub time: f64,
    pub coordinate: usize,
    pub service: f64,
    /// Mark toward every target coordinate.
    pub marks: Vec<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub generation: u32,
}

/// A cluster stored as an arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub nodes: Vec<ClusterNode>,
}

impl Cluster {
    pub fn root(&self) -> &ClusterNode {
        &self.nodes[0]
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

fn check_engine(model: &NetworkModel) -> Result<()> {
    validate_network(model)?;
    if model.has_routing() {
        return Err(SimError::Unsupported("rerouting"));
    }
    if !model.is_linear() {
        return Err(SimError::Unsupported("nonlinear rate maps"));
    }
    Ok(())
}

fn new_node<R: Rng + ?Sized>(
    model: &NetworkModel,
    coordinate: usize,
    time: f64,
    parent: Option<usize>,
    generation: u32,
    rng: &mut R,
) -> ClusterNode {
    let service = model.services[coordinate].sample(rng);
    let marks = (0..model.d).map(|i| model.marks[i][coordinate].sample(rng)).collect();
    ClusterNode {
        time,
        coordinate,
        service,
        marks,
        parent,
        children: Vec::new(),
        generation,
    }
}

/// Grow one cluster rooted in `coordinate` at `birth`, pruning children born after `horizon`.
///
/// `horizon` may be infinite to obtain complete clusters (total progeny).
pub fn simulate_cluster<R: Rng + ?Sized>(
    model: &NetworkModel,
    coordinate: usize,
    birth: f64,
    horizon: f64,
    rng: &mut R,
    cap: usize,
) -> Result<Cluster> {
    let mut nodes = vec![new_node(model, coordinate, birth, None, 0, rng)];
    let mut next = 0;
    while next < nodes.len() {
        let (time, j, service, generation) = {
            let n = &nodes[next];
            (n.time, n.coordinate, n.service, n.generation)
        };
        for i in 0..model.d {
            let kernel = &model.kernels[i][j];
            if kernel.is_zero() {
                continue;
            }
            let realized = RealizedKernel {
                mode: model.mode,
                mark: nodes[next].marks[i],
                service,
                kernel,
            };
            for age in sample_offspring_times(&realized, horizon - time, rng) {
                let child_time = time + age;
                if child_time > horizon {
                    continue;
                }
                if nodes.len() >= cap {
                    return Err(SimError::GenerationCapExceeded { cap });
                }
                let child = new_node(model, i, child_time, Some(next), generation + 1, rng);
                let idx = nodes.len();
                nodes.push(child);
                nodes[next].children.push(idx);
            }
        }
        next += 1;
    }
    Ok(Cluster { nodes })
}

/// Visit every cluster whose immigrant arrives in [0, horizon], in a fixed order.
fn for_each_cluster<F: FnMut(Cluster)>(model: &NetworkModel, horizon: f64, key: StreamKey, mut f: F) -> Result<()> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(SimError::InvalidHorizon(horizon));
    }
    let imm_key = key.named("immigrants");
    let cl_key = key.named("cluster");
    for j in 0..model.d {
        let rate = model.lambda0[j];
        if rate <= 0.0 {
            continue;
        }
        let gap = Exp::new(rate).expect("positive rate");
        let mut rng = imm_key.child(j as u64).rng();
        let mut t = 0.0;
        let mut idx = 0u64;
        loop {
            t += gap.sample(&mut rng);
            if t > horizon {
                break;
            }
            let mut crng = cl_key.child(j as u64).child(idx).rng();
            f(simulate_cluster(model, j, t, horizon, &mut crng, DEFAULT_GENERATION_CAP)?);
            idx += 1;
        }
    }
    Ok(())
}

/// Simulate [0, horizon] and flatten all clusters into a sorted event log.
pub fn simulate_paths(model: &NetworkModel, horizon: f64, key: StreamKey) -> Result<EventLog> {
    check_engine(model)?;
    let mut log = EventLog::new(model.d, model.mode, horizon, key.master_seed());
    let delayed = model.mode == ExcitationMode::Delayed;
    let mut next_id = 0u64;
    for_each_cluster(model, horizon, key, |cluster| {
        let base = next_id;
        for node in &cluster.nodes {
            let id = next_id;
            next_id += 1;
            let parent = node.parent.map(|p| base + p as u64);
            log.events.push(Event {
                time: node.time,
                coordinate: node.coordinate,
                kind: EventKind::Arrival,
                marks: if delayed { Vec::new() } else { node.marks.clone() },
                service: Some(node.service),
                particle: id,
                parent,
            });
            let leave = node.time + node.service;
            if leave <= horizon {
                log.events.push(Event {
                    time: leave,
                    coordinate: node.coordinate,
                    kind: EventKind::Departure,
                    marks: if delayed { node.marks.clone() } else { Vec::new() },
                    service: None,
                    particle: id,
                    parent,
                });
            }
        }
    })?;
    log.sort();
    Ok(log)
}

/// All arrival epochs (time, coordinate) in [0, horizon], sorted by time.
pub fn simulate_arrivals(model: &NetworkModel, horizon: f64, key: StreamKey) -> Result<Vec<(f64, usize)>> {
    check_engine(model)?;
    let mut out = Vec::new();
    for_each_cluster(model, horizon, key, |cluster| {
        out.extend(cluster.nodes.iter().map(|n| (n.time, n.coordinate)));
    })?;
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// N, Q and Lambda at each requested time, computed directly from the clusters.
pub fn cluster_snapshots(model: &NetworkModel, times: &[f64], key: StreamKey) -> Result<Vec<Snapshot>> {
    check_engine(model)?;
    let d = model.d;
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let mut snaps: Vec<Snapshot> = times
        .iter()
        .map(|&t| Snapshot {
            time: t,
            n: vec![0; d],
            q: vec![0; d],
            lambda: (0..d).map(|_| 0.0).collect(),
        })
        .collect();
    for_each_cluster(model, horizon, key, |cluster| {
        for node in &cluster.nodes {
            let j = node.coordinate;
            for snap in snaps.iter_mut() {
                let t = snap.time;
                if node.time > t {
                    continue;
                }
                snap.n[j] += 1;
                if t < node.time + node.service {
                    snap.q[j] += 1;
                }
                if node.time < t {
                    for i in 0..d {
                        let r = RealizedKernel {
                            mode: model.mode,
                            mark: node.marks[i],
                            service: node.service,
                            kernel: &model.kernels[i][j],
                        };
                        snap.lambda[i] += r.eval(t - node.time);
                    }
                }
            }
        }
    })?;
    for snap in &mut snaps {
        for i in 0..d {
            snap.lambda[i] = model.rate(i, snap.lambda[i]);
        }
    }
    Ok(snaps)
}
