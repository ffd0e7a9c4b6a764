//! Transform numerics.
//!
//! [`fixed_point`] computes the joint transform E[z^Q(t) exp(-s.Lambda(t))]
//! by iterating the cluster operator to its fixed point on a uniform grid.
//! [`volterra`] holds the smeared kernel h-bar and the second-kind Volterra
//! solvers for the mean cluster occupancy R1 and the heavy-tail term R_alpha.

pub mod fixed_point;
pub mod volterra;

use thiserror::Error;

use crate::model::{ModelError, ServiceDistribution};
use crate::quad::gl32;

pub use fixed_point::{fixed_point_transform, phi_operator, FixedPointOptions, TransformGrid, TransformResult};
pub use volterra::{hbar, volterra_solve_r1, volterra_solve_ralpha};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("grid mismatch: expected {expected} points per coordinate, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("model is unstable: branching mass {0} >= 1")]
    Unstable(f64),
    #[error("unsupported model: {0}")]
    Unsupported(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, TransformError>;

/// Uniform grid 0 = u_0 < ... < u_K = horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl UniformGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) || steps == 0 {
            return Err(TransformError::InvalidArgument(format!(
                "grid needs a finite nonnegative horizon and at least one step (got {horizon}, {steps})"
            )));
        }
        Ok(UniformGrid { horizon, steps })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// Quadrature for integrals against the service law over [0, u_k] on a grid.
///
/// Continuous laws: composite 32-point Gauss-Legendre in the service variable,
/// weighted by the density, with panels no wider than twice the interquartile
/// range and the range cut where the survival drops below 1e-16.
/// Deterministic laws: the exact atom.
pub(crate) struct ServiceMeasure {
    /// per grid index, (node, weight) pairs with weights including the density
    nodes: Vec<Vec<(f64, f64)>>,
}

impl ServiceMeasure {
    pub(crate) fn new(service: &ServiceDistribution, grid: &UniformGrid) -> Self {
        let nodes = (0..grid.len())
            .map(|k| {
                let u = grid.point(k);
                if let Some(j0) = service.atom() {
                    return if j0 <= u + 1e-12 * grid.step() { vec![(j0.min(u), 1.0)] } else { Vec::new() };
                }
                let upper = u.min(service.quantile(1.0 - 1e-16).unwrap_or(u));
                if upper <= 0.0 {
                    return Vec::new();
                }
                let iqr = service.quantile(0.75).unwrap() - service.quantile(0.25).unwrap();
                let panels = ((upper / (2.0 * iqr)).ceil() as usize).clamp(1, 64);
                let width = upper / panels as f64;
                let (x, w) = gl32();
                let mut out = Vec::with_capacity(32 * panels);
                for p in 0..panels {
                    let mid = (p as f64 + 0.5) * width;
                    for (xi, wi) in x.iter().zip(w) {
                        let node = mid + 0.5 * width * xi;
                        out.push((node, 0.5 * width * wi * service.pdf(node).unwrap()));
                    }
                }
                out
            })
            .collect();
        ServiceMeasure { nodes }
    }

    /// Integral of f(w) dF(w) over [0, u_k].
    pub(crate) fn integrate<F: FnMut(f64) -> f64>(&self, k: usize, mut f: F) -> f64 {
        self.nodes[k].iter().map(|(w, wt)| wt * f(*w)).sum()
    }
}
