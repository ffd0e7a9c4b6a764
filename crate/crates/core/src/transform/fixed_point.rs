//! Fixed point of the cluster transform operator.
//!
//! For a cluster rooted in coordinate j, J_j(u) = E[z^{S^Q(u)} exp(-s.S^Lambda(u))]
//! at age u solves J = phi(J), where phi_j combines the root's own presence
//! and excitation with the transforms of its offspring clusters:
//!
//! ```text
//! hawkes:    (z_j P(J > u) + P(J <= u)) prod_i beta_ij(s_i h_ij(u) + C_ij(u))
//! delayed:   z_j P(J > u) + int_0^u G_j(u - w) dF_J(w),
//!            G_j(a) = prod_i beta_ij(s_i h_ij(a) + C_ij(a))
//! ephemeral: z_j P(J > u) prod_i beta_ij(s_i h_ij(u) + C_ij(u))
//!            + int_0^u prod_i beta_ij(P_ij(u, w)) dF_J(w)
//! ```
//!
//! with C_ij(a) = int_0^a h_ij(x)(1 - J_i(a - x)) dx, P_ij(u, w) the same
//! integral truncated at w, and beta_ij the Laplace transform of B_ij. The
//! joint transform is prod_j exp(-lambda_j0 (t + s_j - int_0^t J_j)).

use serde::{Deserialize, Serialize};

use super::{Result, ServiceMeasure, TransformError, UniformGrid};
use crate::model::{validate_network, ExcitationMode, NetworkModel};
use crate::quad::{interp_uniform, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            steps: 2048,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Cluster transforms of every coordinate on a uniform age grid, `values[j][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformGrid {
    pub step: f64,
    pub values: Vec<Vec<f64>>,
}

impl TransformGrid {
    pub fn constant(d: usize, grid: &UniformGrid, value: f64) -> Self {
        TransformGrid {
            step: grid.step(),
            values: vec![vec![value; grid.len()]; d],
        }
    }

    fn grid(&self) -> Result<UniformGrid> {
        let len = self.values.first().map_or(0, Vec::len);
        if len < 2 {
            return Err(TransformError::GridMismatch { expected: 2, found: len });
        }
        UniformGrid::new(self.step * (len - 1) as f64, len - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip)]
    pub grid: Option<TransformGrid>,
}

struct Operator<'a> {
    model: &'a NetworkModel,
    grid: UniformGrid,
    z: Vec<f64>,
    s: Vec<f64>,
    /// kernel samples h[i][j][k]; None for zero kernels
    h: Vec<Vec<Option<Vec<f64>>>>,
    surv: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
    measure: Vec<ServiceMeasure>,
    /// grid index of a deterministic service atom, when it falls on a node
    atom: Vec<Option<usize>>,
}

fn check_args(model: &NetworkModel, z: &[f64], s: &[f64]) -> Result<()> {
    validate_network(model)?;
    if !model.is_linear() {
        return Err(TransformError::Unsupported("nonlinear rate maps"));
    }
    if model.has_routing() {
        return Err(TransformError::Unsupported("rerouting"));
    }
    if z.len() != model.d || s.len() != model.d {
        return Err(TransformError::InvalidArgument(format!(
            "z and s need {} entries, got {} and {}",
            model.d,
            z.len(),
            s.len()
        )));
    }
    if z.iter().any(|v| !(0.0..=1.0).contains(v)) || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(TransformError::InvalidArgument("need z in [0,1] and s >= 0".into()));
    }
    Ok(())
}

impl<'a> Operator<'a> {
    fn new(model: &'a NetworkModel, grid: UniformGrid, z: &[f64], s: &[f64]) -> Self {
        let d = model.d;
        let pts = grid.points();
        let h = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let k = &model.kernels[i][j];
                        (!k.is_zero()).then(|| pts.iter().map(|u| k.eval(*u)).collect())
                    })
                    .collect()
            })
            .collect();
        let surv = model
            .services
            .iter()
            .map(|sv| pts.iter().map(|u| sv.survival(*u)).collect())
            .collect();
        let cdf = model
            .services
            .iter()
            .map(|sv| pts.iter().map(|u| sv.cdf(*u)).collect())
            .collect();
        let measure = model.services.iter().map(|sv| ServiceMeasure::new(sv, &grid)).collect();
        let atom = model
            .services
            .iter()
            .map(|sv| {
                sv.atom().and_then(|j0| {
                    let pos = j0 / grid.step();
                    let k = pos.round();
                    ((pos - k).abs() < 1e-9 * pos.max(1.0) && (k as usize) < grid.len()).then_some(k as usize)
                })
            })
            .collect();
        Operator {
            model,
            grid,
            z: z.to_vec(),
            s: s.to_vec(),
            h,
            surv,
            cdf,
            measure,
            atom,
        }
    }

    fn apply(&self, cur: &TransformGrid) -> TransformGrid {
        let d = self.model.d;
        let len = self.grid.len();
        let dt = self.grid.step();
        let om: Vec<Vec<f64>> = cur.values.iter().map(|v| v.iter().map(|x| 1.0 - x).collect()).collect();
        let mut values = Vec::with_capacity(d);
        for j in 0..d {
            let targets: Vec<(usize, &Vec<f64>)> = (0..d)
                .filter_map(|i| self.h[i][j].as_ref().map(|h| (i, h)))
                .collect();
            let beta = |i: usize, x: f64| self.model.marks[i][j].laplace(x);
            let mut out = vec![0.0; len];
            // factor multiplying z_j in the left limit at the service atom
            let mut left_factor = 1.0;
            let atom = self.atom[j];
            match self.model.mode {
                ExcitationMode::Hawkes | ExcitationMode::Delayed => {
                    let conv: Vec<Vec<f64>> = targets.iter().map(|(i, h)| convolve(h, &om[*i], dt)).collect();
                    let g: Vec<f64> = (0..len)
                        .map(|k| {
                            targets
                                .iter()
                                .zip(&conv)
                                .map(|((i, h), c)| beta(*i, self.s[*i] * h[k] + c[k]))
                                .product()
                        })
                        .collect();
                    if let Some(k) = atom {
                        if self.model.mode == ExcitationMode::Hawkes {
                            left_factor = g[k];
                        }
                    }
                    if self.model.mode == ExcitationMode::Hawkes {
                        for k in 0..len {
                            out[k] = (self.z[j] * self.surv[j][k] + self.cdf[j][k]) * g[k];
                        }
                    } else {
                        for (k, o) in out.iter_mut().enumerate() {
                            let u = self.grid.point(k);
                            *o = self.z[j] * self.surv[j][k]
                                + self.measure[j].integrate(k, |w| interp_uniform(&g, dt, u - w));
                        }
                    }
                }
                ExcitationMode::Ephemeral => {
                    let mut partial = vec![vec![0.0; len]; targets.len()];
                    for (k, o) in out.iter_mut().enumerate() {
                        // partial[t][m] = int_0^{u_m} h(v) (1 - J_i(u_k - v)) dv, m <= k
                        for ((i, h), p) in targets.iter().zip(partial.iter_mut()) {
                            p[0] = 0.0;
                            let mut prev = h[0] * om[*i][k];
                            for m in 1..=k {
                                let next = h[m] * om[*i][k - m];
                                p[m] = p[m - 1] + 0.5 * dt * (prev + next);
                                prev = next;
                            }
                        }
                        let above: f64 = targets
                            .iter()
                            .zip(&partial)
                            .map(|((i, h), p)| beta(*i, self.s[*i] * h[k] + p[k]))
                            .product();
                        let below = self.measure[j].integrate(k, |w| {
                            targets
                                .iter()
                                .zip(&partial)
                                .map(|((i, _), p)| beta(*i, interp_uniform(&p[..=k], dt, w)))
                                .product()
                        });
                        *o = self.z[j] * self.surv[j][k] * above + below;
                        if atom == Some(k) {
                            left_factor = above;
                        }
                    }
                }
            }
            // a jump at the atom node is stored as the midpoint of its one-sided
            // limits, which keeps every trapezoid integral over J second order
            if let Some(k) = atom {
                if k > 0 {
                    out[k] = 0.5 * (out[k] + self.z[j] * left_factor);
                }
            }
            for o in &mut out {
                *o = o.clamp(0.0, 1.0);
            }
            values.push(out);
        }
        TransformGrid { step: dt, values }
    }
}

/// Trapezoid approximation of int_0^{u_k} h(x) f(u_k - x) dx for every k.
fn convolve(h: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
    (0..h.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let inner: f64 = (1..k).map(|m| h[m] * f[k - m]).sum();
            dt * (0.5 * h[0] * f[k] + inner + 0.5 * h[k] * f[0])
        })
        .collect()
}

/// One application of the cluster operator to `current`.
pub fn phi_operator(current: &TransformGrid, model: &NetworkModel, z: &[f64], s: &[f64]) -> Result<TransformGrid> {
    check_args(model, z, s)?;
    if current.values.len() != model.d {
        return Err(TransformError::GridMismatch {
            expected: model.d,
            found: current.values.len(),
        });
    }
    let grid = current.grid()?;
    if let Some(bad) = current.values.iter().find(|v| v.len() != grid.len()) {
        return Err(TransformError::GridMismatch {
            expected: grid.len(),
            found: bad.len(),
        });
    }
    Ok(Operator::new(model, grid, z, s).apply(current))
}

/// E[prod_j z_j^{Q_j(t)} exp(-s_j Lambda_j(t))] by fixed-point iteration from J = 1.
pub fn fixed_point_transform(
    model: &NetworkModel,
    t: f64,
    z: &[f64],
    s: &[f64],
    options: &FixedPointOptions,
) -> Result<TransformResult> {
    check_args(model, z, s)?;
    let baseline: f64 = (0..model.d).map(|j| model.lambda0[j] * s[j]).sum();
    if t == 0.0 {
        return Ok(TransformResult {
            value: (-baseline).exp(),
            iterations: 0,
            residual: 0.0,
            grid: None,
        });
    }
    let grid = UniformGrid::new(t, options.steps)?;
    let op = Operator::new(model, grid, z, s);
    let mut current = TransformGrid::constant(model.d, &grid, 1.0);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let next = op.apply(&current);
        residual = next
            .values
            .iter()
            .flatten()
            .zip(current.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        iterations += 1;
        if residual < options.tol {
            break;
        }
    }
    if residual >= options.tol {
        return Err(TransformError::NoConvergence { iterations, residual });
    }
    let exponent: f64 = (0..model.d)
        .map(|j| model.lambda0[j] * (t + s[j] - trapezoid(&current.values[j], grid.step())))
        .sum();
    Ok(TransformResult {
        value: (-exponent).exp(),
        iterations,
        residual,
        grid: Some(current),
    })
}
