//! Moments and transforms of Markovian networks.
//!
//! With h_ij(t) = exp(-r_i t) (kernel scales folded into the marks) and
//! exponential services, (Q, Lambda) is Markov and the mixed moments
//! X(q, g) = E[Q-falling^q Lambda^g] of a fixed order n = |q| + |g| solve a
//! linear ODE driven by lower orders. [`system`] assembles and integrates it,
//! [`univariate`] holds the spectral closed forms for d = 1 and
//! [`characteristics`] evaluates the joint transform along characteristics.
//!
//! Mark vectors are assumed independent across targets, so mixed mark moments
//! factor into products of componentwise moments.

pub mod characteristics;
pub mod system;
pub mod univariate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_network, ExcitationMode, Kernel, ModelError, NetworkModel, ServiceSemantics};

pub use characteristics::characteristics_transform;
pub use system::{
    assemble_moment_system, factorial_to_raw, solve_moments_transient, solve_moments_transient_with, MomentSystem,
};
pub use univariate::{
    lagrange_sylvester_exp, stationary_mean, transient_z_univariate, univariate_eigenvalues, univariate_matrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("kernel h[{target}][{origin}] must be exponential with a rate shared along its row")]
    NonexponentialKernel { target: usize, origin: usize },
    #[error("mark B[{target}][{origin}] has no finite moment of order {order}")]
    MissingMarkMoment { target: usize, origin: usize, order: u32 },
    #[error("unsupported model: {0}")]
    Unsupported(&'static str),
    #[error("RK4 step {step:e} is unstable for this system; use a step below {suggested:e}")]
    StiffSystem { step: f64, suggested: f64 },
    #[error("eigenvalues are not distinct (minimum gap {0:e})")]
    RepeatedEigenvalues(f64),
    #[error("model is unstable: b1 / r = {0} >= 1")]
    Unstable(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MomentError>;

/// Multi-index (q | g): falling-factorial powers of Q and raw powers of Lambda.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentIndex {
    pub q: Vec<u32>,
    pub g: Vec<u32>,
}

impl MomentIndex {
    pub fn new(q: Vec<u32>, g: Vec<u32>) -> Self {
        MomentIndex { q, g }
    }

    pub fn order(&self) -> u32 {
        self.q.iter().sum::<u32>() + self.g.iter().sum::<u32>()
    }

    /// All indices of order n in dimension d, descending lexicographic in (q, g).
    pub fn enumerate(d: usize, n: u32) -> Vec<MomentIndex> {
        let mut out = Vec::new();
        let mut parts = vec![0u32; 2 * d];
        compositions(n, 0, &mut parts, &mut out);
        out.into_iter()
            .map(|p| MomentIndex {
                q: p[..d].to_vec(),
                g: p[d..].to_vec(),
            })
            .collect()
    }
}

fn compositions(rest: u32, pos: usize, parts: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == parts.len() {
        parts[pos] = rest;
        out.push(parts.clone());
        return;
    }
    for v in (0..=rest).rev() {
        parts[pos] = v;
        compositions(rest - v, pos + 1, parts, out);
    }
}

impl fmt::Display for MomentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        write!(f, "({}|{})", join(&self.q), join(&self.g))
    }
}

/// Moments of one order over time, `values[index][time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBlock {
    pub indices: Vec<MomentIndex>,
    pub values: Vec<Vec<f64>>,
}

/// Moment time series for orders 0..=n_max; `orders[n]` holds order n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub times: Vec<f64>,
    pub orders: Vec<MomentBlock>,
}

impl MomentTable {
    pub fn get(&self, index: &MomentIndex) -> Option<&[f64]> {
        let block = self.orders.get(index.order() as usize)?;
        let pos = block.indices.iter().position(|i| i == index)?;
        Some(&block.values[pos])
    }

    /// Flat map "(q|g)" -> series, for JSON output.
    pub fn to_map(&self) -> std::collections::BTreeMap<String, Vec<f64>> {
        self.orders
            .iter()
            .flat_map(|b| b.indices.iter().zip(&b.values).map(|(i, v)| (i.to_string(), v.clone())))
            .collect()
    }
}

/// Parameters of a Markovian network with kernel scales folded into marks.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovianParams {
    pub d: usize,
    pub lambda0: Vec<f64>,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    /// mu_route[i][j]: rate j -> i
    pub mu_route: Vec<Vec<f64>>,
    /// mark_moments[i][j][k] = E[(c_ij B_ij)^k], k = 0..=n_max
    pub mark_moments: Vec<Vec<Vec<f64>>>,
    /// Laplace transforms use (scale, mark index)
    scales: Vec<Vec<f64>>,
}

impl MarkovianParams {
    pub fn from_model(model: &NetworkModel, n_max: u32) -> Result<Self> {
        validate_network(model)?;
        if model.mode != ExcitationMode::Delayed {
            return Err(MomentError::Unsupported("moment equations are derived for the delayed mode"));
        }
        if !model.is_linear() {
            return Err(MomentError::Unsupported("nonlinear rate maps"));
        }
        if model.semantics() != ServiceSemantics::Rate {
            return Err(MomentError::Unsupported("scheduled (non-exponential) services"));
        }
        let d = model.d;
        let mut r = vec![1.0; d];
        let mut scales = vec![vec![0.0; d]; d];
        for i in 0..d {
            let mut row_rate: Option<f64> = None;
            for j in 0..d {
                match &model.kernels[i][j] {
                    Kernel::Zero => {}
                    Kernel::Exponential { rate, scale } => {
                        if let Some(prev) = row_rate {
                            if (prev - rate).abs() > 1e-12 * prev && *scale != 0.0 {
                                return Err(MomentError::NonexponentialKernel { target: i, origin: j });
                            }
                        }
                        if *scale != 0.0 || row_rate.is_none() {
                            row_rate = Some(*rate);
                        }
                        scales[i][j] = *scale;
                    }
                    _ => return Err(MomentError::NonexponentialKernel { target: i, origin: j }),
                }
            }
            if let Some(rate) = row_rate {
                r[i] = rate;
            }
        }
        let mut mark_moments = vec![vec![Vec::new(); d]; d];
        for i in 0..d {
            for j in 0..d {
                let c = scales[i][j];
                mark_moments[i][j] = (0..=n_max)
                    .map(|k| {
                        if k == 0 {
                            return Ok(1.0);
                        }
                        if c == 0.0 {
                            return Ok(0.0);
                        }
                        let m = model.marks[i][j].raw_moment(k);
                        if m.is_finite() {
                            Ok(c.powi(k as i32) * m)
                        } else {
                            Err(MomentError::MissingMarkMoment {
                                target: i,
                                origin: j,
                                order: k,
                            })
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?;
            }
        }
        Ok(MarkovianParams {
            d,
            lambda0: model.lambda0.clone(),
            r,
            mu: model.mu.clone(),
            mu_route: model.mu_route.clone(),
            mark_moments,
            scales,
        })
    }

    pub(crate) fn scale(&self, i: usize, j: usize) -> f64 {
        self.scales[i][j]
    }
}
