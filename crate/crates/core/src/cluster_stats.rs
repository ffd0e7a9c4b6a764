//! Cluster-size distributions of univariate branching representations.
//!
//! A particle has a Poisson number of children with mean B·H, where H is the
//! kernel mass it can deliver (the full L1 norm for hawkes and delayed modes,
//! the mass over its service window in ephemeral mode). The total progeny Z
//! then follows from the hitting-time identity P(Z = n) = P(S_n = n - 1) / n.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::model::{validate_network, ExcitationMode, MarkDistribution, ModelError, NetworkModel};
use crate::quad::adaptive_simpson;
use crate::rng::StreamKey;
use crate::sim::{cluster::simulate_cluster, replicate, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("rho must lie in (0, 1), got {0}")]
    RhoOutOfRange(f64),
    #[error("offspring mean {0} is not below one")]
    Supercritical(f64),
    #[error("no closed-form offspring law for {0}")]
    UnsupportedMark(String),
    #[error("truncation {truncation} drops mass {dropped:e} that the result depends on")]
    TruncationTooSmall { truncation: usize, dropped: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Borel(rho) mass at n >= 1.
pub fn borel_pmf(n: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(ClusterError::RhoOutOfRange(rho));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok((-rho * nf + (nf - 1.0) * (rho * nf).ln() - ln_factorial(n)).exp())
}

/// Total progeny law when offspring are NB(alpha, c / (c + rho)), i.e. gamma(alpha, c) marks.
pub fn gamma_cluster_pmf(n: usize, alpha: f64, c: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0 && c > 0.0 && rho >= 0.0) {
        return Err(ClusterError::InvalidArgument("need alpha > 0, c > 0 and rho >= 0".into()));
    }
    let mean = alpha * rho / c;
    if mean >= 1.0 {
        return Err(ClusterError::Supercritical(mean));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let head = alpha * nf * (c / (c + rho)).ln();
    if n == 1 {
        return Ok(head.exp());
    }
    let top = (alpha + 1.0) * nf - 2.0;
    let ln_binom = ln_gamma(top + 1.0) - ln_gamma(nf) - ln_gamma(top - nf + 2.0);
    Ok((ln_binom - nf.ln() + head + (nf - 1.0) * (rho / (c + rho)).ln()).exp())
}

/// P(X = k) for X mixed Poisson with mean B·h, B drawn from the mark law.
fn mixed_poisson(mark: &MarkDistribution, h: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    let nb = |alpha: f64, c: f64| {
        if h == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        (ln_gamma(alpha + kf) - ln_gamma(alpha) - ln_factorial(k) + alpha * (c / (c + h)).ln() + kf * (h / (c + h)).ln())
            .exp()
    };
    match mark {
        MarkDistribution::Deterministic { value } => {
            let m = value * h;
            Ok(if m == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-m + kf * m.ln() - ln_factorial(k)).exp()
            })
        }
        MarkDistribution::Exponential { rate } => Ok(nb(1.0, *rate)),
        MarkDistribution::Gamma { shape, rate } => Ok(nb(*shape, *rate)),
        other => Err(ClusterError::UnsupportedMark(format!("{other:?}"))),
    }
}

/// Offspring-count pmf of a particle in a univariate model.
pub fn offspring_pmf(model: &NetworkModel, n: usize) -> Result<f64> {
    validate_network(model)?;
    if model.d != 1 {
        return Err(ClusterError::InvalidArgument("offspring laws are univariate".into()));
    }
    let (kernel, mark, service) = (&model.kernels[0][0], &model.marks[0][0], &model.services[0]);
    match model.mode {
        ExcitationMode::Hawkes | ExcitationMode::Delayed => mixed_poisson(mark, kernel.l1_norm(), n),
        ExcitationMode::Ephemeral => {
            // the kernel is only felt while the parent is in service;
            // the first call rejects unsupported mark laws up front
            mixed_poisson(mark, 0.0, 0)?;
            if let Some(j) = service.atom() {
                return mixed_poisson(mark, kernel.cumulative(j), n);
            }
            let upper = service
                .quantile(1.0 - 1e-16)
                .ok_or_else(|| ClusterError::InvalidArgument("service law has no quantile".into()))?;
            let density = |t: f64| service.pdf(t).unwrap_or(0.0);
            Ok(adaptive_simpson(
                |t| mixed_poisson(mark, kernel.cumulative(t), n).unwrap_or(0.0) * density(t),
                0.0,
                upper,
                1e-14,
            ))
        }
    }
}

/// (1/n) P(X_1 + ... + X_n = n - 1) with the offspring pmf truncated at `truncation`.
///
/// Only offspring values up to n - 1 can contribute, so truncation is an
/// error only when it discards more than 1e-12 of that relevant mass.
pub fn hitting_time_pmf<F: Fn(usize) -> f64>(offspring: F, n: usize, truncation: Option<usize>) -> Result<f64> {
    if n == 0 {
        return Err(ClusterError::InvalidArgument("cluster sizes start at 1".into()));
    }
    let k = truncation.unwrap_or(4 * n);
    let target = n - 1;
    let dropped: f64 = (k + 1..=target).map(&offspring).sum();
    if dropped > 1e-12 {
        return Err(ClusterError::TruncationTooSmall { truncation: k, dropped });
    }
    let width = k.min(target);
    let p: Vec<f64> = (0..=width).map(&offspring).collect();
    let mut conv = vec![0.0; target + 1];
    conv[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; target + 1];
        for (s, c) in conv.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (x, px) in p.iter().enumerate().take(target + 1 - s) {
                next[s + x] += c * px;
            }
        }
        conv = next;
    }
    Ok(conv[target] / n as f64)
}

/// Empirical frequencies of total cluster sizes 1..=n_max over `reps` complete clusters.
///
/// Sizes above `n_max` are counted in the returned overflow mass.
pub fn simulated_size_frequencies(model: &NetworkModel, n_max: usize, reps: usize, key: StreamKey) -> Result<(Vec<f64>, f64)> {
    validate_network(model)?;
    if model.d != 1 || reps == 0 {
        return Err(ClusterError::InvalidArgument("need a univariate model and reps > 0".into()));
    }
    let sizes = replicate(reps, key, |k| {
        let mut rng = k.rng();
        simulate_cluster(model, 0, 0.0, f64::INFINITY, &mut rng, crate::sim::cluster::DEFAULT_GENERATION_CAP).map(|c| c.size())
    });
    let mut freq = vec![0.0; n_max];
    let mut overflow = 0.0;
    let w = 1.0 / reps as f64;
    for s in sizes {
        let s = s?;
        if s >= 1 && s <= n_max {
            freq[s - 1] += w;
        } else {
            overflow += w;
        }
    }
    Ok((freq, overflow))
}
