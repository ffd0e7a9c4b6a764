//! Spectral closed forms for the univariate Markovian model.

use nalgebra::{DMatrix, DVector};

use super::system::{assemble, MomentSystem};
use super::{MarkovianParams, MomentError, Result};
use crate::model::NetworkModel;
use crate::quad::adaptive_simpson_vec;

/// Eigenvalues of the order-n matrix, decreasing in k.
pub fn univariate_eigenvalues(n: u32, mu: f64, r: f64, b1: f64) -> Vec<f64> {
    let nf = f64::from(n);
    let root = ((mu - r).powi(2) + 4.0 * mu * b1).sqrt();
    (0..=n)
        .map(|k| -0.5 * nf * (mu + r) + 0.5 * (nf - 2.0 * f64::from(k)) * root)
        .collect()
}

/// Tridiagonal order-n matrix over (n,0), (n-1,1), ..., (0,n).
pub fn univariate_matrix(n: u32, mu: f64, r: f64, b1: f64) -> DMatrix<f64> {
    let dim = n as usize + 1;
    let mut a = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let kf = k as f64;
        let q = f64::from(n) - kf;
        a[(k, k)] = -(kf * r + q * mu);
        if k + 1 < dim {
            a[(k, k + 1)] = q;
        }
        if k > 0 {
            a[(k, k - 1)] = mu * kf * b1;
        }
    }
    a
}

/// Spectral projectors P_k with e^{At} = sum_k e^{lambda_k t} P_k.
struct Spectral {
    eigs: Vec<f64>,
    projectors: Vec<DMatrix<f64>>,
}

impl Spectral {
    fn new(a: &DMatrix<f64>, eigs: &[f64]) -> Result<Self> {
        let dim = a.nrows();
        if eigs.len() != dim || a.ncols() != dim {
            return Err(MomentError::InvalidArgument("one eigenvalue per matrix row is required".into()));
        }
        let mut gap = f64::INFINITY;
        for (i, x) in eigs.iter().enumerate() {
            for y in &eigs[i + 1..] {
                gap = gap.min((x - y).abs());
            }
        }
        if gap < 1e-9 {
            return Err(MomentError::RepeatedEigenvalues(gap));
        }
        let id = DMatrix::<f64>::identity(dim, dim);
        let projectors = eigs
            .iter()
            .enumerate()
            .map(|(k, lk)| {
                eigs.iter().enumerate().filter(|(j, _)| *j != k).fold(id.clone(), |acc, (_, lj)| {
                    acc * (a - &id * *lj) / (lk - lj)
                })
            })
            .collect();
        Ok(Spectral {
            eigs: eigs.to_vec(),
            projectors,
        })
    }

    fn exp(&self, t: f64) -> DMatrix<f64> {
        let dim = self.projectors[0].nrows();
        self.eigs
            .iter()
            .zip(&self.projectors)
            .fold(DMatrix::zeros(dim, dim), |acc, (l, p)| acc + p * (l * t).exp())
    }

    /// int_0^t e^{A(t-s)} ds
    fn exp_integral(&self, t: f64) -> DMatrix<f64> {
        let dim = self.projectors[0].nrows();
        self.eigs.iter().zip(&self.projectors).fold(DMatrix::zeros(dim, dim), |acc, (l, p)| {
            let w = if l.abs() * t < 1e-12 { t } else { (l * t).exp_m1() / l };
            acc + p * w
        })
    }
}

/// e^{At} by Lagrange-Sylvester interpolation over distinct eigenvalues.
pub fn lagrange_sylvester_exp(a: &DMatrix<f64>, eigenvalues: &[f64], t: f64) -> Result<DMatrix<f64>> {
    Ok(Spectral::new(a, eigenvalues)?.exp(t))
}

struct Level {
    system: MomentSystem,
    spectral: Spectral,
    start: DVector<f64>,
}

struct Univariate {
    levels: Vec<Level>,
}

impl Univariate {
    fn new(params: &MarkovianParams, n: u32) -> Result<Self> {
        let (mu, r, b1) = (params.mu[0], params.r[0], params.mark_moments[0][0][1]);
        let levels = (0..=n)
            .map(|m| {
                let system = assemble(params, m);
                let spectral = Spectral::new(&system.matrix, &univariate_eigenvalues(m, mu, r, b1))?;
                let mut start = DVector::zeros(m as usize + 1);
                start[m as usize] = params.lambda0[0].powi(m as i32);
                Ok(Level {
                    system,
                    spectral,
                    start,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Univariate { levels })
    }

    fn forcing(&self, m: u32, s: f64) -> DVector<f64> {
        let level = &self.levels[m as usize];
        let lower: Vec<Vec<f64>> = (0..m).map(|o| self.z(o, s)).collect();
        DVector::from_vec(level.system.forcing_at(|o, p| lower[o as usize][p]))
    }

    fn z(&self, m: u32, t: f64) -> Vec<f64> {
        if m == 0 {
            return vec![1.0];
        }
        let level = &self.levels[m as usize];
        let free = level.spectral.exp(t) * &level.start;
        let driven = if m == 1 {
            // forcing only involves order 0 and is constant
            level.spectral.exp_integral(t) * self.forcing(1, 0.0)
        } else {
            DVector::from_vec(adaptive_simpson_vec(
                |s| (level.spectral.exp(t - s) * self.forcing(m, s)).as_slice().to_vec(),
                0.0,
                t,
                1e-9,
            ))
        };
        (free + driven).as_slice().to_vec()
    }
}

/// Order-n factorial moments (n,0), ..., (0,n) at time t in closed form.
pub fn transient_z_univariate(model: &NetworkModel, n: u32, t: f64) -> Result<Vec<f64>> {
    if model.d != 1 {
        return Err(MomentError::Unsupported("univariate closed forms need d = 1"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(MomentError::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let params = MarkovianParams::from_model(model, n)?;
    Ok(Univariate::new(&params, n)?.z(n, t))
}

/// Stationary (E[Q], E[Lambda]) of a stable univariate Markovian model.
pub fn stationary_mean(model: &NetworkModel) -> Result<(f64, f64)> {
    if model.d != 1 {
        return Err(MomentError::Unsupported("univariate closed forms need d = 1"));
    }
    let p = MarkovianParams::from_model(model, 1)?;
    let (lambda0, r, mu, b1) = (p.lambda0[0], p.r[0], p.mu[0], p.mark_moments[0][0][1]);
    if b1 / r >= 1.0 {
        return Err(MomentError::Unstable(b1 / r));
    }
    let lam = r * lambda0 / (r - b1);
    Ok((lam / mu, lam))
}
