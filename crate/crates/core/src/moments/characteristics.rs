//! Joint transform E[prod z^Q e^{-s Lambda}] via the characteristic ODEs.

use super::{MarkovianParams, Result};
use crate::model::NetworkModel;

const STEPS: usize = 4096;

/// Evaluate E[prod_j z_j^{Q_j(t)} exp(-s_j Lambda_j(t))] for a Markovian delayed network.
pub fn characteristics_transform(model: &NetworkModel, t: f64, z: &[f64], s: &[f64]) -> Result<f64> {
    let p = MarkovianParams::from_model(model, 1)?;
    let d = p.d;
    if z.len() != d || s.len() != d {
        return Err(super::MomentError::InvalidArgument(format!("z and s must have length {d}")));
    }
    if z.iter().any(|v| !(0.0..=1.0).contains(v)) || s.iter().any(|v| !(*v >= 0.0)) || !(t >= 0.0 && t.is_finite()) {
        return Err(super::MomentError::InvalidArgument("need z in [0,1], s >= 0 and finite t >= 0".into()));
    }
    // state: s_j, z_j, I_j = int s_j
    let rhs = |x: &[f64]| -> Vec<f64> {
        let (sv, zv) = (&x[..d], &x[d..2 * d]);
        let mut out = vec![0.0; 3 * d];
        for j in 0..d {
            out[j] = -p.r[j] * sv[j] - zv[j] + 1.0;
            let beta: f64 = (0..d)
                .map(|i| {
                    let c = p.scale(i, j);
                    if c == 0.0 {
                        1.0
                    } else {
                        model.marks[i][j].laplace(c * sv[i])
                    }
                })
                .product();
            let route: f64 = (0..d).map(|i| p.mu_route[i][j] * (zv[i] - zv[j])).sum();
            out[d + j] = p.mu[j] * (beta - zv[j]) + route;
            out[2 * d + j] = sv[j];
        }
        out
    };
    let mut x: Vec<f64> = s.iter().chain(z).cloned().chain(std::iter::repeat_n(0.0, d)).collect();
    let h = t / STEPS as f64;
    if h > 0.0 {
        let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u + a * v).collect() };
        for _ in 0..STEPS {
            let k1 = rhs(&x);
            let k2 = rhs(&axpy(&x, 0.5 * h, &k1));
            let k3 = rhs(&axpy(&x, 0.5 * h, &k2));
            let k4 = rhs(&axpy(&x, h, &k3));
            for i in 0..3 * d {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let exponent: f64 = (0..d).map(|j| p.lambda0[j] * (x[j] + p.r[j] * x[2 * d + j])).sum();
    Ok((-exponent).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExcitationMode, Kernel, MarkDistribution};

    fn reference() -> NetworkModel {
        NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed)
    }

    #[test]
    fn trivial_points() {
        assert!((characteristics_transform(&reference(), 3.0, &[1.0], &[0.0]).unwrap() - 1.0).abs() < 1e-14);
        let v = characteristics_transform(&reference(), 0.0, &[0.4], &[0.7]).unwrap();
        assert!((v - (-0.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn infinite_server_pgf() {
        let mut m = reference();
        m.kernels[0][0] = Kernel::exponential(2.0, 0.0);
        let (t, z): (f64, f64) = (2.0, 0.3);
        let mean = 1.0 - (-t).exp();
        let v = characteristics_transform(&m, t, &[z], &[0.0]).unwrap();
        assert!((v - (-(1.0 - z) * mean).exp()).abs() < 1e-10);
    }
}
