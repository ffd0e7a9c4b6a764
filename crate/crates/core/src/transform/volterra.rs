//! Smeared kernel and second-kind Volterra solvers.
//!
//! The mean occupancy of a cluster R1 solves R1 = P(J > .) + b1 (R1 * k),
//! where the mean offspring kernel k is h (hawkes), h-bar(s) = int_0^s h(s - w)
//! dF_J(w) (delayed) or h P(J > .) (ephemeral). E[Q(t)] = lambda0 int_0^t R1.
//! R_alpha solves R_alpha = b1 (R_alpha * h-bar) + C Gamma(1 - alpha) F with
//! F(u) = int_0^u D(u - w)^alpha dF_J(w) and D = h * R1 (delayed mode).

use statrs::function::gamma::gamma;

use super::{Result, ServiceMeasure, TransformError, UniformGrid};
use crate::model::{validate_network, ExcitationMode, Kernel, NetworkModel, ServiceDistribution};
use crate::quad::{adaptive_simpson, interp_uniform};

/// h-bar(t) = int_0^t h(t - w) dF_J(w).
pub fn hbar(kernel: &Kernel, service: &ServiceDistribution, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if let Some(j0) = service.atom() {
        return if t >= j0 { kernel.eval(t - j0) } else { 0.0 };
    }
    if t == 0.0 {
        return 0.0;
    }
    let scale = kernel.sup_norm().max(f64::MIN_POSITIVE);
    adaptive_simpson(
        |w| kernel.eval(t - w) * service.pdf(w).unwrap_or(0.0),
        0.0,
        t,
        1e-13 * scale,
    )
}

fn univariate(model: &NetworkModel) -> Result<()> {
    validate_network(model)?;
    if model.d != 1 {
        return Err(TransformError::Unsupported("Volterra solvers need a univariate model"));
    }
    let mass = model.marks[0][0].mean() * model.kernels[0][0].l1_norm();
    if mass >= 1.0 {
        return Err(TransformError::Unstable(mass));
    }
    Ok(())
}

/// Mean offspring kernel of the model's mode on the grid.
fn mean_kernel(model: &NetworkModel, grid: &UniformGrid) -> Vec<f64> {
    let h = &model.kernels[0][0];
    let sv = &model.services[0];
    grid.points()
        .into_iter()
        .map(|u| match model.mode {
            ExcitationMode::Hawkes => h.eval(u),
            ExcitationMode::Delayed => hbar(h, sv, u),
            ExcitationMode::Ephemeral => h.eval(u) * sv.survival(u),
        })
        .collect()
}

/// Solve x = f + b (x * k) by forward trapezoid stepping (implicit in the diagonal term).
pub(crate) fn solve_second_kind(forcing: &[f64], kernel: &[f64], b: f64, dt: f64) -> Vec<f64> {
    let n = forcing.len();
    let mut x = vec![0.0; n];
    x[0] = forcing[0];
    let diag = 1.0 - 0.5 * b * dt * kernel[0];
    for k in 1..n {
        let inner: f64 = (1..k).map(|m| kernel[k - m] * x[m]).sum();
        let known = forcing[k] + b * dt * (0.5 * kernel[k] * x[0] + inner);
        x[k] = known / diag;
    }
    x
}

/// R1 on the grid.
pub fn volterra_solve_r1(model: &NetworkModel, grid: &UniformGrid) -> Result<Vec<f64>> {
    univariate(model)?;
    let kbar = mean_kernel(model, grid);
    let surv: Vec<f64> = grid.points().iter().map(|u| model.services[0].survival(*u)).collect();
    Ok(solve_second_kind(&surv, &kbar, model.marks[0][0].mean(), grid.step()))
}

/// R_alpha on the grid for alpha in (1, 2), given R1 on the same grid.
pub fn volterra_solve_ralpha(
    model: &NetworkModel,
    r1: &[f64],
    alpha: f64,
    c: f64,
    grid: &UniformGrid,
) -> Result<Vec<f64>> {
    univariate(model)?;
    if model.mode != ExcitationMode::Delayed {
        return Err(TransformError::Unsupported("R_alpha is defined for the delayed mode"));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(TransformError::InvalidArgument(format!("alpha must lie in (1, 2), got {alpha}")));
    }
    if r1.len() != grid.len() {
        return Err(TransformError::GridMismatch {
            expected: grid.len(),
            found: r1.len(),
        });
    }
    let dt = grid.step();
    let h: Vec<f64> = grid.points().iter().map(|u| model.kernels[0][0].eval(*u)).collect();
    let dconv: Vec<f64> = (0..grid.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let inner: f64 = (1..k).map(|m| h[m] * r1[k - m]).sum();
            dt * (0.5 * h[0] * r1[k] + inner + 0.5 * h[k] * r1[0])
        })
        .collect();
    let measure = ServiceMeasure::new(&model.services[0], grid);
    let factor = c * gamma(1.0 - alpha);
    let forcing: Vec<f64> = (0..grid.len())
        .map(|k| {
            let u = grid.point(k);
            factor * measure.integrate(k, |w| interp_uniform(&dconv, dt, u - w).max(0.0).powf(alpha))
        })
        .collect();
    let kbar = mean_kernel(model, grid);
    Ok(solve_second_kind(&forcing, &kbar, model.marks[0][0].mean(), dt))
}
