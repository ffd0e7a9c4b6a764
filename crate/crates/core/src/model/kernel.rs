use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Excitation shape h(t) for t >= 0 (h vanishes for t < 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// h(t) = scale * exp(-rate t)
    Exponential { rate: f64, scale: f64 },
    /// h(t) = scale * (1 + t / cutoff)^(-exponent)
    PowerLaw {
        exponent: f64,
        scale: f64,
        cutoff: f64,
    },
    /// h(t) = values[k] on [breakpoints[k], breakpoints[k+1]), zero past the last breakpoint.
    /// `breakpoints` has one more entry than `values` and starts at 0.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Zero,
}

impl Kernel {
    pub fn exponential(rate: f64, scale: f64) -> Self {
        Kernel::Exponential { rate, scale }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidKernel(m));
        match self {
            Kernel::Exponential { rate, scale } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
                if !(scale.is_finite() && *scale >= 0.0) {
                    return bad(format!("exponential scale must be nonnegative, got {scale}"));
                }
            }
            Kernel::PowerLaw {
                exponent,
                scale,
                cutoff,
            } => {
                if !(exponent.is_finite() && *exponent > 1.0) {
                    return Err(ModelError::DivergentIntegral(*exponent));
                }
                if !(scale.is_finite() && *scale >= 0.0) {
                    return bad(format!("power-law scale must be nonnegative, got {scale}"));
                }
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return bad(format!("power-law cutoff must be positive, got {cutoff}"));
                }
            }
            Kernel::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                if values.is_empty() || breakpoints.len() != values.len() + 1 {
                    return bad(format!(
                        "piecewise-constant kernel needs len(breakpoints) = len(values) + 1, got {} and {}",
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if breakpoints[0] != 0.0 {
                    return bad("first breakpoint must be 0".into());
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return bad("breakpoints must be finite and strictly increasing".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("piecewise values must be finite and nonnegative".into());
                }
            }
            Kernel::Zero => {}
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Exponential { rate, scale } => scale * (-rate * t).exp(),
            Kernel::PowerLaw {
                exponent,
                scale,
                cutoff,
            } => scale * (1.0 + t / cutoff).powf(-exponent),
            Kernel::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                // index of the last breakpoint <= t
                let k = breakpoints.partition_point(|b| *b <= t);
                if k == 0 || k > values.len() {
                    0.0
                } else {
                    values[k - 1]
                }
            }
            Kernel::Zero => 0.0,
        }
    }

    /// H(a) = integral of h over [0, a]; a = +inf gives the L1 norm.
    pub fn cumulative(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Exponential { rate, scale } => {
                if a.is_infinite() {
                    scale / rate
                } else {
                    scale / rate * (-(-rate * a).exp_m1())
                }
            }
            Kernel::PowerLaw {
                exponent,
                scale,
                cutoff,
            } => {
                let total = scale * cutoff / (exponent - 1.0);
                if a.is_infinite() {
                    total
                } else {
                    total * (1.0 - (1.0 + a / cutoff).powf(1.0 - exponent))
                }
            }
            Kernel::PiecewiseConstant {
                breakpoints,
                values,
            } => values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let lo = breakpoints[k];
                    let hi = breakpoints[k + 1].min(a);
                    if hi > lo {
                        v * (hi - lo)
                    } else {
                        0.0
                    }
                })
                .sum(),
            Kernel::Zero => 0.0,
        }
    }

    /// Inverse of [`Kernel::cumulative`] on [0, L1); used for exact inversion sampling.
    /// Returns `None` for shapes without a closed-form inverse.
    pub fn inverse_cumulative(&self, y: f64) -> Option<f64> {
        match self {
            Kernel::Exponential { rate, scale } => Some(-(-y * rate / scale).ln_1p() / rate),
            Kernel::PowerLaw {
                exponent,
                scale,
                cutoff,
            } => {
                let total = scale * cutoff / (exponent - 1.0);
                let tail = 1.0 - y / total;
                Some(cutoff * (tail.powf(1.0 / (1.0 - exponent)) - 1.0))
            }
            _ => None,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.cumulative(f64::INFINITY)
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Kernel::Exponential { scale, .. } | Kernel::PowerLaw { scale, .. } => *scale,
            Kernel::PiecewiseConstant { values, .. } => values.iter().cloned().fold(0.0, f64::max),
            Kernel::Zero => 0.0,
        }
    }

    /// Supremum of h over ages in [a, b].
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        if b < a {
            return 0.0;
        }
        match self {
            Kernel::PiecewiseConstant {
                breakpoints,
                values,
            } => values
                .iter()
                .enumerate()
                .filter(|(k, _)| breakpoints[*k] <= b && breakpoints[k + 1] > a)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max),
            _ => self.eval(a),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Kernel::PiecewiseConstant { values, .. } => values.windows(2).all(|w| w[1] <= w[0]),
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Exponential { scale, .. } | Kernel::PowerLaw { scale, .. } => *scale == 0.0,
            Kernel::PiecewiseConstant { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Rightmost point of the support (infinite unless piecewise constant).
    pub fn support_end(&self) -> f64 {
        match self {
            Kernel::PiecewiseConstant { breakpoints, .. } => *breakpoints.last().unwrap_or(&0.0),
            Kernel::Zero => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// L1 norm of a validated kernel.
pub fn kernel_l1(kernel: &Kernel) -> Result<f64> {
    kernel.validate()?;
    Ok(kernel.l1_norm())
}
