use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Pareto};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{ModelError, Result};
use crate::quad::adaptive_simpson;

/// Law of the excitation mark B (positive support, finite mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MarkDistribution {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Pareto { alpha: f64, scale: f64 },
}

impl MarkDistribution {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let ok = match self {
            MarkDistribution::Deterministic { value } => pos(*value),
            MarkDistribution::Exponential { rate } => pos(*rate),
            MarkDistribution::Gamma { shape, rate } => pos(*shape) && pos(*rate),
            MarkDistribution::Beta { a, b } => pos(*a) && pos(*b),
            MarkDistribution::Pareto { alpha, scale } => pos(*scale) && alpha.is_finite() && *alpha > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::NonpositiveMark(format!("{self:?}")))
        }
    }

    /// b1 = E[B].
    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// b2 = E[B^2]; infinite for Pareto with alpha <= 2.
    pub fn second_moment(&self) -> f64 {
        self.raw_moment(2)
    }

    /// E[B^k]; `f64::INFINITY` when the moment does not exist.
    pub fn raw_moment(&self, k: u32) -> f64 {
        let kf = f64::from(k);
        match self {
            MarkDistribution::Deterministic { value } => value.powi(k as i32),
            MarkDistribution::Exponential { rate } => (ln_gamma(kf + 1.0) - kf * rate.ln()).exp(),
            MarkDistribution::Gamma { shape, rate } => {
                (ln_gamma(shape + kf) - ln_gamma(*shape) - kf * rate.ln()).exp()
            }
            MarkDistribution::Beta { a, b } => (0..k).map(|r| (a + r as f64) / (a + b + r as f64)).product(),
            MarkDistribution::Pareto { alpha, scale } => {
                if kf < *alpha {
                    alpha * scale.powi(k as i32) / (alpha - kf)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Laplace transform E[exp(-s B)] for s >= 0.
    pub fn laplace(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        match self {
            MarkDistribution::Deterministic { value } => (-s * value).exp(),
            MarkDistribution::Exponential { rate } => rate / (rate + s),
            MarkDistribution::Gamma { shape, rate } => (rate / (rate + s)).powf(*shape),
            MarkDistribution::Beta { a, b } => beta_laplace(*a, *b, s),
            MarkDistribution::Pareto { alpha, scale } => {
                // B = scale * U^(-1/alpha) with U uniform on (0, 1]
                adaptive_simpson(
                    |u| {
                        if u <= 0.0 {
                            0.0
                        } else {
                            (-s * scale * u.powf(-1.0 / alpha)).exp()
                        }
                    },
                    0.0,
                    1.0,
                    1e-13,
                )
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarkDistribution::Deterministic { value } => *value,
            MarkDistribution::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            MarkDistribution::Gamma { shape, rate } => {
                Gamma::new(*shape, 1.0 / rate).expect("validated").sample(rng)
            }
            MarkDistribution::Beta { a, b } => Beta::new(*a, *b).expect("validated").sample(rng),
            MarkDistribution::Pareto { alpha, scale } => {
                Pareto::new(*scale, *alpha).expect("validated").sample(rng)
            }
        }
    }

    /// The law of c * B for c > 0.
    pub fn scaled(&self, c: f64) -> MarkDistribution {
        match self {
            MarkDistribution::Deterministic { value } => MarkDistribution::Deterministic { value: value * c },
            MarkDistribution::Exponential { rate } => MarkDistribution::Exponential { rate: rate / c },
            MarkDistribution::Gamma { shape, rate } => MarkDistribution::Gamma {
                shape: *shape,
                rate: rate / c,
            },
            MarkDistribution::Pareto { alpha, scale } => MarkDistribution::Pareto {
                alpha: *alpha,
                scale: scale * c,
            },
            MarkDistribution::Beta { .. } => panic!("beta marks are not closed under scaling"),
        }
    }
}

/// E[exp(-sB)] for B ~ Beta(a, b): exp(-s) * 1F1(b; a+b; s), summed in log space.
fn beta_laplace(a: f64, b: f64, s: f64) -> f64 {
    let ln_s = s.ln();
    let mut log_term = 0.0; // log of (b)_k / (a+b)_k * s^k / k!
    let mut total = (-s).exp();
    let mut k = 0u32;
    loop {
        let kf = f64::from(k);
        log_term += ((b + kf) / (a + b + kf)).ln() + ln_s - (kf + 1.0).ln();
        k += 1;
        let term = (log_term - s).exp();
        total += term;
        if f64::from(k) > s && term < 1e-17 * total {
            break;
        }
        if k > 100_000 {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn moments() {
        let g = MarkDistribution::Gamma { shape: 2.0, rate: 4.0 };
        assert!((g.mean() - 0.5).abs() < 1e-14);
        assert!((g.second_moment() - 6.0 / 16.0).abs() < 1e-14);
        let p = MarkDistribution::Pareto { alpha: 1.5, scale: 1.0 };
        assert!((p.mean() - 3.0).abs() < 1e-14);
        assert!(p.second_moment().is_infinite());
        let b = MarkDistribution::Beta { a: 3.5, b: 1.5 };
        assert!((b.mean() - 0.7).abs() < 1e-14);
        assert!((MarkDistribution::Exponential { rate: 2.0 }.raw_moment(3) - 6.0 / 8.0).abs() < 1e-13);
    }

    #[test]
    fn beta_laplace_against_quadrature() {
        let (a, b) = (3.5, 1.5);
        let c = statrs::function::beta::ln_beta(a, b);
        for s in [0.1, 1.0, 5.0, 40.0] {
            let q = adaptive_simpson(
                |x: f64| {
                    if x <= 0.0 || x >= 1.0 {
                        0.0
                    } else {
                        (-s * x + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - c).exp()
                    }
                },
                0.0,
                1.0,
                1e-13,
            );
            let v = MarkDistribution::Beta { a, b }.laplace(s);
            assert!((v - q).abs() < 1e-8, "s={s}: {v} vs {q}");
        }
    }

    #[test]
    fn pareto_laplace_monte_carlo() {
        let p = MarkDistribution::Pareto { alpha: 1.5, scale: 0.2 };
        let mut rng = StreamKey::new(3).rng();
        let n = 200_000;
        let mc: f64 = (0..n).map(|_| (-0.7 * p.sample(&mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((mc - p.laplace(0.7)).abs() < 0.005);
    }
}
