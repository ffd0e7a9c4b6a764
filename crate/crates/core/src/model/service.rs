use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use super::{ModelError, Result};

/// Law of the service requirement J (support in [0, inf)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    #[serde(rename = "lognormal")]
    LogNormal { mu: f64, sigma: f64 },
}

impl ServiceDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ServiceDistribution::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            ServiceDistribution::Deterministic { value } => value.is_finite() && *value >= 0.0,
            ServiceDistribution::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidService(format!("{self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ServiceDistribution::Exponential { rate } => 1.0 / rate,
            ServiceDistribution::Deterministic { value } => *value,
            ServiceDistribution::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// P(J <= t).
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            ServiceDistribution::Exponential { rate } => -(-rate * t).exp_m1(),
            ServiceDistribution::Deterministic { value } => {
                if t >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceDistribution::LogNormal { mu, sigma } => {
                if t == 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(t.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
        }
    }

    /// P(J > t).
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            ServiceDistribution::Exponential { rate } => (-rate * t).exp(),
            ServiceDistribution::LogNormal { mu, sigma } if t > 0.0 => {
                0.5 * erfc((t.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
            }
            _ => 1.0 - self.cdf(t),
        }
    }

    /// Density for continuous laws; `None` for the deterministic atom.
    pub fn pdf(&self, t: f64) -> Option<f64> {
        match self {
            ServiceDistribution::Exponential { rate } => Some(if t < 0.0 { 0.0 } else { rate * (-rate * t).exp() }),
            ServiceDistribution::Deterministic { .. } => None,
            ServiceDistribution::LogNormal { mu, sigma } => Some(if t <= 0.0 {
                0.0
            } else {
                let z = (t.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (t * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }),
        }
    }

    /// Quantile function for continuous laws; `None` for the deterministic atom.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        match self {
            ServiceDistribution::Exponential { rate } => Some(-(-p).ln_1p() / rate),
            ServiceDistribution::Deterministic { .. } => None,
            ServiceDistribution::LogNormal { mu, sigma } => {
                let n = Normal::new(0.0, 1.0).expect("standard normal");
                Some((mu + sigma * n.inverse_cdf(p)).exp())
            }
        }
    }

    /// Location of the atom, if the law is deterministic.
    pub fn atom(&self) -> Option<f64> {
        match self {
            ServiceDistribution::Deterministic { value } => Some(*value),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDistribution::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            ServiceDistribution::Deterministic { value } => *value,
            ServiceDistribution::LogNormal { mu, sigma } => {
                LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
            }
        }
    }

    /// The law of c * J for c > 0.
    pub fn scaled(&self, c: f64) -> ServiceDistribution {
        match self {
            ServiceDistribution::Exponential { rate } => ServiceDistribution::Exponential { rate: rate / c },
            ServiceDistribution::Deterministic { value } => ServiceDistribution::Deterministic { value: value * c },
            ServiceDistribution::LogNormal { mu, sigma } => ServiceDistribution::LogNormal {
                mu: mu + c.ln(),
                sigma: *sigma,
            },
        }
    }
}
