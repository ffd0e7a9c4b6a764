//! Pass thresholds shared by every experiment and the acceptance suite.
//!
//! Keeping them in one place makes the statistical tolerances auditable.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum KS / chi-square p-value for "same law".
    pub min_p_value: f64,
    /// Maximum total-variation distance between simulated and exact pmfs.
    pub max_total_variation: f64,
    /// Width of Monte Carlo agreement bands in standard errors.
    pub se_multiplier: f64,
    /// Relative tolerance on the FCLT variance at v = 1.
    pub fclt_variance_rel: f64,
    /// Bootstrap resamples for dominance bands and Hill intervals.
    pub bootstrap_resamples: usize,
    /// Quantile of the bootstrap sup-statistic used as dominance band.
    pub dominance_band_quantile: f64,
    /// Confidence level of the Hill bootstrap interval.
    pub hill_confidence: f64,
    /// Absolute floor for transform comparisons.
    pub transform_abs: f64,
    /// Closed-form moments versus RK4.
    pub moment_closed_form_abs: f64,
    /// Eigenvalue formula versus a dense eigensolver.
    pub eigen_abs: f64,
    /// Matrix exponential versus the scaling-and-squaring oracle.
    pub expm_abs: f64,
    /// Semigroup identity of the matrix exponential.
    pub semigroup_abs: f64,
    /// Cluster-size pmfs versus the convolution oracle.
    pub pmf_abs: f64,
    /// Volterra mean versus the moment engine.
    pub volterra_abs: f64,
    /// Burn-in for stationarity experiments is this factor over (r - b1).
    pub burn_in_factor: f64,
}

pub const THRESHOLDS: Thresholds = Thresholds {
    min_p_value: 0.01,
    max_total_variation: 0.01,
    se_multiplier: 3.0,
    fclt_variance_rel: 0.10,
    bootstrap_resamples: 200,
    dominance_band_quantile: 0.99,
    hill_confidence: 0.95,
    transform_abs: 1e-4,
    moment_closed_form_abs: 1e-6,
    eigen_abs: 1e-8,
    expm_abs: 1e-10,
    semigroup_abs: 1e-9,
    pmf_abs: 1e-10,
    volterra_abs: 1e-3,
    burn_in_factor: 20.0,
};

impl Default for Thresholds {
    fn default() -> Self {
        THRESHOLDS
    }
}
