//! Monte Carlo experiments checking the limit theorems and orderings.
//!
//! Every experiment takes a serializable config plus a [`StreamKey`] and
//! returns a report that embeds the config, so a results file is self-describing.

pub mod stats;
pub mod thresholds;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use thiserror::Error;

use crate::model::{
    ExcitationMode, Kernel, MarkDistribution, ModelError, NetworkModel, ServiceDistribution, Snapshot,
};
use crate::moments::{MarkovianParams, MomentError};
use crate::rng::{SimRng, StreamKey};
use crate::sim::{cluster, replicate, thinning, SimError};

pub use stats::{ks_one_sample, ks_two_sample, KsResult};
pub use thresholds::{Thresholds, THRESHOLDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("need at least {required} samples, got {found}")]
    InsufficientSamples { found: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Snapshots from the cluster engine when it applies, else from thinning.
pub fn snapshots(model: &NetworkModel, times: &[f64], key: StreamKey) -> Result<Vec<Snapshot>> {
    if model.has_routing() || !model.is_linear() {
        Ok(thinning::thinning_snapshots(model, times, key)?)
    } else {
        Ok(cluster::cluster_snapshots(model, times, key)?)
    }
}

fn sample_snapshots(model: &NetworkModel, times: &[f64], reps: usize, key: StreamKey) -> Result<Vec<Vec<Snapshot>>> {
    replicate(reps, key, |k| snapshots(model, times, k)).into_iter().collect()
}

fn univariate(model: &NetworkModel) -> Result<()> {
    if model.d != 1 {
        return Err(ExperimentError::InvalidArgument("experiment needs a univariate model".into()));
    }
    Ok(())
}

/// rho = E[B] ||h||_1 of a univariate model.
fn branching_ratio(model: &NetworkModel) -> f64 {
    model.marks[0][0].mean() * model.kernels[0][0].l1_norm()
}

// ---------------------------------------------------------------- FCLT

/// Multiply every service time by `factor`, keeping departure rates consistent.
pub fn stretch_services(model: &NetworkModel, factor: f64) -> NetworkModel {
    let mut out = model.clone();
    for (s, mu) in out.services.iter_mut().zip(out.mu.iter_mut()) {
        *s = s.scaled(factor);
        *mu /= factor;
    }
    for row in &mut out.mu_route {
        for v in row {
            *v /= factor;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcltConfig {
    pub model: NetworkModel,
    #[serde(default = "default_fclt_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_fclt_reps")]
    pub reps: usize,
    #[serde(default = "default_v_grid")]
    pub v_grid: Vec<f64>,
}

fn default_fclt_horizon() -> f64 {
    5000.0
}
fn default_fclt_reps() -> usize {
    2000
}
/// v = 0.2, 0.3, ..., 1.0; epsilon = 0.2 keeps clear of the boundary layer at alpha = 1/2.
pub fn default_v_grid() -> Vec<f64> {
    (2..=10).map(|k| f64::from(k) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcltPoint {
    pub v: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcltReport {
    pub config: FcltConfig,
    /// lambda0 / (1 - rho)
    pub centering: f64,
    /// Brownian variance per unit v
    pub limit_variance: f64,
    /// Constant shift of the limit (nonzero only for alpha = 1/2)
    pub limit_offset: f64,
    pub points: Vec<FcltPoint>,
    pub thresholds: Thresholds,
    /// Means within the SE band of the offset and the variance at the last v
    /// within the relative tolerance of the Brownian variance.
    pub pass: bool,
}

fn check_fclt_assumptions(model: &NetworkModel, alpha: f64) -> Result<f64> {
    univariate(model)?;
    if model.mode == ExcitationMode::Ephemeral {
        return Err(ExperimentError::AssumptionViolated("stretched-service limits cover hawkes and delayed modes".into()));
    }
    if !(0.0..=0.5).contains(&alpha) {
        return Err(ExperimentError::AssumptionViolated(format!("alpha must lie in [0, 1/2], got {alpha}")));
    }
    let rho = branching_ratio(model);
    if !(rho < 1.0) {
        return Err(ExperimentError::AssumptionViolated(format!("E[B] ||h||_1 = {rho} is not below 1")));
    }
    if let Kernel::PowerLaw { exponent, .. } = model.kernels[0][0] {
        if exponent <= 2.0 {
            return Err(ExperimentError::AssumptionViolated("kernel needs a finite first moment".into()));
        }
    }
    if alpha == 0.5 && !model.services[0].mean().is_finite() {
        return Err(ExperimentError::AssumptionViolated("service time needs a finite mean".into()));
    }
    if !model.marks[0][0].second_moment().is_finite() {
        return Err(ExperimentError::AssumptionViolated("marks need a finite second moment".into()));
    }
    Ok(rho)
}

/// Simulate (N(Tv) - centering T v) / sqrt(T) with services stretched by T^alpha.
pub fn fclt_run(config: &FcltConfig, key: StreamKey) -> Result<FcltReport> {
    let model = &config.model;
    let rho = check_fclt_assumptions(model, config.alpha)?;
    let t = config.horizon;
    if !(t > 0.0 && t.is_finite()) || config.reps < 2 || config.v_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(ExperimentError::InvalidArgument("need T > 0, reps >= 2 and v in [0, 1]".into()));
    }
    let lambda0 = model.lambda0[0];
    let centering = lambda0 / (1.0 - rho);
    // Var(Z) for the total progeny Z of a mixed-Poisson Galton-Watson tree
    let norm = model.kernels[0][0].l1_norm();
    let offspring_var = rho + norm * norm * (model.marks[0][0].second_moment() - model.marks[0][0].mean().powi(2));
    let limit_variance = lambda0 * (offspring_var / (1.0 - rho).powi(3) + 1.0 / (1.0 - rho).powi(2));
    let limit_offset = if config.alpha == 0.5 {
        -lambda0 * model.services[0].mean() * rho / (1.0 - rho).powi(2)
    } else {
        0.0
    };
    let stretched = stretch_services(model, t.powf(config.alpha));
    let v_max = config.v_grid.iter().cloned().fold(0.0, f64::max);
    let rows: Vec<Vec<f64>> = replicate(config.reps, key.named("fclt"), |k| {
        cluster::simulate_arrivals(&stretched, t * v_max, k).map(|arr| {
            config
                .v_grid
                .iter()
                .map(|v| {
                    let count = arr.partition_point(|(s, _)| *s <= t * v) as f64;
                    (count - centering * t * v) / t.sqrt()
                })
                .collect()
        })
    })
    .into_iter()
    .collect::<std::result::Result<_, _>>()?;
    let points = config
        .v_grid
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let xs: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (mean, mean_se) = stats::mean_se(&xs);
            FcltPoint {
                v: *v,
                mean,
                mean_se,
                variance: stats::sample_variance(&xs),
                variance_se: stats::variance_se(&xs),
            }
        })
        .collect::<Vec<FcltPoint>>();
    let th = THRESHOLDS;
    let means_ok = points
        .iter()
        .all(|p| (p.mean - limit_offset).abs() <= th.se_multiplier * p.mean_se);
    let variance_ok = points.last().is_none_or(|p| {
        let target = limit_variance * p.v;
        (p.variance - target).abs() <= th.fclt_variance_rel * target
    });
    Ok(FcltReport {
        config: config.clone(),
        centering,
        limit_variance,
        limit_offset,
        points,
        thresholds: th,
        pass: means_ok && variance_ok,
    })
}

// ---------------------------------------------------------------- FLLN

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FllnConfig {
    pub model: NetworkModel,
    #[serde(default = "default_flln_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_flln_reps")]
    pub reps: usize,
    #[serde(default)]
    pub alpha: f64,
}

fn default_flln_horizons() -> Vec<f64> {
    vec![500.0, 1000.0, 2000.0]
}
fn default_flln_reps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FllnPoint {
    pub horizon: f64,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FllnReport {
    pub config: FllnConfig,
    pub slope: f64,
    pub points: Vec<FllnPoint>,
    /// Medians strictly decrease along the horizon ladder.
    pub decreasing: bool,
}

/// sup over v in [0, 1] of |N(Tv)/T - slope v| for sorted arrival times.
pub fn sup_deviation(arrivals: &[f64], horizon: f64, slope: f64) -> f64 {
    let mut sup = 0.0f64;
    for (k, s) in arrivals.iter().enumerate() {
        let drift = slope * s / horizon;
        sup = sup.max((k as f64 / horizon - drift).abs()).max(((k + 1) as f64 / horizon - drift).abs());
    }
    sup.max((arrivals.len() as f64 / horizon - slope).abs())
}

pub fn flln_check(config: &FllnConfig, key: StreamKey) -> Result<FllnReport> {
    let model = &config.model;
    let rho = check_fclt_assumptions(model, config.alpha)?;
    let slope = model.lambda0[0] / (1.0 - rho);
    let mut points = Vec::new();
    for (i, &t) in config.horizons.iter().enumerate() {
        let stretched = stretch_services(model, t.powf(config.alpha));
        let stats_: Vec<f64> = replicate(config.reps, key.named("flln").child(i as u64), |k| {
            cluster::simulate_arrivals(&stretched, t, k).map(|arr| {
                let times: Vec<f64> = arr.into_iter().map(|(s, _)| s).collect();
                sup_deviation(&times, t, slope)
            })
        })
        .into_iter()
        .collect::<std::result::Result<_, _>>()?;
        points.push(FllnPoint {
            horizon: t,
            median: stats::quantile(&stats_, 0.5),
            mean: stats::mean_se(&stats_).0,
        });
    }
    let decreasing = points.windows(2).all(|w| w[1].median < w[0].median);
    Ok(FllnReport {
        config: config.clone(),
        slope,
        points,
        decreasing,
    })
}

// ---------------------------------------------------------------- dominance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominanceConfig {
    /// The model expected to be stochastically larger.
    pub model_a: NetworkModel,
    pub model_b: NetworkModel,
    #[serde(default = "default_dominance_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_dominance_reps")]
    pub reps: usize,
}

fn default_dominance_times() -> Vec<f64> {
    vec![1.0, 2.0, 5.0]
}
fn default_dominance_reps() -> usize {
    5000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    N,
    Q,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceEntry {
    pub time: f64,
    pub quantity: Quantity,
    pub coordinate: usize,
    /// max_x (F_A(x) - F_B(x)), floored at 0
    pub max_violation: f64,
    pub band: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub config: DominanceConfig,
    pub thresholds: Thresholds,
    pub entries: Vec<DominanceEntry>,
    pub pass: bool,
}

const MAX_EVAL_POINTS: usize = 256;

fn cdf_gap(a: &[f64], b: &[f64], points: &[f64]) -> Vec<f64> {
    points.iter().map(|x| stats::ecdf(a, *x) - stats::ecdf(b, *x)).collect()
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

/// Largest excess of F_A over F_B and its bootstrap band under equality.
pub fn dominance_statistic(a: &[f64], b: &[f64], resamples: usize, quantile: f64, rng: &mut SimRng) -> (f64, f64) {
    let a = sorted(a.to_vec());
    let b = sorted(b.to_vec());
    let mut pooled = sorted(a.iter().chain(&b).cloned().collect());
    pooled.dedup();
    let points: Vec<f64> = if pooled.len() <= MAX_EVAL_POINTS {
        pooled
    } else {
        let mut p: Vec<f64> = (0..MAX_EVAL_POINTS)
            .map(|k| stats::quantile(&pooled, k as f64 / (MAX_EVAL_POINTS - 1) as f64))
            .collect();
        p.dedup();
        p
    };
    let gap = cdf_gap(&a, &b, &points);
    let violation = gap.iter().cloned().fold(0.0, f64::max);
    let sups: Vec<f64> = (0..resamples)
        .map(|_| {
            let ra = sorted(stats::resample(&a, rng));
            let rb = sorted(stats::resample(&b, rng));
            cdf_gap(&ra, &rb, &points)
                .iter()
                .zip(&gap)
                .map(|(g, g0)| g - g0)
                .fold(0.0, f64::max)
        })
        .collect();
    let band = if sups.is_empty() { 0.0 } else { stats::quantile(&sups, quantile) };
    (violation, band)
}

/// Check F_A <= F_B for N, Q and Lambda at every configured time.
pub fn dominance_check(config: &DominanceConfig, key: StreamKey) -> Result<DominanceReport> {
    if config.model_a.d != config.model_b.d {
        return Err(ExperimentError::InvalidArgument("models must share the dimension".into()));
    }
    let th = THRESHOLDS;
    let sa = sample_snapshots(&config.model_a, &config.times, config.reps, key.named("model_a"))?;
    let sb = sample_snapshots(&config.model_b, &config.times, config.reps, key.named("model_b"))?;
    let mut rng = key.named("bootstrap").rng();
    let mut entries = Vec::new();
    for (ti, &time) in config.times.iter().enumerate() {
        for quantity in [Quantity::N, Quantity::Q, Quantity::Lambda] {
            for coordinate in 0..config.model_a.d {
                let pick = |s: &Vec<Vec<Snapshot>>| -> Vec<f64> {
                    s.iter()
                        .map(|rep| {
                            let snap = &rep[ti];
                            match quantity {
                                Quantity::N => snap.n[coordinate] as f64,
                                Quantity::Q => snap.q[coordinate] as f64,
                                Quantity::Lambda => snap.lambda[coordinate],
                            }
                        })
                        .collect()
                };
                let (max_violation, band) = dominance_statistic(
                    &pick(&sa),
                    &pick(&sb),
                    th.bootstrap_resamples,
                    th.dominance_band_quantile,
                    &mut rng,
                );
                entries.push(DominanceEntry {
                    time,
                    quantity,
                    coordinate,
                    max_violation,
                    band,
                    pass: max_violation <= band,
                });
            }
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(DominanceReport {
        config: config.clone(),
        thresholds: th,
        entries,
        pass,
    })
}

// ---------------------------------------------------------------- stationarity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarityConfig {
    pub model: NetworkModel,
    #[serde(default = "default_stationarity_time")]
    pub time: f64,
    #[serde(default = "default_stationarity_reps")]
    pub reps: usize,
}

fn default_stationarity_time() -> f64 {
    100.0
}
fn default_stationarity_reps() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
}

impl SampleSummary {
    fn of(xs: &[f64]) -> Self {
        let (mean, se) = stats::mean_se(xs);
        SampleSummary {
            mean,
            se,
            variance: stats::sample_variance(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub config: StationarityConfig,
    pub thresholds: Thresholds,
    /// Heuristic relaxation time burn_in_factor / (r - b1).
    pub burn_in: f64,
    pub stationary_mean: (f64, f64),
    pub hawkes_q: SampleSummary,
    pub delayed_q: SampleSummary,
    pub hawkes_lambda: SampleSummary,
    pub delayed_lambda: SampleSummary,
    pub ks_q: KsResult,
    pub ks_lambda: KsResult,
    pub pass: bool,
}

/// Markovian (r, b1) of a univariate model, ignoring its mode.
fn markov_rates(model: &NetworkModel) -> Result<(f64, f64)> {
    univariate(model)?;
    let p = MarkovianParams::from_model(&model.with_mode(ExcitationMode::Delayed), 1)?;
    Ok((p.r[0], p.mark_moments[0][0][1]))
}

/// Compare the laws of (Q(t), Lambda(t)) under hawkes and delayed modes.
pub fn stationarity_equality_check(config: &StationarityConfig, key: StreamKey) -> Result<StationarityReport> {
    let (r, b1) = markov_rates(&config.model)?;
    if b1 >= r {
        return Err(ExperimentError::AssumptionViolated(format!("b1 / r = {} >= 1", b1 / r)));
    }
    let th = THRESHOLDS;
    let times = [config.time];
    let run = |mode: ExcitationMode, name: &str| -> Result<(Vec<f64>, Vec<f64>)> {
        let snaps = sample_snapshots(&config.model.with_mode(mode), &times, config.reps, key.named(name))?;
        Ok((
            snaps.iter().map(|s| s[0].q[0] as f64).collect(),
            snaps.iter().map(|s| s[0].lambda[0]).collect(),
        ))
    };
    let (hq, hl) = run(ExcitationMode::Hawkes, "hawkes")?;
    let (dq, dl) = run(ExcitationMode::Delayed, "delayed")?;
    let ks_q = ks_two_sample(&hq, &dq);
    let ks_lambda = ks_two_sample(&hl, &dl);
    let lam = r * config.model.lambda0[0] / (r - b1);
    Ok(StationarityReport {
        config: config.clone(),
        thresholds: th,
        burn_in: th.burn_in_factor / (r - b1),
        stationary_mean: (lam / config.model.mu[0], lam),
        hawkes_q: SampleSummary::of(&hq),
        delayed_q: SampleSummary::of(&dq),
        hawkes_lambda: SampleSummary::of(&hl),
        delayed_lambda: SampleSummary::of(&dl),
        ks_q,
        ks_lambda,
        pass: ks_q.p_value > th.min_p_value && ks_lambda.p_value > th.min_p_value,
    })
}

// ---------------------------------------------------------------- heavy traffic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTrafficConfig {
    #[serde(default = "one")]
    pub lambda0: f64,
    #[serde(default = "unit_mark")]
    pub mark: MarkDistribution,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_stationarity_reps")]
    pub reps: usize,
    /// Observation time is burn_in_factor / (r - b1) unless overridden.
    #[serde(default)]
    pub time: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn unit_mark() -> MarkDistribution {
    MarkDistribution::Deterministic { value: 1.0 }
}
fn default_rhos() -> Vec<f64> {
    vec![0.8, 0.9, 0.95]
}

impl Default for HeavyTrafficConfig {
    fn default() -> Self {
        HeavyTrafficConfig {
            lambda0: 1.0,
            mark: unit_mark(),
            mu: 1.0,
            rhos: default_rhos(),
            reps: default_stationarity_reps(),
            time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTrafficPoint {
    pub rho: f64,
    pub r: f64,
    pub time: f64,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub ks: KsResult,
    pub mean: SampleSummary,
    pub variance: f64,
    pub variance_se: f64,
    pub target_mean: f64,
    pub target_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTrafficReport {
    pub config: HeavyTrafficConfig,
    pub thresholds: Thresholds,
    pub points: Vec<HeavyTrafficPoint>,
    /// KS distances strictly decrease along the rho ladder.
    pub decreasing: bool,
}

/// Fit (1 - rho) Lambda(t) against Gamma(2 r lambda0 / b2, 2 r / b2) along a rho ladder.
pub fn heavy_traffic_run(config: &HeavyTrafficConfig, key: StreamKey) -> Result<HeavyTrafficReport> {
    let th = THRESHOLDS;
    let b1 = config.mark.mean();
    let b2 = config.mark.second_moment();
    if !b2.is_finite() {
        return Err(ExperimentError::AssumptionViolated("marks need a finite second moment".into()));
    }
    let mut points = Vec::new();
    for (i, &rho) in config.rhos.iter().enumerate() {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ExperimentError::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
        }
        let r = b1 / rho;
        let model = NetworkModel::markovian(config.lambda0, r, config.mark.clone(), config.mu, ExcitationMode::Delayed);
        let time = config.time.unwrap_or(th.burn_in_factor / (r - b1));
        let snaps = sample_snapshots(&model, &[time], config.reps, key.named("heavy_traffic").child(i as u64))?;
        let xs: Vec<f64> = snaps.iter().map(|s| (1.0 - rho) * s[0].lambda[0]).collect();
        let shape = 2.0 * r * config.lambda0 / b2;
        let rate = 2.0 * r / b2;
        let law = Gamma::new(shape, rate).map_err(|e| ExperimentError::InvalidArgument(e.to_string()))?;
        points.push(HeavyTrafficPoint {
            rho,
            r,
            time,
            gamma_shape: shape,
            gamma_rate: rate,
            ks: ks_one_sample(&xs, |x| law.cdf(x)),
            mean: SampleSummary::of(&xs),
            variance: stats::sample_variance(&xs),
            variance_se: stats::variance_se(&xs),
            target_mean: shape / rate,
            target_variance: shape / (rate * rate),
        });
    }
    let decreasing = points.windows(2).all(|w| w[1].ks.statistic < w[0].ks.statistic);
    Ok(HeavyTrafficReport {
        config: config.clone(),
        thresholds: th,
        points,
        decreasing,
    })
}

// ---------------------------------------------------------------- tails

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillReport {
    pub n: usize,
    pub k: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

const MIN_TAIL_SAMPLES: usize = 1000;

/// Hill estimate over the top k = k_fraction * n order statistics with a percentile bootstrap interval.
pub fn tail_index_estimate(samples: &[f64], k_fraction: f64, key: StreamKey) -> Result<HillReport> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(ExperimentError::InsufficientSamples {
            found: samples.len(),
            required: MIN_TAIL_SAMPLES,
        });
    }
    if !(k_fraction > 0.0 && k_fraction <= 0.2) {
        return Err(ExperimentError::InvalidArgument(format!("k fraction must lie in (0, 0.2], got {k_fraction}")));
    }
    let positive: Vec<f64> = samples.iter().cloned().filter(|x| *x > 0.0).collect();
    let k = ((k_fraction * samples.len() as f64).round() as usize).max(1);
    if positive.len() <= k {
        return Err(ExperimentError::InsufficientSamples {
            found: positive.len(),
            required: k + 1,
        });
    }
    let th = THRESHOLDS;
    let estimate = stats::hill_estimator(&positive, k);
    let boots: Vec<f64> = replicate(th.bootstrap_resamples, key.named("hill"), |kk| {
        let mut rng = SimRng::from_rng(&mut kk.rng());
        stats::hill_estimator(&stats::resample(&positive, &mut rng), k)
    });
    let tail = 0.5 * (1.0 - th.hill_confidence);
    Ok(HillReport {
        n: samples.len(),
        k,
        estimate,
        ci_low: stats::quantile(&boots, tail),
        ci_high: stats::quantile(&boots, 1.0 - tail),
        confidence: th.hill_confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub model: NetworkModel,
    #[serde(default = "default_tail_time")]
    pub time: f64,
    #[serde(default = "default_tail_reps")]
    pub reps: usize,
    #[serde(default = "default_k_fraction")]
    pub k_fraction: f64,
}

fn default_tail_time() -> f64 {
    20.0
}
fn default_tail_reps() -> usize {
    100_000
}
fn default_k_fraction() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub config: TailConfig,
    /// Pareto index of the marks, the index the queue should inherit.
    pub target: Option<f64>,
    pub hill: HillReport,
    pub ci_width: f64,
    pub contains_target: bool,
    /// Point estimates (k, alpha_hat) on a log grid of k, for judging stability.
    pub hill_plot: Vec<(usize, f64)>,
}

/// Estimate the tail index of Q(t) and compare it with the Pareto mark index.
pub fn tail_propagation_run(config: &TailConfig, key: StreamKey) -> Result<TailReport> {
    univariate(&config.model)?;
    let snaps = sample_snapshots(&config.model, &[config.time], config.reps, key.named("tail"))?;
    // Q is integer valued; uniform jitter breaks ties at the threshold and
    // leaves the tail index unchanged.
    let mut rng = key.named("tail_jitter").rng();
    let qs: Vec<f64> = snaps.iter().map(|s| s[0].q[0] as f64 + rng.random::<f64>()).collect();
    let hill_plot = [10usize, 30, 100, 300, 1000, 3000, 10_000]
        .into_iter()
        .filter(|&k| k < qs.len() / 5)
        .map(|k| (k, stats::hill_estimator(&qs, k)))
        .collect();
    let hill = tail_index_estimate(&qs, config.k_fraction, key.named("tail_bootstrap"))?;
    let target = match config.model.marks[0][0] {
        MarkDistribution::Pareto { alpha, .. } => Some(alpha),
        _ => None,
    };
    let contains_target = target.is_some_and(|a| hill.ci_low <= a && a <= hill.ci_high);
    Ok(TailReport {
        config: config.clone(),
        target,
        ci_width: hill.ci_high - hill.ci_low,
        hill,
        contains_target,
        hill_plot,
    })
}

/// Default FCLT model: lambda0 = 1, h(t) = 0.5 e^{-t}, unit marks, Exp(1) services, delayed.
pub fn reference_fclt_model() -> NetworkModel {
    NetworkModel::univariate(
        1.0,
        Kernel::exponential(1.0, 0.5),
        MarkDistribution::Deterministic { value: 1.0 },
        ServiceDistribution::Exponential { rate: 1.0 },
        ExcitationMode::Delayed,
    )
}
