use serde::{Deserialize, Serialize};

use super::{Kernel, MarkDistribution, ModelError, Result, ServiceDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationMode {
    /// Excitation B h(t - s) starts at the arrival epoch s.
    Hawkes,
    /// Excitation B h(t - s - J) starts once the particle leaves.
    Delayed,
    /// Excitation B h(t - s) lasts only while the particle is present.
    Ephemeral,
}

/// How departures are generated by the thinning engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceSemantics {
    /// Departures at rate mu_j Q_j and reroutes at rate mu_ij Q_j (memoryless).
    Rate,
    /// Service drawn from `services` at arrival; departure epoch scheduled.
    Scheduled,
}

/// Nondecreasing Lipschitz map from accumulated excitation to intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RateMap {
    /// base + slope x
    Affine { base: f64, slope: f64 },
    /// min(base + slope x, cap)
    Clamped { base: f64, slope: f64, cap: f64 },
    /// base + min(x, cap)
    CappedExcitation { base: f64, cap: f64 },
    /// constant value, ignores excitation
    Constant { value: f64 },
}

impl RateMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            RateMap::Affine { base, slope } => base + slope * x,
            RateMap::Clamped { base, slope, cap } => (base + slope * x).min(*cap),
            RateMap::CappedExcitation { base, cap } => base + x.min(*cap),
            RateMap::Constant { value } => *value,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            RateMap::Affine { slope, .. } | RateMap::Clamped { slope, .. } => *slope,
            RateMap::CappedExcitation { .. } => 1.0,
            RateMap::Constant { .. } => 0.0,
        }
    }

    fn validate(&self, i: usize) -> Result<()> {
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let ok = match self {
            RateMap::Affine { base, slope } => nonneg(*base) && nonneg(*slope),
            RateMap::Clamped { base, slope, cap } => nonneg(*base) && nonneg(*slope) && nonneg(*cap),
            RateMap::CappedExcitation { base, cap } => nonneg(*base) && cap.is_finite() && *cap >= 0.0,
            RateMap::Constant { value } => nonneg(*value),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidRateMap(
                i,
                "parameters must be finite and nonnegative".into(),
            ))
        }
    }
}

/// Full parameterisation of a d-dimensional network.
///
/// Matrix fields are indexed `[target][source]`: `kernels[i][j]` is h_ij, the
/// effect of an event in coordinate j on the intensity of coordinate i, and
/// `mu_route[i][j]` is the rate at which a particle in j is rerouted to i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub d: usize,
    pub lambda0: Vec<f64>,
    pub kernels: Vec<Vec<Kernel>>,
    pub marks: Vec<Vec<MarkDistribution>>,
    pub services: Vec<ServiceDistribution>,
    pub mu: Vec<f64>,
    pub mu_route: Vec<Vec<f64>>,
    pub mode: ExcitationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<RateMap>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_semantics: Option<ServiceSemantics>,
}

impl NetworkModel {
    /// Univariate model with departure rate taken from an exponential service law.
    pub fn univariate(
        lambda0: f64,
        kernel: Kernel,
        mark: MarkDistribution,
        service: ServiceDistribution,
        mode: ExcitationMode,
    ) -> Self {
        let mu = match service {
            ServiceDistribution::Exponential { rate } => rate,
            _ => 0.0,
        };
        NetworkModel {
            d: 1,
            lambda0: vec![lambda0],
            kernels: vec![vec![kernel]],
            marks: vec![vec![mark]],
            services: vec![service],
            mu: vec![mu],
            mu_route: vec![vec![0.0]],
            mode,
            phi: None,
            service_semantics: None,
        }
    }

    /// Markovian univariate model: h(t) = exp(-r t), marks B, services Exp(mu).
    pub fn markovian(lambda0: f64, r: f64, mark: MarkDistribution, mu: f64, mode: ExcitationMode) -> Self {
        Self::univariate(
            lambda0,
            Kernel::exponential(r, 1.0),
            mark,
            ServiceDistribution::Exponential { rate: mu },
            mode,
        )
    }

    pub fn with_mode(&self, mode: ExcitationMode) -> Self {
        NetworkModel {
            mode,
            ..self.clone()
        }
    }

    /// Effective service semantics: explicit flag, else `rate` when every
    /// service law is exponential and `scheduled` otherwise.
    pub fn semantics(&self) -> ServiceSemantics {
        self.service_semantics.unwrap_or_else(|| {
            if self
                .services
                .iter()
                .all(|s| matches!(s, ServiceDistribution::Exponential { .. }))
            {
                ServiceSemantics::Rate
            } else {
                ServiceSemantics::Scheduled
            }
        })
    }

    pub fn has_routing(&self) -> bool {
        self.mu_route.iter().flatten().any(|r| *r > 0.0)
    }

    pub fn is_linear(&self) -> bool {
        self.phi.is_none()
    }

    /// Lipschitz constant L_i of the rate map of coordinate i (1 when linear).
    pub fn lipschitz(&self, i: usize) -> f64 {
        self.phi.as_ref().map_or(1.0, |p| p[i].lipschitz())
    }

    /// Intensity of coordinate i given the accumulated excitation x.
    pub fn rate(&self, i: usize, x: f64) -> f64 {
        match &self.phi {
            Some(p) => p[i].apply(x),
            None => self.lambda0[i] + x,
        }
    }

    /// Branching matrix with entries L_i E[B_ij] ||h_ij||_1.
    pub fn branching_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|i| {
                (0..self.d)
                    .map(|j| {
                        if self.kernels[i][j].is_zero() {
                            0.0
                        } else {
                            self.lipschitz(i) * self.marks[i][j].mean() * self.kernels[i][j].l1_norm()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub spectral_radius: f64,
    pub stable: bool,
}

/// Perron root of the branching matrix by power iteration.
///
/// Iterates on H + I (same Perron vector, primitive even when H is periodic)
/// and stops once the Collatz-Wielandt bounds agree to 1e-12.
pub fn stability_check(model: &NetworkModel) -> Result<Stability> {
    validate_network(model)?;
    let h = model.branching_matrix();
    let radius = perron_root(&h, 1e-12, 10_000);
    Ok(Stability {
        spectral_radius: radius,
        stable: radius < 1.0,
    })
}

pub(crate) fn perron_root(h: &[Vec<f64>], tol: f64, max_iter: usize) -> f64 {
    let d = h.len();
    let mut x = vec![1.0; d];
    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        let y: Vec<f64> = (0..d)
            .map(|i| x[i] + (0..d).map(|j| h[i][j] * x[j]).sum::<f64>())
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..d {
            if x[i] > 1e-200 {
                lo = lo.min(y[i] / x[i]);
                hi = hi.max(y[i] / x[i]);
            }
        }
        // x is normalised to unit max-norm, so max(y) estimates the root of H + I
        let norm = y.iter().cloned().fold(0.0, f64::max);
        let previous = estimate;
        estimate = norm;
        x = y.iter().map(|v| v / norm).collect();
        if hi - lo <= tol * hi.max(1.0) || (estimate - previous).abs() <= tol * estimate.max(1.0) {
            break;
        }
    }
    (estimate - 1.0).max(0.0)
}

fn check_len(field: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            field,
            expected,
            found,
        })
    }
}

fn nonneg(field: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(ModelError::InvalidParameter {
            field,
            reason: format!("{v} is not a finite nonnegative number"),
        }),
        None => Ok(()),
    }
}

/// Check dimensions, parameter ranges and departure reachability.
pub fn validate_network(model: &NetworkModel) -> Result<()> {
    let d = model.d;
    if d == 0 {
        return Err(ModelError::InvalidParameter {
            field: "d",
            reason: "dimension must be positive".into(),
        });
    }
    check_len("lambda0", d, model.lambda0.len())?;
    check_len("kernels", d, model.kernels.len())?;
    check_len("marks", d, model.marks.len())?;
    check_len("services", d, model.services.len())?;
    check_len("mu", d, model.mu.len())?;
    check_len("mu_route", d, model.mu_route.len())?;
    for i in 0..d {
        check_len("kernels", d, model.kernels[i].len())?;
        check_len("marks", d, model.marks[i].len())?;
        check_len("mu_route", d, model.mu_route[i].len())?;
    }
    nonneg("lambda0", &model.lambda0)?;
    nonneg("mu", &model.mu)?;
    for row in &model.mu_route {
        nonneg("mu_route", row)?;
    }
    if (0..d).any(|i| model.mu_route[i][i] != 0.0) {
        return Err(ModelError::InvalidParameter {
            field: "mu_route",
            reason: "diagonal rerouting rates must be zero".into(),
        });
    }
    for row in &model.kernels {
        for k in row {
            k.validate()?;
        }
    }
    for row in &model.marks {
        for m in row {
            m.validate()?;
        }
    }
    for s in &model.services {
        s.validate()?;
    }
    if let Some(phi) = &model.phi {
        check_len("phi", d, phi.len())?;
        for (i, p) in phi.iter().enumerate() {
            p.validate(i)?;
        }
    }
    match model.semantics() {
        ServiceSemantics::Rate => {
            // coordinates that can eventually exit, grown backwards along routes
            let mut exits: Vec<bool> = model.mu.iter().map(|m| *m > 0.0).collect();
            loop {
                let mut changed = false;
                for j in 0..d {
                    if !exits[j] && (0..d).any(|i| exits[i] && model.mu_route[i][j] > 0.0) {
                        exits[j] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            if let Some(j) = exits.iter().position(|e| !e) {
                return Err(ModelError::UnreachableDeparture(j));
            }
            if !model.has_routing() {
                for j in 0..d {
                    if let ServiceDistribution::Exponential { rate } = model.services[j] {
                        if (rate - model.mu[j]).abs() > 1e-12 * rate.max(1.0) {
                            return Err(ModelError::InvalidParameter {
                                field: "services",
                                reason: format!(
                                    "coordinate {j}: exponential service rate {rate} differs from mu {}",
                                    model.mu[j]
                                ),
                            });
                        }
                    }
                }
            }
        }
        ServiceSemantics::Scheduled => {
            if model.has_routing() {
                return Err(ModelError::InvalidParameter {
                    field: "mu_route",
                    reason: "rerouting requires rate service semantics".into(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_dim(mu: [f64; 2], route_2_from_1: f64, entry: f64) -> NetworkModel {
        let k = Kernel::exponential(1.0, entry);
        let m = MarkDistribution::Deterministic { value: 1.0 };
        let s = ServiceDistribution::Exponential { rate: 1.0 };
        NetworkModel {
            d: 2,
            lambda0: vec![1.0, 1.0],
            kernels: vec![vec![k.clone(), k.clone()], vec![k.clone(), k]],
            marks: vec![vec![m.clone(), m.clone()], vec![m.clone(), m]],
            services: vec![s.clone(), s],
            mu: mu.to_vec(),
            mu_route: vec![vec![0.0, 0.0], vec![route_2_from_1, 0.0]],
            mode: ExcitationMode::Delayed,
            phi: None,
            service_semantics: None,
        }
    }

    #[test]
    fn stability_examples() {
        let m = NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed);
        let s = stability_check(&m).unwrap();
        assert!((s.spectral_radius - 0.5).abs() < 1e-12 && s.stable);

        let mut z = m.clone();
        z.kernels[0][0] = Kernel::Zero;
        assert_eq!(stability_check(&z).unwrap().spectral_radius, 0.0);

        let sym = two_dim([1.0, 1.0], 0.0, 0.6);
        let s = stability_check(&sym).unwrap();
        assert!((s.spectral_radius - 1.2).abs() < 1e-10 && !s.stable);
    }

    #[test]
    fn periodic_matrix_converges() {
        let r = perron_root(&[vec![0.0, 0.9], vec![0.9, 0.0]], 1e-12, 10_000);
        assert!((r - 0.9).abs() < 1e-10);
        let r = perron_root(&[vec![0.5, 0.0], vec![0.3, 0.2]], 1e-12, 10_000);
        assert!((r - 0.5).abs() < 1e-10);
        let r = perron_root(&[vec![0.2, 0.0], vec![0.0, 0.5]], 1e-12, 10_000);
        assert!((r - 0.5).abs() < 1e-10);
    }

    #[test]
    fn reachability_examples() {
        let m = NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed);
        assert!(validate_network(&m).is_ok());
        let mut relay = two_dim([0.0, 1.0], 1.0, 0.1);
        assert!(validate_network(&relay).is_ok());
        relay.mu = vec![0.0, 0.0];
        assert_eq!(validate_network(&relay), Err(ModelError::UnreachableDeparture(0)));
        let stuck = two_dim([0.0, 0.0], 0.0, 0.1);
        assert_eq!(validate_network(&stuck), Err(ModelError::UnreachableDeparture(0)));
    }

    #[test]
    fn rate_maps() {
        let c = RateMap::Clamped { base: 1.0, slope: 1.0, cap: 10.0 };
        assert_eq!(c.apply(1e9), 10.0);
        assert_eq!(RateMap::CappedExcitation { base: 1.0, cap: 2.0 }.apply(5.0), 3.0);
        assert_eq!(RateMap::Constant { value: 4.0 }.lipschitz(), 0.0);
    }
}
