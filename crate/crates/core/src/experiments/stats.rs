//! Statistical utilities: KS tests, chi-square homogeneity, total variation,
//! bootstrap and the Hill estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, (sample_variance(xs) / n).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Standard error of the sample variance (fourth central moment formula).
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Kolmogorov survival function Q_KS(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: ks_p(d, n),
    }
}

/// Two-sample KS test. Ties are handled by comparing the empirical CDFs after
/// each distinct value, which keeps the test conservative for discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p(d, na * nb / (na + nb)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square homogeneity test for integer samples from several groups.
///
/// Values are binned by identity; adjacent bins are merged from the right
/// tail until every pooled bin has expected count at least 5 in each group.
pub fn chi_square_homogeneity(groups: &[Vec<u64>]) -> ChiSquareResult {
    let max = groups.iter().flatten().cloned().max().unwrap_or(0) as usize;
    let mut table: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mut c = vec![0.0; max + 1];
            for &v in g {
                c[v as usize] += 1.0;
            }
            c
        })
        .collect();
    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let total: f64 = sizes.iter().sum();
    let min_size = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
    // pool bins left to right until the column total is large enough
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); groups.len()];
    let mut acc = vec![0.0; groups.len()];
    for v in 0..=max {
        for (a, row) in acc.iter_mut().zip(&table) {
            *a += row[v];
        }
        let col: f64 = acc.iter().sum();
        if col * min_size / total >= 5.0 {
            for (p, a) in pooled.iter_mut().zip(acc.iter_mut()) {
                p.push(*a);
                *a = 0.0;
            }
        }
    }
    if acc.iter().sum::<f64>() > 0.0 {
        if pooled[0].is_empty() {
            for (p, a) in pooled.iter_mut().zip(&acc) {
                p.push(*a);
            }
        } else {
            for (p, a) in pooled.iter_mut().zip(&acc) {
                *p.last_mut().unwrap() += a;
            }
        }
    }
    table.clear();
    let bins = pooled[0].len();
    let mut stat = 0.0;
    for b in 0..bins {
        let col: f64 = pooled.iter().map(|p| p[b]).sum();
        for (p, n) in pooled.iter().zip(&sizes) {
            let expected = col * n / total;
            if expected > 0.0 {
                stat += (p[b] - expected).powi(2) / expected;
            }
        }
    }
    let dof = (bins.saturating_sub(1)) * (groups.len().saturating_sub(1));
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat)
    };
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
    }
}

/// Total variation distance between two pmfs on a common index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Empirical CDF of `sorted` evaluated at x.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Hill estimate of the tail index from the top k order statistics.
pub fn hill_estimator(samples: &[f64], k: usize) -> f64 {
    let mut xs: Vec<f64> = samples.iter().cloned().filter(|x| *x > 0.0).collect();
    xs.sort_by(|a, b| b.total_cmp(a));
    let k = k.min(xs.len().saturating_sub(1));
    if k == 0 {
        return f64::NAN;
    }
    let threshold = xs[k].ln();
    let mean_excess = xs[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    1.0 / mean_excess
}

/// Resample with replacement.
pub fn resample<R: Rng + ?Sized>(xs: &[f64], rng: &mut R) -> Vec<f64> {
    (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect()
}

/// Empirical quantile (type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand_distr::{Distribution, Exp, Poisson};

    #[test]
    fn kolmogorov_values() {
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 5e-4);
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = StreamKey::new(5).rng();
        let e = Exp::new(1.0).unwrap();
        let a: Vec<f64> = (0..2000).map(|_| e.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..2000).map(|_| e.sample(&mut rng)).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.001);
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        assert!(ks_one_sample(&a, |x| 1.0 - (-x).exp()).p_value > 0.001);
    }

    #[test]
    fn chi_square_same_law() {
        let mut rng = StreamKey::new(6).rng();
        let p = Poisson::new(3.0).unwrap();
        let g: Vec<Vec<u64>> = (0..3).map(|_| (0..3000).map(|_| p.sample(&mut rng) as u64).collect()).collect();
        let res = chi_square_homogeneity(&g);
        assert!(res.p_value > 0.001 && res.dof > 10);
    }

    #[test]
    fn hill_on_pareto() {
        let mut rng = StreamKey::new(7).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.5)).collect();
        let est = hill_estimator(&xs, 2000);
        assert!((1.3..1.7).contains(&est), "{est}");
    }

    #[test]
    fn small_helpers() {
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0]), 0.5);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 2.0), 2.0 / 3.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
