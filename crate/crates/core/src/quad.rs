//! Quadrature helpers: Gauss-Legendre, adaptive Simpson, trapezoid.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Cached 32-point rule.
pub fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// 32-point Gauss-Legendre integral of `f` over [a, b].
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let (x, w) = gl32();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson for vector-valued integrands (max-norm error control).
pub fn adaptive_simpson_vec<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Vec<f64> {
    let fa = f(a);
    if a == b {
        return vec![0.0; fa.len()];
    }
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson_vec(b - a, &fa, &fm, &fb);
    simpson_vec_rec(&mut f, a, b, &fa, &fm, &fb, whole, tol, 40)
}

fn simpson_vec(h: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((a, m), b)| h / 6.0 * (a + 4.0 * m + b))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn simpson_vec_rec<F: FnMut(f64) -> Vec<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
) -> Vec<f64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson_vec(m - a, fa, &flm, fm);
    let right = simpson_vec(b - m, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(&whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        return left
            .iter()
            .zip(&right)
            .zip(&whole)
            .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
            .collect();
    }
    let mut lo = simpson_vec_rec(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1);
    let hi = simpson_vec_rec(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1);
    for (l, h) in lo.iter_mut().zip(hi) {
        *l += h;
    }
    lo
}

/// Composite trapezoid over uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Linear interpolation of uniformly spaced samples starting at 0; clamps at the ends.
pub fn interp_uniform(values: &[f64], step: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return values[0];
    }
    let pos = x / step;
    let k = pos.floor() as usize;
    if k + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let frac = pos - k as f64;
    values[k] + frac * (values[k + 1] - values[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_for_polynomials() {
        let v = gl_integrate(|x| x.powi(20) + 3.0 * x, 0.0, 2.0);
        let exact = 2f64.powi(21) / 21.0 + 6.0;
        assert!((v - exact).abs() < 1e-9 * exact);
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!((x[2]).abs() < 1e-15);
    }

    #[test]
    fn simpson_smooth() {
        let v = adaptive_simpson(|x: f64| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((v - (1.0 - (-30f64).exp())).abs() < 1e-10);
        let w = adaptive_simpson_vec(|x| vec![x.sin(), x.cos()], 0.0, 1.0, 1e-12);
        assert!((w[0] - (1.0 - 1f64.cos())).abs() < 1e-10);
        assert!((w[1] - 1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_and_interp() {
        let v: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        assert!((trapezoid(&v, 0.1) - 0.5).abs() < 1e-14);
        assert!((interp_uniform(&v, 0.1, 0.55) - 0.55).abs() < 1e-14);
        assert_eq!(interp_uniform(&v, 0.1, 5.0), 1.0);
    }
}
