//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Statistical criteria are reported, not asserted, so that an honest
//! failure is visible without breaking the build. Set
//! HAWKESLAB_ACCEPTANCE_STRICT=1 to turn any FAIL into a nonzero exit.

use std::time::Instant;

use nalgebra::DMatrix;

use hawkeslab::cluster_stats::{
    borel_pmf, gamma_cluster_pmf, hitting_time_pmf, offspring_pmf, simulated_size_frequencies,
};
use hawkeslab::experiments::stats::{chi_square_homogeneity, ks_two_sample, mean_se, total_variation};
use hawkeslab::experiments::{
    dominance_check, fclt_run, heavy_traffic_run, reference_fclt_model, snapshots, stationarity_equality_check,
    tail_propagation_run, DominanceConfig, FcltConfig, HeavyTrafficConfig, StationarityConfig, TailConfig, THRESHOLDS,
};
use hawkeslab::model::Snapshot;
use hawkeslab::moments::{
    characteristics_transform, lagrange_sylvester_exp, solve_moments_transient, stationary_mean,
    transient_z_univariate, univariate_eigenvalues, univariate_matrix, MomentIndex,
};
use hawkeslab::quad::trapezoid;
use hawkeslab::sim::cluster::{cluster_snapshots, simulate_cluster};
use hawkeslab::sim::replicate;
use hawkeslab::sim::thinning::thinning_snapshots;
use hawkeslab::transform::{fixed_point_transform, volterra_solve_r1, FixedPointOptions, UniformGrid};
use hawkeslab::{ExcitationMode, Kernel, MarkDistribution, NetworkModel, ServiceDistribution, StreamKey};

const SEED: u64 = 20_240_601;

fn reference(mode: ExcitationMode) -> NetworkModel {
    NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, mode)
}

fn sample(model: &NetworkModel, times: &[f64], reps: usize, key: StreamKey) -> Vec<Vec<Snapshot>> {
    replicate(reps, key, |k| snapshots(model, times, k).expect("simulation"))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn falling(q: u64, k: u32) -> f64 {
    (0..k).map(|i| q as f64 - f64::from(i)).product()
}

fn c1() -> Outcome {
    let start = Instant::now();
    let m = reference(ExcitationMode::Delayed);
    let snaps = sample(&m, &[100.0], 10_000, StreamKey::new(SEED).named("c1"));
    let q: Vec<f64> = snaps.iter().map(|s| s[0].q[0] as f64).collect();
    let l: Vec<f64> = snaps.iter().map(|s| s[0].lambda[0]).collect();
    let (eq, el) = stationary_mean(&m).unwrap();
    let (mq, sq) = mean_se(&q);
    let (ml, sl) = mean_se(&l);
    let k = THRESHOLDS.se_multiplier;
    Outcome {
        pass: within(mq, eq, k * sq) && within(ml, el, k * sl),
        detail: format!(
            "E[Q] {mq:.4} +- {sq:.4} vs {eq}, E[Lambda] {ml:.4} +- {sl:.4} vs {el}, {:.1}s on {} thread(s)",
            start.elapsed().as_secs_f64(),
            rayon::current_num_threads()
        ),
    }
}

fn c2() -> Outcome {
    let m = reference(ExcitationMode::Delayed);
    let reps = 10_000;
    let key = StreamKey::new(SEED).named("c2");
    let a: Vec<f64> = replicate(reps, key.named("cluster"), |k| cluster_snapshots(&m, &[10.0], k).unwrap()[0].q[0] as f64);
    let b: Vec<f64> = replicate(reps, key.named("thinning"), |k| thinning_snapshots(&m, &[10.0], k).unwrap()[0].q[0] as f64);
    let ks = ks_two_sample(&a, &b);
    Outcome {
        pass: ks.p_value > THRESHOLDS.min_p_value,
        detail: format!("KS D = {:.4}, p = {:.3}", ks.statistic, ks.p_value),
    }
}

fn c3() -> Outcome {
    let m = reference(ExcitationMode::Delayed);
    let (t, z, s) = (5.0, 0.5, 0.3);
    let fp = fixed_point_transform(&m, t, &[z], &[s], &FixedPointOptions::default()).unwrap().value;
    let ch = characteristics_transform(&m, t, &[z], &[s]).unwrap();
    let snaps = sample(&m, &[t], 20_000, StreamKey::new(SEED).named("c3"));
    let xs: Vec<f64> = snaps
        .iter()
        .map(|v| z.powi(v[0].q[0] as i32) * (-s * v[0].lambda[0]).exp())
        .collect();
    let (mc, se) = mean_se(&xs);
    let tol = THRESHOLDS.transform_abs.max(THRESHOLDS.se_multiplier * se);
    Outcome {
        pass: within(fp, ch, THRESHOLDS.transform_abs) && within(fp, mc, tol) && within(ch, mc, tol),
        detail: format!("fixed point {fp:.6}, characteristics {ch:.6}, Monte Carlo {mc:.5} +- {se:.5}"),
    }
}

fn c4() -> Outcome {
    let m = reference(ExcitationMode::Delayed);
    let times = [1.0, 5.0, 10.0];
    let table = solve_moments_transient(&m, 3, &times).unwrap();
    let snaps = sample(&m, &times, 40_000, StreamKey::new(SEED).named("c4"));
    let k = THRESHOLDS.se_multiplier;
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    for n in 1..=3u32 {
        for idx in MomentIndex::enumerate(1, n) {
            let exact = table.get(&idx).unwrap();
            for (ti, t) in times.iter().enumerate() {
                let xs: Vec<f64> = snaps
                    .iter()
                    .map(|s| falling(s[ti].q[0], idx.q[0]) * s[ti].lambda[0].powi(idx.g[0] as i32))
                    .collect();
                let (mean, se) = mean_se(&xs);
                let z = (mean - exact[ti]).abs() / se.max(1e-300);
                worst = worst.max(z);
                if z > k {
                    misses.push(format!("{idx}@{t}"));
                }
            }
        }
    }
    let mut closed = 0.0f64;
    for n in 1..=3u32 {
        for (ti, t) in times.iter().enumerate() {
            let z = transient_z_univariate(&m, n, *t).unwrap();
            let rk = &table.orders[n as usize].values;
            for (i, v) in z.iter().enumerate() {
                closed = closed.max((v - rk[i][ti]).abs());
            }
        }
    }
    Outcome {
        pass: misses.is_empty() && closed < THRESHOLDS.moment_closed_form_abs,
        detail: format!(
            "27 simulated moments, worst |z| = {worst:.2}, outside band: {misses:?}; closed form vs RK4 max diff {closed:.2e}"
        ),
    }
}

fn c5() -> Outcome {
    let mut rng = StreamKey::new(SEED).named("c5").rng();
    use rand::Rng;
    let mut eig_err = 0.0f64;
    for _ in 0..50 {
        let mu = rng.random_range(0.2..5.0);
        let r = rng.random_range(0.2..5.0);
        let b1 = rng.random_range(0.05..3.0);
        for n in 1..=8u32 {
            let a = univariate_matrix(n, mu, r, b1);
            let mut dense: Vec<f64> = a.clone().complex_eigenvalues().iter().map(|c| c.re).collect();
            dense.sort_by(|x, y| y.total_cmp(x));
            let formula = univariate_eigenvalues(n, mu, r, b1);
            for (x, y) in dense.iter().zip(&formula) {
                eig_err = eig_err.max((x - y).abs());
            }
        }
    }
    let mut exp_err = 0.0f64;
    let mut semi_err = 0.0f64;
    for n in 1..=4u32 {
        let (mu, r, b1) = (1.0, 2.0, 1.0);
        let a = univariate_matrix(n, mu, r, b1);
        let e = univariate_eigenvalues(n, mu, r, b1);
        let ls = lagrange_sylvester_exp(&a, &e, 1.0).unwrap();
        let oracle: DMatrix<f64> = a.clone().exp();
        exp_err = exp_err.max((&ls - &oracle).abs().max());
        let prod = lagrange_sylvester_exp(&a, &e, 0.7).unwrap() * lagrange_sylvester_exp(&a, &e, 0.3).unwrap();
        semi_err = semi_err.max((prod - ls).abs().max());
    }
    Outcome {
        pass: eig_err < THRESHOLDS.eigen_abs && exp_err < THRESHOLDS.expm_abs && semi_err < THRESHOLDS.semigroup_abs,
        detail: format!("eigenvalues {eig_err:.2e}, expm vs scaling-squaring {exp_err:.2e}, semigroup {semi_err:.2e}"),
    }
}

fn sizes(model: &NetworkModel, reps: usize, key: StreamKey) -> Vec<u64> {
    replicate(reps, key, |k| {
        let mut rng = k.rng();
        simulate_cluster(model, 0, 0.0, f64::INFINITY, &mut rng, 1_000_000).unwrap().size() as u64
    })
}

fn c6() -> Outcome {
    // convolution oracle against both closed forms
    let mut oracle_err = 0.0f64;
    let mut rng = StreamKey::new(SEED).named("c6_params").rng();
    use rand::Rng;
    for _ in 0..20 {
        let rho: f64 = rng.random_range(0.05..0.95);
        let alpha: f64 = rng.random_range(0.3..3.0);
        let c: f64 = rng.random_range(0.5..4.0);
        let varrho: f64 = rng.random_range(0.0..0.95) * c / alpha;
        let poisson = |k: usize| (-rho + k as f64 * rho.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();
        let p = c / (c + varrho);
        let nb = |k: usize| {
            let kf = k as f64;
            use statrs::function::gamma::ln_gamma;
            (ln_gamma(alpha + kf) - ln_gamma(alpha) - ln_gamma(kf + 1.0) + alpha * p.ln() + kf * (1.0 - p).ln()).exp()
        };
        for n in 1..=50 {
            oracle_err = oracle_err.max((hitting_time_pmf(poisson, n, None).unwrap() - borel_pmf(n, rho).unwrap()).abs());
            oracle_err = oracle_err
                .max((hitting_time_pmf(nb, n, None).unwrap() - gamma_cluster_pmf(n, alpha, c, varrho).unwrap()).abs());
        }
    }
    // simulated clusters against Borel(0.5)
    let borel_model = NetworkModel::univariate(
        1.0,
        Kernel::exponential(1.0, 0.5),
        MarkDistribution::Deterministic { value: 1.0 },
        ServiceDistribution::Exponential { rate: 1.0 },
        ExcitationMode::Hawkes,
    );
    let n_max = 200;
    let key = StreamKey::new(SEED).named("c6");
    let (freq, over) = simulated_size_frequencies(&borel_model, n_max, 100_000, key.named("borel")).unwrap();
    let exact: Vec<f64> = (1..=n_max).map(|n| borel_pmf(n, 0.5).unwrap()).collect();
    let tv_borel = total_variation(&freq, &exact) + 0.5 * over;
    // the three modes with geometric offspring: marks Exp(1) and ||h|| = 0.5 for hawkes
    // and delayed, a flat kernel 0.5 felt during an Exp(1) service for ephemeral
    let exp_marks = NetworkModel::univariate(
        1.0,
        Kernel::exponential(1.0, 0.5),
        MarkDistribution::Exponential { rate: 1.0 },
        ServiceDistribution::Exponential { rate: 1.0 },
        ExcitationMode::Hawkes,
    );
    let ephemeral = NetworkModel::univariate(
        1.0,
        Kernel::PiecewiseConstant {
            breakpoints: vec![0.0, 60.0],
            values: vec![0.5],
        },
        MarkDistribution::Deterministic { value: 1.0 },
        ServiceDistribution::Exponential { rate: 1.0 },
        ExcitationMode::Ephemeral,
    );
    let groups = vec![
        sizes(&exp_marks, 100_000, key.named("hawkes")),
        sizes(&exp_marks.with_mode(ExcitationMode::Delayed), 100_000, key.named("delayed")),
        sizes(&ephemeral, 100_000, key.named("ephemeral")),
    ];
    let chi = chi_square_homogeneity(&groups);
    let gamma_exact: Vec<f64> = (1..=n_max).map(|n| gamma_cluster_pmf(n, 1.0, 1.0, 0.5).unwrap()).collect();
    let mut tv_modes = 0.0f64;
    for g in &groups {
        let mut f = vec![0.0; n_max];
        let mut over = 0.0;
        for &s in g {
            if (s as usize) <= n_max {
                f[s as usize - 1] += 1.0 / g.len() as f64;
            } else {
                over += 1.0 / g.len() as f64;
            }
        }
        tv_modes = tv_modes.max(total_variation(&f, &gamma_exact) + 0.5 * over);
    }
    let ephemeral_offspring = (0..5).map(|k| offspring_pmf(&ephemeral, k).unwrap()).collect::<Vec<_>>();
    let geometric_gap = ephemeral_offspring
        .iter()
        .enumerate()
        .map(|(k, p)| (p - (2.0 / 3.0) * (1.0f64 / 3.0).powi(k as i32)).abs())
        .fold(0.0, f64::max);
    let th = THRESHOLDS;
    Outcome {
        pass: oracle_err < th.pmf_abs
            && tv_borel < th.max_total_variation
            && tv_modes < th.max_total_variation
            && chi.p_value > th.min_p_value,
        detail: format!(
            "oracle max err {oracle_err:.2e}, TV Borel {tv_borel:.4}, TV modes {tv_modes:.4}, chi-square p {:.3} (dof {}), ephemeral offspring vs geometric {geometric_gap:.1e}",
            chi.p_value, chi.dof
        ),
    }
}

fn c7() -> Outcome {
    let start = Instant::now();
    let key = StreamKey::new(SEED).named("c7");
    let base = FcltConfig {
        model: reference_fclt_model(),
        horizon: 5000.0,
        alpha: 0.0,
        reps: 2000,
        v_grid: hawkeslab::experiments::default_v_grid(),
    };
    let low = fclt_run(&base, key.named("alpha0")).unwrap();
    let half = fclt_run(&FcltConfig { alpha: 0.5, ..base.clone() }, key.named("alpha_half")).unwrap();
    let last = low.points.last().unwrap();
    let var_ok = within(last.variance, low.limit_variance, THRESHOLDS.fclt_variance_rel * low.limit_variance);
    let k = THRESHOLDS.se_multiplier;
    let means_ok = half.points.iter().all(|p| within(p.mean, half.limit_offset, k * p.mean_se));
    let means: Vec<String> = half.points.iter().map(|p| format!("{:.2}", p.mean)).collect();
    Outcome {
        pass: var_ok && means_ok,
        detail: format!(
            "alpha 0: Var at v=1 {:.3} vs {}; alpha 1/2: means {} vs {} (SE {:.3}); {:.1}s",
            last.variance,
            low.limit_variance,
            means.join(" "),
            half.limit_offset,
            half.points.last().unwrap().mean_se,
            start.elapsed().as_secs_f64()
        ),
    }
}

fn c8() -> Outcome {
    let cfg = StationarityConfig {
        model: reference(ExcitationMode::Delayed),
        time: 100.0,
        reps: 10_000,
    };
    let r = stationarity_equality_check(&cfg, StreamKey::new(SEED).named("c8")).unwrap();
    Outcome {
        pass: r.pass,
        detail: format!(
            "KS p(Q) = {:.3}, KS p(Lambda) = {:.3}; hawkes/delayed means Q {:.3}/{:.3}, Lambda {:.3}/{:.3}; variances Q {:.3}/{:.3}, Lambda {:.3}/{:.3}",
            r.ks_q.p_value,
            r.ks_lambda.p_value,
            r.hawkes_q.mean,
            r.delayed_q.mean,
            r.hawkes_lambda.mean,
            r.delayed_lambda.mean,
            r.hawkes_q.variance,
            r.delayed_q.variance,
            r.hawkes_lambda.variance,
            r.delayed_lambda.variance
        ),
    }
}

fn c9() -> Outcome {
    let key = StreamKey::new(SEED).named("c9");
    let base = reference(ExcitationMode::Delayed);
    let mut more_immigrants = base.clone();
    more_immigrants.lambda0[0] = 2.0;
    let mut small_marks = base.clone();
    small_marks.marks[0][0] = MarkDistribution::Deterministic { value: 0.5 };
    let mut small_kernel = base.clone();
    small_kernel.kernels[0][0] = Kernel::exponential(2.0, 0.5);
    let mut fast = base.clone();
    fast.services[0] = ServiceDistribution::Exponential { rate: 2.0 };
    fast.mu[0] = 2.0;
    let pairs = [
        ("hawkes vs delayed", base.with_mode(ExcitationMode::Hawkes), base.clone()),
        ("(i) lambda0", more_immigrants, base.clone()),
        ("(ii) marks", base.clone(), small_marks),
        ("(iii) kernel", base.clone(), small_kernel),
        ("(iv) services", fast, base.clone()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, a, b)) in pairs.into_iter().enumerate() {
        let cfg = DominanceConfig {
            model_a: a,
            model_b: b,
            times: vec![1.0, 2.0, 5.0],
            reps: 5000,
        };
        let r = dominance_check(&cfg, key.child(i as u64)).unwrap();
        pass &= r.pass;
        let failed: Vec<String> = r
            .entries
            .iter()
            .filter(|e| !e.pass)
            .map(|e| format!("{:?}@{} ({:.3} > {:.3})", e.quantity, e.time, e.max_violation, e.band))
            .collect();
        parts.push(if failed.is_empty() {
            format!("{name}: ok")
        } else {
            format!("{name}: violated {}", failed.join(", "))
        });
    }
    // exact P(Q(t) = 0) from the transform at z = 0, s = 0
    let p0 = |mode: ExcitationMode, t: f64| {
        fixed_point_transform(&base.with_mode(mode), t, &[0.0], &[0.0], &FixedPointOptions::default())
            .unwrap()
            .value
    };
    let exact: Vec<String> = [1.0, 2.0, 5.0]
        .iter()
        .map(|&t| format!("t={t}: {:.4}/{:.4}", p0(ExcitationMode::Hawkes, t), p0(ExcitationMode::Delayed, t)))
        .collect();
    parts.push(format!("exact P(Q=0) hawkes/delayed {}", exact.join(", ")));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn c10() -> Outcome {
    let r = heavy_traffic_run(&HeavyTrafficConfig::default(), StreamKey::new(SEED).named("c10")).unwrap();
    let last = r.points.last().unwrap();
    // exact finite-rho variance of (1 - rho) Lambda for the delayed model, from the moment ODE
    let model = NetworkModel::markovian(1.0, last.r, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed);
    let table = solve_moments_transient(&model, 2, &[last.time]).unwrap();
    let l1 = table.get(&MomentIndex::new(vec![0], vec![1])).unwrap()[0];
    let l2 = table.get(&MomentIndex::new(vec![0], vec![2])).unwrap()[0];
    let exact_var = (1.0 - last.rho).powi(2) * (l2 - l1 * l1);
    let k = THRESHOLDS.se_multiplier;
    let moments_ok =
        within(last.mean.mean, last.target_mean, k * last.mean.se) && within(last.variance, last.target_variance, k * last.variance_se);
    let ks: Vec<String> = r.points.iter().map(|p| format!("{}: {:.4}", p.rho, p.ks.statistic)).collect();
    Outcome {
        pass: r.decreasing && moments_ok,
        detail: format!(
            "KS distances {}; at rho {}: mean {:.4} +- {:.4} vs {:.4}, var {:.4} +- {:.4} vs {:.4} (exact delayed variance {:.4})",
            ks.join(", "),
            last.rho,
            last.mean.mean,
            last.mean.se,
            last.target_mean,
            last.variance,
            last.variance_se,
            last.target_variance,
            exact_var
        ),
    }
}

fn c11() -> Outcome {
    let model = NetworkModel::univariate(
        1.0,
        Kernel::exponential(1.0, 1.0),
        MarkDistribution::Pareto {
            alpha: 1.5,
            scale: 1.0 / 6.0,
        },
        ServiceDistribution::Exponential { rate: 1.0 },
        ExcitationMode::Delayed,
    );
    let cfg = TailConfig {
        model,
        time: 20.0,
        reps: 100_000,
        k_fraction: 0.01,
    };
    let r = tail_propagation_run(&cfg, StreamKey::new(SEED).named("c11")).unwrap();
    Outcome {
        pass: r.contains_target,
        detail: format!(
            "Hill {:.3}, {:.0}% CI [{:.3}, {:.3}] (width {:.3}, k = {}) vs 1.5; Hill plot {}",
            r.hill.estimate,
            100.0 * r.hill.confidence,
            r.hill.ci_low,
            r.hill.ci_high,
            r.ci_width,
            r.hill.k,
            r.hill_plot.iter().map(|(k, a)| format!("{k}:{a:.2}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn c12() -> Outcome {
    let m = reference(ExcitationMode::Delayed);
    let mut worst = 0.0f64;
    let times = [1.0, 5.0, 10.0];
    let table = solve_moments_transient(&m, 1, &times).unwrap();
    let eq = table.get(&MomentIndex::new(vec![1], vec![0])).unwrap();
    for (i, t) in times.iter().enumerate() {
        let grid = UniformGrid::new(*t, 4096).unwrap();
        let r1 = volterra_solve_r1(&m, &grid).unwrap();
        let mean = m.lambda0[0] * trapezoid(&r1, grid.step());
        worst = worst.max((mean - eq[i]).abs());
    }
    Outcome {
        pass: worst < THRESHOLDS.volterra_abs,
        detail: format!("max |lambda0 int R1 - E[Q(t)]| over t in {{1, 5, 10}}: {worst:.2e}"),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("stationary means", c1),
        ("cluster vs thinning engines", c2),
        ("transform consistency", c3),
        ("moment recursion", c4),
        ("spectral formulas", c5),
        ("cluster sizes", c6),
        ("FCLT", c7),
        ("steady-state equality", c8),
        ("stochastic dominance", c9),
        ("heavy traffic", c10),
        ("tail propagation", c11),
        ("Volterra cross-check", c12),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && f != &(i + 1).to_string() {
                continue;
            }
        }
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} | {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            name,
            out.detail
        );
    }
    println!("acceptance: {failed} criterion(s) failed");
    if failed > 0 && std::env::var("HAWKESLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
