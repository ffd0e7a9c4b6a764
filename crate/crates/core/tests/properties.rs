use proptest::prelude::*;

use hawkeslab::cluster_stats::{borel_pmf, offspring_pmf};
use hawkeslab::io::{model_to_json, parse_model_text};
use hawkeslab::moments::{lagrange_sylvester_exp, univariate_eigenvalues, univariate_matrix};
use hawkeslab::sim::{reconstruct_paths, simulate_network};
use hawkeslab::model::kernel_l1;
use hawkeslab::{ExcitationMode, Kernel, MarkDistribution, NetworkModel, ServiceDistribution, StreamKey};

fn mark() -> impl Strategy<Value = MarkDistribution> {
    prop_oneof![
        (0.1..3.0f64).prop_map(|value| MarkDistribution::Deterministic { value }),
        (0.5..5.0f64).prop_map(|rate| MarkDistribution::Exponential { rate }),
        (0.3..4.0f64, 0.5..5.0f64).prop_map(|(shape, rate)| MarkDistribution::Gamma { shape, rate }),
    ]
}

fn mode() -> impl Strategy<Value = ExcitationMode> {
    prop_oneof![
        Just(ExcitationMode::Hawkes),
        Just(ExcitationMode::Delayed),
        Just(ExcitationMode::Ephemeral)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_json_round_trip(l0 in 0.0..5.0f64, r in 0.1..5.0f64, b in 0.0..2.0f64, m in mark(), mu in 0.1..5.0f64, md in mode()) {
        let model = NetworkModel::univariate(l0, Kernel::exponential(r, b), m, ServiceDistribution::Exponential { rate: mu }, md);
        let back = parse_model_text(&model_to_json(&model).unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn exponential_kernel_norm(r in 0.01..10.0f64, b in 0.0..10.0f64) {
        prop_assert!((kernel_l1(&Kernel::exponential(r, b)).unwrap() - b / r).abs() <= 1e-12 * (1.0 + b / r));
    }

    #[test]
    fn offspring_law_is_normalized(m in mark(), scale in 0.05..0.6f64, md in prop_oneof![Just(ExcitationMode::Hawkes), Just(ExcitationMode::Delayed)]) {
        let model = NetworkModel::univariate(1.0, Kernel::exponential(1.0, scale), m, ServiceDistribution::Exponential { rate: 1.0 }, md);
        let total: f64 = (0..=200).map(|k| offspring_pmf(&model, k).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "{}", total);
    }

    #[test]
    fn borel_mass_at_most_one(rho in 0.01..0.6f64) {
        let total: f64 = (1..=400).map(|n| borel_pmf(n, rho).unwrap()).sum();
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert!(total > 1.0 - 1e-6);
    }

    #[test]
    fn top_eigenvalue_sign_is_stability(n in 1u32..6, mu in 0.1..5.0f64, r in 0.1..5.0f64, b1 in 0.0..5.0f64) {
        prop_assume!((b1 / r - 1.0).abs() > 1e-6);
        let top = univariate_eigenvalues(n, mu, r, b1).into_iter().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(top < 0.0, b1 < r);
    }

    #[test]
    fn spectral_exponential_matches_dense(n in 1u32..5, mu in 0.2..3.0f64, r in 0.2..3.0f64, b1 in 0.0..2.0f64, t in 0.0..2.0f64) {
        let a = univariate_matrix(n, mu, r, b1);
        let eig = univariate_eigenvalues(n, mu, r, b1);
        let mut sorted = eig.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-3));
        let ls = lagrange_sylvester_exp(&a, &eig, t).unwrap();
        let dense = (a * t).exp();
        let scale = dense.abs().max().max(1.0);
        prop_assert!((ls - dense).abs().max() < 1e-8 * scale);
    }

    #[test]
    fn paths_stay_nonnegative(seed in any::<u64>(), md in mode(), m in mark()) {
        let model = NetworkModel::univariate(1.0, Kernel::exponential(2.0, 0.5), m, ServiceDistribution::Exponential { rate: 1.0 }, md);
        let log = simulate_network(&model, 20.0, StreamKey::new(seed)).unwrap();
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let path = reconstruct_paths(&log, &model, &grid).unwrap();
        prop_assert!(path.lambda[0].iter().all(|l| *l >= 1.0 - 1e-12));
        prop_assert!(path.n[0].windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(path.q[0].iter().zip(&path.n[0]).all(|(q, n)| q <= n));
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>()) {
        let model = NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed);
        let a = simulate_network(&model, 10.0, StreamKey::new(seed)).unwrap();
        let b = simulate_network(&model, 10.0, StreamKey::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
