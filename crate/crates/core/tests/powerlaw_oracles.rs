//! Estimator checks against independently sampled Pareto data.

use gazeforage::powerlaw::{bootstrap_ci, default_xmin_candidates, select_xmin, select_xmin_fit};
use gazeforage::stats::{histogram, HistogramSpec, Scale};
use gazeforage::{fit_loglog_regression, fit_mle, Histogram};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inverse-CDF Pareto sampler, kept separate from the library's generator.
fn pareto(n: usize, mu: f64, x_min: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            x_min * (1.0 - u).powf(-1.0 / (mu - 1.0))
        })
        .collect()
}

#[test]
fn mle_recovers_exponent_at_1e5() {
    let xs = pareto(100_000, 2.0, 1.0, 11);
    let fit = fit_mle(&xs, 1.0).unwrap();
    assert!((fit.mu - 2.0).abs() <= 0.02, "mu = {}", fit.mu);
    assert_eq!(fit.n_tail, 100_000);
    assert!(fit.ks_stat < 0.01, "ks = {}", fit.ks_stat);
}

#[test]
fn mle_consistency_across_exponents() {
    for (i, mu) in [1.5, 2.0, 2.5, 3.0].into_iter().enumerate() {
        let xs = pareto(100_000, mu, 1.0, 100 + i as u64);
        let fit = fit_mle(&xs, 1.0).unwrap();
        assert!((fit.mu - mu).abs() < 0.02, "mu {mu}: {}", fit.mu);
    }
}

/// Histogram whose counts are the exact integral of `C l^-2` over every
/// geometric bin.
fn exact_inverse_square_histogram() -> Histogram {
    let bpd = 10u32;
    let edges: Vec<f64> = (0..=30).map(|k| 10f64.powf(k as f64 / bpd as f64)).collect();
    let counts = edges.windows(2).map(|e| (1e12 * (1.0 / e[0] - 1.0 / e[1])).round() as u64).collect();
    Histogram { edges, counts, scale: Scale::Logarithmic, underflow: 0, overflow: 0 }
}

#[test]
fn regression_on_exact_inverse_square_bins() {
    let fit = fit_loglog_regression(&exact_inverse_square_histogram(), 1.0).unwrap();
    assert!((fit.mu - 2.0).abs() < 1e-6, "mu = {}", fit.mu);
}

#[test]
fn regression_on_sampled_data() {
    let xs = pareto(1_000_000, 2.0, 1.0, 5);
    let max = xs.iter().copied().fold(0.0, f64::max);
    let hist = histogram(&xs, &HistogramSpec::Logarithmic { bins_per_decade: 20, lo: 1.0, hi: max }).unwrap();
    let fit = fit_loglog_regression(&hist, 1.0).unwrap();
    assert!((1.75..=2.25).contains(&fit.mu), "mu = {}", fit.mu);
    assert_eq!(fit.n_tail, 1_000_000);
}

#[test]
fn regression_and_mle_agree_on_clean_data() {
    let xs = pareto(200_000, 2.5, 1.0, 77);
    let hist = histogram(&xs, &HistogramSpec::Logarithmic { bins_per_decade: 20, lo: 1.0, hi: 1e4 }).unwrap();
    let reg = fit_loglog_regression(&hist, 1.0).unwrap();
    let mle = fit_mle(&xs, 1.0).unwrap();
    assert!((reg.mu - mle.mu).abs() < 0.3, "{} vs {}", reg.mu, mle.mu);
}

#[test]
fn two_tail_bins_are_insufficient() {
    let edges = vec![1.0, 2.0, 4.0, 8.0];
    let hist = Histogram { edges, counts: vec![10, 5, 0], scale: Scale::Logarithmic, underflow: 0, overflow: 0 };
    assert_eq!(fit_loglog_regression(&hist, 1.0).unwrap_err(), gazeforage::powerlaw::FitError::InsufficientTailBins);
}

#[test]
fn xmin_selection_on_pure_pareto() {
    let xs = pareto(50_000, 2.0, 1.0, 3);
    let best = select_xmin_fit(&xs, &[1.0, 2.0, 4.0]).unwrap();
    assert!(best.x_min <= 2.0, "x_min = {}", best.x_min);
    let (lo, hi) = bootstrap_ci(&xs, best.x_min, 200, 0.99, 9).unwrap();
    assert!(lo <= 2.0 && 2.0 <= hi, "[{lo}, {hi}]");
    for c in [1.0, 2.0, 4.0] {
        assert!(best.ks_stat <= fit_mle(&xs, c).unwrap().ks_stat);
    }
}

#[test]
fn xmin_selection_finds_mixture_crossover() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut xs: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.0..5.0)).collect();
    xs.extend(pareto(20_000, 2.5, 5.0, 22));
    let candidates = default_xmin_candidates(&xs);
    let x_min = select_xmin(&xs, &candidates).unwrap();
    assert!((4.0..=8.0).contains(&x_min), "x_min = {x_min}");
}

#[test]
fn default_candidates_span_upper_half() {
    let xs: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
    let c = default_xmin_candidates(&xs);
    assert_eq!(c.len(), 50);
    assert_eq!(c[0], 500.5);
    assert_eq!(*c.last().unwrap(), 990.01);
}

#[test]
fn bootstrap_contains_truth_and_is_deterministic() {
    let xs = pareto(100_000, 2.0, 1.0, 8);
    let ci = bootstrap_ci(&xs, 1.0, 200, 0.95, 1234).unwrap();
    assert!(ci.0 <= 2.0 && 2.0 <= ci.1, "{ci:?}");
    assert!(ci.1 - ci.0 < 0.05);
    assert_eq!(ci, bootstrap_ci(&xs, 1.0, 200, 0.95, 1234).unwrap());
    let mle = fit_mle(&xs, 1.0).unwrap().mu;
    assert!(ci.0 <= mle && mle <= ci.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mle_is_exactly_scale_equivariant_for_powers_of_two(seed in 0u64..1000, k in -20i32..20) {
        let xs = pareto(500, 2.3, 1.5, seed);
        let c = 2f64.powi(k);
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let a = fit_mle(&xs, 1.5).unwrap();
        let b = fit_mle(&scaled, 1.5 * c).unwrap();
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.n_tail, b.n_tail);
    }

    #[test]
    fn mle_is_scale_equivariant(seed in 0u64..1000, c in 1e-3f64..1e3) {
        let xs = pareto(500, 2.3, 1.5, seed);
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let a = fit_mle(&xs, 1.5).unwrap().mu;
        let b = fit_mle(&scaled, 1.5 * c).unwrap().mu;
        prop_assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn ks_stat_in_unit_interval(seed in 0u64..1000, mu in 1.2f64..4.0) {
        let xs = pareto(300, mu, 1.0, seed);
        let fit = fit_mle(&xs, 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&fit.ks_stat));
    }
}
