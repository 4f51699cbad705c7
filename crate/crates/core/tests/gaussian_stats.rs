use std::f64::consts::PI;

use haltsim::coin::{self, CoinSystem, TestVector};
use haltsim::gaussian::{self, GaussianSampler};
use haltsim::mc;
use proptest::prelude::*;
use statrs::function::beta::beta_reg;

/// Probability that a Gaussian probe lies in the indistinguishable cone
/// `x_j²·((1+γ)^t − 1) ≤ ε‖x‖²`. The squared direction cosine is
/// Beta(1/2, (N−1)/2).
fn cone_oracle(n: usize, gamma: f64, eps: f64, t: u64) -> f64 {
    let c = (t as f64 * gamma.ln_1p()).exp_m1() / eps;
    if c <= 1.0 {
        return 1.0;
    }
    if n == 1 {
        return 0.0;
    }
    beta_reg(0.5, (n as f64 - 1.0) / 2.0, 1.0 / c)
}

/// Planar case by polar integration: `(2/π)·atan(1/√(c−1))`.
fn cone_oracle_2d(gamma: f64, eps: f64, t: u64) -> f64 {
    let c = (t as f64 * gamma.ln_1p()).exp_m1() / eps;
    if c <= 1.0 {
        1.0
    } else {
        2.0 / PI * (1.0 / (c - 1.0).sqrt()).atan()
    }
}

#[test]
fn coordinate_variance_is_one_half() {
    let n = 1_000_000u64;
    let (sum, sum_sq) = mc::run_trials(
        n,
        3,
        || (0.0, 0.0),
        |acc, rng, _| {
            let x = gaussian::normal_half(rng);
            acc.0 += x;
            acc.1 += x * x;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    let nf = n as f64;
    let mean = sum / nf;
    let var = sum_sq / nf - mean * mean;
    let se = (2.0 * 0.25 / nf).sqrt();
    assert!((var - 0.5).abs() < 3.0 * se, "variance {var}");
    assert!(mean.abs() < 3.0 * (0.5 / nf).sqrt());
}

#[test]
fn oracles_agree_in_the_plane() {
    for t in [5, 20, 50, 120] {
        let a = cone_oracle(2, 0.1, 0.01, t);
        let b = cone_oracle_2d(0.1, 0.01, t);
        assert!((a - b).abs() < 1e-12, "t = {t}: {a} vs {b}");
    }
}

#[test]
fn planar_cone_matches_closed_form() {
    for (t, seed) in [(10u64, 1u64), (30, 2), (60, 3)] {
        let sys = CoinSystem::with_false(2, 0.1, 1).unwrap();
        let est = gaussian::mc_indistinguishable_probability(&sys, 0.01, t, 1_000_000, seed).unwrap();
        let exact = cone_oracle_2d(0.1, 0.01, t);
        assert!(
            (est.p_hat - exact).abs() <= 3.0 * est.std_err.max(1e-6),
            "t = {t}: {} vs {exact}",
            est.p_hat
        );
    }
}

#[test]
fn higher_dimensional_cone_matches_beta_oracle() {
    for (n, t) in [(3usize, 1000u64), (5, 3000), (10, 5000)] {
        let sys = CoinSystem::with_false(n, 0.001, 1).unwrap();
        let est = gaussian::mc_indistinguishable_probability(&sys, 0.01, t, 200_000, 17).unwrap();
        let exact = cone_oracle(n, 0.001, 0.01, t);
        assert!(
            (est.p_hat - exact).abs() <= 3.0 * est.std_err,
            "N = {n}, t = {t}: {} vs {exact}",
            est.p_hat
        );
    }
}

#[test]
fn false_index_does_not_matter() {
    let n = 6;
    let a = gaussian::mc_indistinguishable_probability(
        &CoinSystem::with_false(n, 0.001, 1).unwrap(),
        0.01,
        2000,
        200_000,
        5,
    )
    .unwrap();
    let b = gaussian::mc_indistinguishable_probability(
        &CoinSystem::with_false(n, 0.001, n).unwrap(),
        0.01,
        2000,
        200_000,
        6,
    )
    .unwrap();
    let joint = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    assert!((a.p_hat - b.p_hat).abs() <= 3.0 * joint);
}

#[test]
fn bound_dominates_estimates_on_grid() {
    let mut seed = 100;
    for n in [1usize, 2, 5, 10] {
        for (gamma, times) in [(0.001, [100u64, 1000, 10_000, 30_000]), (0.1, [10, 50, 100, 300])] {
            for eps in [0.01, 0.1] {
                let sys = CoinSystem::with_false(n, gamma, 1).unwrap();
                for t in times {
                    seed += 1;
                    let est = gaussian::mc_indistinguishable_probability(&sys, eps, t, 20_000, seed).unwrap();
                    let b = gaussian::bound_total(n, eps, gamma, t).unwrap();
                    assert!(
                        est.p_hat - 3.0 * est.std_err <= b.simplified,
                        "N={n} γ={gamma} ε={eps} t={t}: {} > {}",
                        est.p_hat,
                        b.simplified
                    );
                    assert!(b.total <= b.simplified_raw * (1.0 + 1e-12) || b.simplified_raw >= 1.0);
                }
            }
        }
    }
}

#[test]
fn estimates_and_bounds_decrease_in_time() {
    let sys = CoinSystem::with_false(5, 0.001, 2).unwrap();
    let mut last_p = f64::INFINITY;
    let mut last_se = 0.0;
    let mut last_b = f64::INFINITY;
    for (i, t) in [500u64, 1000, 2000, 4000, 8000, 16_000].into_iter().enumerate() {
        let est = gaussian::mc_indistinguishable_probability(&sys, 0.01, t, 50_000, 40 + i as u64).unwrap();
        assert!(est.p_hat <= last_p + 3.0 * (est.std_err.powi(2) + last_se * last_se).sqrt());
        let b = gaussian::bound_total(5, 0.01, 0.001, t).unwrap().simplified_raw;
        assert!(b < last_b);
        last_p = est.p_hat;
        last_se = est.std_err;
        last_b = b;
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sys = CoinSystem::with_false(4, 0.01, 3).unwrap();
    let run = || gaussian::mc_indistinguishable_probability(&sys, 0.05, 200, 30_000, 77).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(single, many);
}

#[test]
fn sampler_matches_indexed_draws() {
    let mut s = GaussianSampler::new(3, 12).unwrap();
    for i in 0..5 {
        assert_eq!(s.sample_test_vector(), s.sample_at(i));
    }
}

proptest! {
    #[test]
    fn membership_complements_clicks(
        x in prop::collection::vec(-5.0f64..5.0, 1..8),
        j in 1usize..8,
        gamma in 1e-3f64..0.9,
        eps in 1e-3f64..0.9,
        t in 0u64..3000,
    ) {
        let n = x.len();
        let v = TestVector::new(x);
        prop_assume!(!v.is_null());
        let sys = CoinSystem::with_false(n, gamma, (j - 1) % n + 1).unwrap();
        let inside = gaussian::in_indistinguishable_set(&sys, &v, eps, t);
        let click = coin::clicks(&sys, &v, t, eps).unwrap();
        prop_assert!(inside != click);
    }
}
