use haltsim::tentative::{self, Schedule, SectionSpec};
use proptest::prelude::*;

const TOL: f64 = 1e-8;

fn measure(n: u64, alpha: f64) -> f64 {
    tentative::section_measure(&SectionSpec::with_alpha(n, alpha).unwrap()).unwrap()
}

#[test]
fn monotone_in_alpha_and_n() {
    let alphas = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.3, 1.0];
    let ns = [1u64, 3, 10, 100, 1000, 10_000, 100_000];
    for &n in &ns {
        let row: Vec<f64> = alphas.iter().map(|&a| measure(n, a)).collect();
        assert!(row.windows(2).all(|w| w[1] >= w[0] - TOL), "n = {n}: {row:?}");
    }
    for &a in &alphas {
        let col: Vec<f64> = ns.iter().map(|&n| measure(n, a)).collect();
        assert!(col.windows(2).all(|w| w[1] >= w[0] - TOL), "alpha = {a}: {col:?}");
    }
}

#[test]
fn converges_uniformly_to_the_gaussian_limit() {
    let alphas: Vec<f64> = (1..=40).map(|i| i as f64 * 0.0025).collect();
    let gap = |n: u64| {
        alphas
            .iter()
            .map(|&a| {
                let s = SectionSpec::with_alpha(n, a).unwrap();
                (tentative::section_measure(&s).unwrap() - tentative::gaussian_limit(s.scaled_gate())).abs()
            })
            .fold(0.0, f64::max)
    };
    let gaps: Vec<f64> = [10u64, 100, 1000, 10_000].into_iter().map(gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 1e-3);
}

#[test]
fn normaliser_matches_beta_closed_form() {
    for n in [1u64, 2, 5, 50, 500, 5000] {
        let q = tentative::section_normaliser(n).unwrap();
        let c = tentative::section_normaliser_closed_form(n);
        assert!((q - c).abs() / c < 1e-9, "n = {n}");
    }
}

#[test]
fn coupled_schedule_drives_measure_to_zero() {
    let grid = [100u64, 10_000, 1_000_000, 100_000_000, 10_000_000_000];
    let rows = tentative::coupled_scaling_demo(&grid, &Schedule::PowerLaw { exponent: 1.5 }, 0.01, 0.001, 0.5).unwrap();
    for (r, &n) in rows.iter().zip(&grid) {
        // Γ(n) = n^{−1/4}
        assert!((r.scaled_gate - (n as f64).powf(-0.25)).abs() < 1e-9);
        let bound = r.scaled_gate / tentative::section_normaliser_closed_form(n);
        assert!(r.measure <= bound * (1.0 + 1e-9), "n = {n}: {} > {bound}", r.measure);
    }
    assert!(rows.windows(2).all(|w| w[1].measure < w[0].measure));
    let last = rows.last().unwrap();
    assert!(last.measure < 0.01);
    assert!(last.posterior > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measures_are_probabilities(n in 1u64..1_000_000, alpha in 1e-6f64..10.0) {
        let m = measure(n, alpha);
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn alpha_from_time_is_consistent(eps in 1e-4f64..0.5, gamma in 1e-3f64..0.5, t in 1.0f64..5000.0) {
        let a = tentative::alpha_for(eps, gamma, t).unwrap();
        let g = (t * gamma.ln_1p()).exp_m1();
        prop_assume!(g.is_finite() && g > 0.0);
        prop_assert!((a * a * g / eps - 1.0).abs() < 1e-9);
    }
}
