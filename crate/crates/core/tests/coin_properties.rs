use haltsim::coin::{self, CoinSystem, TestVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn probe(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_len)
        .prop_filter("non-null", |v| v.iter().any(|&x| x != 0.0))
}

fn exact_form(x: &[f64], j: usize, gamma: f64, t: u32) -> f64 {
    let one = BigRational::one();
    let q = one.clone() + BigRational::from_float(gamma).unwrap();
    let qt = q.pow(t as i32);
    let mut total = BigRational::zero();
    for (i, &xi) in x.iter().enumerate() {
        let xi = BigRational::from_float(xi).unwrap();
        let w = if i + 1 == j { qt.clone() } else { one.clone() };
        total += w * xi.clone() * xi;
    }
    total.to_f64().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn all_true_systems_never_click(x in probe(12), gamma in 1e-4f64..0.999, eps in 1e-6f64..1.0, t in 0u64..1_000_000) {
        let sys = CoinSystem::all_true(x.len(), gamma).unwrap();
        let v = TestVector::new(x);
        prop_assert!(!coin::clicks(&sys, &v, t, eps).unwrap());
    }

    #[test]
    fn click_implies_false_stack(x in probe(8), j in 1usize..=8, gamma in 1e-3f64..1.0, eps in 1e-4f64..0.5, t in 0u64..5000) {
        let n = x.len();
        let j = (j - 1) % n + 1;
        let sys = CoinSystem::with_false(n, gamma, j).unwrap();
        let v = TestVector::new(x);
        if coin::clicks(&sys, &v, t, eps).unwrap() {
            prop_assert_eq!(sys.false_stack(), Some(j));
            prop_assert!(v.coord(j).unwrap() != 0.0);
        }
    }

    #[test]
    fn growth_is_strictly_monotone(x in probe(6), gamma in 1e-3f64..0.5, t in 0u64..2000) {
        let n = x.len();
        let v = TestVector::new(x);
        let j = (0..n).find(|&i| v.coords()[i] != 0.0).unwrap() + 1;
        let sys = CoinSystem::with_false(n, gamma, j).unwrap();
        let a = coin::quadratic_form(&sys, &v, t).unwrap();
        let b = coin::quadratic_form(&sys, &v, t + 1).unwrap();
        prop_assume!(!b.overflow);
        prop_assert!(b.value > a.value);
        let flat = CoinSystem::all_true(n, gamma).unwrap();
        prop_assert_eq!(
            coin::quadratic_form(&flat, &v, t).unwrap().value,
            coin::quadratic_form(&flat, &v, t + 1000).unwrap().value
        );
    }

    #[test]
    fn form_ratio_diverges(x in probe(6), gamma in 1e-3f64..0.5, bound in 1.0f64..1e6) {
        let n = x.len();
        let v = TestVector::new(x);
        let j = (0..n).find(|&i| v.coords()[i] != 0.0).unwrap() + 1;
        let sys = CoinSystem::with_false(n, gamma, j).unwrap();
        // (1+γ)^t x_j² > B‖x‖² once t > log_{1+γ}(B‖x‖²/x_j²)
        let xj2 = v.coords()[j - 1].powi(2);
        let t = ((bound * v.norm_sq() / xj2).ln() / gamma.ln_1p()).ceil().max(0.0) as u64 + 1;
        let q = coin::quadratic_form(&sys, &v, t).unwrap().value;
        prop_assert!(q / v.norm_sq() > bound);
    }

    #[test]
    fn first_click_time_is_the_first_crossing(x in probe(4), gamma in 0.05f64..1.0, eps in 1e-3f64..0.5) {
        let n = x.len();
        let v = TestVector::new(x);
        let j = (0..n).find(|&i| v.coords()[i] != 0.0).unwrap() + 1;
        let sys = CoinSystem::with_false(n, gamma, j).unwrap();
        let t = coin::first_click_time(&v, j, gamma, eps).unwrap();
        prop_assume!(t < 5000);
        for s in 0..t {
            prop_assert!(!coin::clicks(&sys, &v, s, eps).unwrap(), "clicked early at {}", s);
        }
        prop_assert!(coin::clicks(&sys, &v, t, eps).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_domain_matches_exact_rationals(x in probe(5), j in 1usize..=5, k in 1u32..=1000, t in 0u32..=1000) {
        let n = x.len();
        let j = (j - 1) % n + 1;
        let gamma = k as f64 / 1000.0;
        let sys = CoinSystem::with_false(n, gamma, j).unwrap();
        let got = coin::quadratic_form(&sys, &TestVector::new(x.clone()), t as u64).unwrap().value;
        let want = exact_form(&x, j, gamma, t);
        prop_assert!(((got - want) / want).abs() < 1e-12, "got {} want {}", got, want);
    }
}

#[test]
fn exact_oracle_sanity() {
    // (3/2)^2 · 4 + 1 = 10
    assert_eq!(exact_form(&[2.0, 1.0], 1, 0.5, 2), 10.0);
    let big = BigRational::from_integer(BigInt::from(3));
    assert_eq!(big.to_f64(), Some(3.0));
}
