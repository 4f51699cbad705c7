//! Adaptive Gauss–Kronrod (10/21-point) quadrature with a global error
//! budget, plus the usual `(1-u)/u` maps for semi-infinite and infinite
//! ranges.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

// Gauss weights for the nodes XGK[1], XGK[3], .., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_707_006_210,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Adaptive integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
    pub initial_segments: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_segments: 4000,
            initial_segments: 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 21-point Kronrod panel on a finite `[a, b]`.
fn gk21(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let ah = half.abs();
    Segment {
        a,
        b,
        value: res_k * half,
        error: rescale_error(err, res_abs * ah, res_asc * ah),
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_initial_segments(mut self, n: usize) -> Self {
        self.initial_segments = n.max(1);
        self
    }

    /// Integrate `f` over `[a, b]`; either bound may be infinite.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        self.integrate_dyn(&f, a, b)
    }

    fn integrate_dyn(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<Integral> {
        if a.is_nan() || b.is_nan() {
            return Err(Error::numerical("quadrature", "NaN integration bound"));
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            });
        }
        if a > b {
            let r = self.integrate_dyn(f, b, a)?;
            return Ok(Integral {
                value: -r.value,
                ..r
            });
        }
        match (a.is_finite(), b.is_finite()) {
            (true, true) => self.finite(f, a, b),
            (true, false) => self.finite(
                &|u: f64| {
                    let x = a + (1.0 - u) / u;
                    f(x) / (u * u)
                },
                0.0,
                1.0,
            ),
            (false, true) => self.finite(
                &|u: f64| {
                    let x = b - (1.0 - u) / u;
                    f(x) / (u * u)
                },
                0.0,
                1.0,
            ),
            (false, false) => {
                // Both halves share the error budget.
                let half = Quadrature {
                    abs_tol: 0.5 * self.abs_tol,
                    ..*self
                };
                let left = half.integrate_dyn(f, f64::NEG_INFINITY, 0.0)?;
                let right = half.integrate_dyn(f, 0.0, f64::INFINITY)?;
                Ok(Integral {
                    value: left.value + right.value,
                    abs_error: left.abs_error + right.abs_error,
                    evaluations: left.evaluations + right.evaluations,
                })
            }
        }
    }

    fn finite(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<Integral> {
        let pieces = self.initial_segments.max(1);
        let width = (b - a) / pieces as f64;
        let mut heap = BinaryHeap::with_capacity(pieces * 4);
        let mut total = 0.0;
        let mut total_err = 0.0;
        for i in 0..pieces {
            let lo = a + width * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + width };
            let s = gk21(f, lo, hi);
            total += s.value;
            total_err += s.error;
            heap.push(s);
        }
        let mut evaluations = 21 * pieces;

        loop {
            if !total.is_finite() || !total_err.is_finite() {
                return Err(Error::numerical(
                    "quadrature",
                    format!("non-finite integrand on [{a}, {b}]"),
                ));
            }
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= target {
                break;
            }
            if heap.len() >= self.max_segments {
                return Err(Error::numerical(
                    "quadrature",
                    format!(
                        "no convergence on [{a}, {b}] after {} segments: error {total_err:e} > {target:e}",
                        heap.len()
                    ),
                ));
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                return Err(Error::numerical(
                    "quadrature",
                    format!("roundoff limit reached near {mid:e} with error {total_err:e}"),
                ));
            }
            let left = gk21(f, worst.a, mid);
            let right = gk21(f, mid, worst.b);
            evaluations += 42;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }

        // Re-sum to shed drift accumulated by the incremental updates.
        let (value, abs_error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        Ok(Integral {
            value,
            abs_error,
            evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0).unwrap();
        // x^6/6 - x^3 + x on [-1, 2]
        let exact = (64.0 / 6.0 - 8.0 + 2.0) - (1.0 / 6.0 + 1.0 - 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_whole_line() {
        let q = Quadrature::new(1e-13, 1e-13);
        let r = q.integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cauchy_half_line() {
        let q = Quadrature::new(1e-12, 1e-12);
        let r = q.integrate(|x| 1.0 / (1.0 + x * x), 0.0, f64::INFINITY).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = Quadrature::default();
        let fwd = q.integrate(f64::sin, 0.0, 1.0).unwrap().value;
        let back = q.integrate(f64::sin, 1.0, 0.0).unwrap().value;
        assert_eq!(fwd, -back);
    }

    #[test]
    fn non_integrable_reports_failure() {
        let q = Quadrature::new(1e-12, 1e-12);
        let err = q.integrate(|x| 1.0 / x, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure { .. }));
    }
}
