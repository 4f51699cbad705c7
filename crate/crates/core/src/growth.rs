//! Log-domain arithmetic for the exponential growth factor `(1+γ)^t`.
//!
//! Every power of `1+γ` in the crate goes through `exp(t·ln1p(γ))`; the
//! `-1` is folded in with `expm1` so small growth keeps full relative
//! precision and large growth stays representable as a logarithm.

/// `ln(1+γ)`, the per-step growth rate.
#[inline]
pub fn rate(gamma: f64) -> f64 {
    gamma.ln_1p()
}

/// `(1+γ)^t`. Overflows to `+inf` once `t·ln(1+γ)` exceeds ~709.78.
#[inline]
pub fn growth(gamma: f64, t: f64) -> f64 {
    (t * rate(gamma)).exp()
}

/// `(1+γ)^t - 1`.
#[inline]
pub fn growth_minus_one(gamma: f64, t: f64) -> f64 {
    (t * rate(gamma)).exp_m1()
}

/// `ln((1+γ)^t - 1)`, finite for every `t > 0` even when the growth itself
/// overflows. Returns `-inf` at `t = 0`.
pub fn ln_growth_minus_one(gamma: f64, t: f64) -> f64 {
    ln_exp_m1(t * rate(gamma))
}

/// `ln(e^y - 1)` for `y >= 0`.
pub fn ln_exp_m1(y: f64) -> f64 {
    if y > 36.0 {
        // e^{-y} < 2^-52: the correction is below one ulp of y.
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// `log_{1+γ}(1 + a)`, evaluated as `ln1p(a)/ln1p(γ)`.
#[inline]
pub fn log_one_plus_gamma_of_one_plus(gamma: f64, a: f64) -> f64 {
    a.ln_1p() / rate(gamma)
}
