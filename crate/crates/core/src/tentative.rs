//! Sections of the l₂ indistinguishable cone.
//!
//! On `H_{2n}` the cone `x_j² ≤ α²‖x‖²`, `α² = ε/((1+γ)^T − 1)`, has
//! Gaussian measure
//!
//! ```text
//! ∫₀^{α√n} (1 + v²/n)^{−n} dv  /  ∫₀^∞ (1 + v²/n)^{−n} dv
//! ```
//!
//! which tends to `erf(α√n)`. For fixed `T` the sections fill up as `n`
//! grows; only a schedule with `α√n → 0` keeps them small.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::coin;
use crate::error::{Error, Result};
use crate::gaussian;
use crate::growth;
use crate::quadrature::Quadrature;

/// Absolute tolerance for each integral of the section ratio.
pub const SECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionSpec {
    /// Half-dimension: the section lives in `H_{2n}`.
    pub n: u64,
    pub alpha: f64,
    /// Experiment duration, when the section was built from one.
    pub t: Option<f64>,
}

impl SectionSpec {
    pub fn with_alpha(n: u64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("section half-dimension n must be at least 1"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::config(format!("alpha must be non-negative, got {alpha}")));
        }
        Ok(SectionSpec { n, alpha, t: None })
    }

    /// Section for an experiment of duration `t`; needs `(1+γ)^t > 1`.
    pub fn from_time(n: u64, epsilon: f64, gamma: f64, t: f64) -> Result<Self> {
        let alpha = alpha_for(epsilon, gamma, t)?;
        Ok(SectionSpec {
            t: Some(t),
            ..Self::with_alpha(n, alpha)?
        })
    }

    /// `Γ(n) = α√n`, the upper limit of the section integral.
    pub fn scaled_gate(&self) -> f64 {
        self.alpha * (self.n as f64).sqrt()
    }
}

/// `α = √(ε/((1+γ)^t − 1))`.
pub fn alpha_for(epsilon: f64, gamma: f64, t: f64) -> Result<f64> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    if !(t > 0.0) {
        return Err(Error::config(format!(
            "duration must be positive so that (1+gamma)^T > 1, got {t}"
        )));
    }
    Ok((0.5 * (epsilon.ln() - growth::ln_growth_minus_one(gamma, t))).exp())
}

fn section_integrand(n: f64) -> impl Fn(f64) -> f64 {
    move |v: f64| (-n * (v * v / n).ln_1p()).exp()
}

/// `∫₀^∞ (1 + v²/n)^{−n} dv = √(nπ)·Γ(n − ½) / (2Γ(n))`.
pub fn section_normaliser_closed_form(n: u64) -> f64 {
    let nf = n as f64;
    if n >= SERIES_FROM {
        // √n·Γ(n − ½)/Γ(n) = 1 + 3/(8n) + 25/(128n²) + 105/(1024n³) + O(n⁻⁴)
        let r = 1.0 / nf;
        let ratio = 1.0 + r * (3.0 / 8.0 + r * (25.0 / 128.0 + r * (105.0 / 1024.0)));
        return 0.5 * PI.sqrt() * ratio;
    }
    (0.5 * (nf * PI).ln() + ln_gamma(nf - 0.5) - std::f64::consts::LN_2 - ln_gamma(nf)).exp()
}

/// Above this `n` the Gamma ratio comes from its asymptotic series, since
/// differencing two log-gammas of size `n·ln n` loses digits.
const SERIES_FROM: u64 = 10_000;

/// Quadrature value of the section normaliser, checked against the Beta
/// function form.
pub fn section_normaliser(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("section half-dimension n must be at least 1"));
    }
    let nf = n as f64;
    let q = Quadrature::new(SECTION_TOL, SECTION_TOL);
    let quad = q.integrate(section_integrand(nf), 0.0, f64::INFINITY)?.value;
    let closed = section_normaliser_closed_form(n);
    let tol = if n >= SERIES_FROM {
        1e-9
    } else {
        1e-9 + 64.0 * f64::EPSILON * ln_gamma(nf).abs().max(1.0)
    };
    if ((quad - closed) / closed).abs() > tol {
        return Err(Error::numerical(
            "section_measure",
            format!("normaliser mismatch at n = {n}: quadrature {quad} vs closed form {closed}"),
        ));
    }
    Ok(quad)
}

/// Gaussian measure of the `2n`-dimensional section of the cone.
pub fn section_measure(spec: &SectionSpec) -> Result<f64> {
    let upper = spec.scaled_gate();
    if upper == 0.0 {
        return Ok(0.0);
    }
    if upper.is_infinite() {
        return Ok(1.0);
    }
    let nf = spec.n as f64;
    let den = section_normaliser(spec.n)?;
    let q = Quadrature::new(SECTION_TOL, SECTION_TOL).with_initial_segments(8);
    // Past the bulk of the integrand, integrate the tail instead.
    let num = if upper <= 2.0 {
        q.integrate(section_integrand(nf), 0.0, upper)?.value
    } else {
        den - q.integrate(section_integrand(nf), upper, f64::INFINITY)?.value
    };
    Ok((num / den).clamp(0.0, 1.0))
}

/// `(2/√π)∫₀^u e^{−v²} dv`, the large-`n` limit of the section measure.
pub fn gaussian_limit(u: f64) -> f64 {
    if u.is_infinite() && u > 0.0 {
        1.0
    } else {
        erf(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionRow {
    pub n: u64,
    pub alpha: f64,
    pub scaled_gate: f64,
    pub measure: f64,
    pub limit: f64,
}

/// Section measures for fixed `α` along a grid of half-dimensions.
pub fn discontinuity_demo(alpha: f64, n_grid: &[u64]) -> Result<Vec<SectionRow>> {
    n_grid
        .iter()
        .map(|&n| {
            let spec = SectionSpec::with_alpha(n, alpha)?;
            Ok(SectionRow {
                n,
                alpha,
                scaled_gate: spec.scaled_gate(),
                measure: section_measure(&spec)?,
                limit: gaussian_limit(spec.scaled_gate()),
            })
        })
        .collect()
}

/// Duration as a function of the observed half-dimension.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    /// `(1+γ)^T − 1 = ε·n^exponent`, so `Γ(n) = n^{(1 − exponent)/2}`.
    PowerLaw { exponent: f64 },
    /// One duration per grid point.
    Explicit { times: Vec<f64> },
}

impl Schedule {
    fn times(&self, n_grid: &[u64], epsilon: f64, gamma: f64) -> Result<Vec<f64>> {
        match self {
            Schedule::PowerLaw { exponent } => {
                if !(*exponent > 1.0) {
                    return Err(Error::InvalidSchedule(format!(
                        "power-law exponent {exponent} must exceed 1 for α√n → 0"
                    )));
                }
                Ok(n_grid
                    .iter()
                    .map(|&n| {
                        let ln_arg = epsilon.ln() + exponent * (n as f64).ln();
                        // log_{1+γ}(1 + e^{ln_arg}) without overflowing the argument
                        let ln1p = if ln_arg > 36.0 {
                            ln_arg + (-ln_arg).exp().ln_1p()
                        } else {
                            ln_arg.exp().ln_1p()
                        };
                        ln1p / growth::rate(gamma)
                    })
                    .collect())
            }
            Schedule::Explicit { times } => {
                if times.len() != n_grid.len() {
                    return Err(Error::InvalidSchedule(format!(
                        "{} durations for {} grid points",
                        times.len(),
                        n_grid.len()
                    )));
                }
                Ok(times.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledRow {
    pub n: u64,
    pub t: f64,
    pub alpha: f64,
    pub scaled_gate: f64,
    pub measure: f64,
    pub limit: f64,
    /// `(1/√π)∫₀^{Γ(n)} e^{−x²} dx`, the probability fed to Bayes.
    pub prob_f: f64,
    pub posterior: f64,
}

/// Section measures and non-click posteriors when `T` grows with `n`.
pub fn coupled_scaling_demo(
    n_grid: &[u64],
    schedule: &Schedule,
    epsilon: f64,
    gamma: f64,
    prior_no_false: f64,
) -> Result<Vec<CoupledRow>> {
    if n_grid.is_empty() {
        return Err(Error::config("empty n grid"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("n grid must be strictly increasing"));
    }
    let times = schedule.times(n_grid, epsilon, gamma)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for (&n, &t) in n_grid.iter().zip(&times) {
        let spec = SectionSpec::from_time(n, epsilon, gamma, t)?;
        let gate = spec.scaled_gate();
        if let Some(prev) = rows.last().map(|r: &CoupledRow| r.scaled_gate) {
            if !(gate < prev) {
                return Err(Error::InvalidSchedule(format!(
                    "α√n must decrease along the grid: {prev} then {gate} at n = {n}"
                )));
            }
        }
        let prob_f = 0.5 * gaussian_limit(gate);
        rows.push(CoupledRow {
            n,
            t,
            alpha: spec.alpha,
            scaled_gate: gate,
            measure: section_measure(&spec)?,
            limit: gaussian_limit(gate),
            prob_f,
            posterior: gaussian::bayes_posterior_finite(prior_no_false, prob_f, 1)?.posterior,
        });
    }
    Ok(rows)
}
