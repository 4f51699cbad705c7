//! Coin systems, the growth operator `Q`, and the click predicate.
//!
//! A system of stacks holds true coins of weight `Γ = 1` gram, except
//! possibly one stack `j` of false coins weighing `1 + γ`. The diagonal
//! operator `Q` multiplies coordinate `i` by the weight `q_i`, so
//!
//! ```text
//! <Q^t x, x> = Σ q_i^t x_i² = ‖x‖² + ((1+γ)^t − 1)·x_j²
//! ```
//!
//! and the device clicks on probe `x` at time `t` when that form exceeds
//! `(1+ε)‖x‖²`.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth;

/// Weight of a true coin, in grams.
pub const BASE_WEIGHT: f64 = 1.0;

/// Absolute decoding tolerance for weighing, in units of `γ`.
pub const WEIGHING_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stacks {
    Finite(usize),
    Countable,
}

impl Stacks {
    pub fn covers(&self, i: usize) -> bool {
        match *self {
            Stacks::Finite(n) => i >= 1 && i <= n,
            Stacks::Countable => i >= 1,
        }
    }
}

/// A row of stacks with at most one false stack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinSystem {
    stacks: Stacks,
    gamma: f64,
    false_stack: Option<usize>,
}

impl CoinSystem {
    pub fn new(stacks: Stacks, gamma: f64, false_stack: Option<usize>) -> Result<Self> {
        check_gamma(gamma)?;
        if let Stacks::Finite(0) = stacks {
            return Err(Error::config("a coin system needs at least one stack"));
        }
        if let Some(j) = false_stack {
            if !stacks.covers(j) {
                let len = match stacks {
                    Stacks::Finite(n) => n,
                    Stacks::Countable => usize::MAX,
                };
                return Err(Error::IndexError { index: j, len });
            }
        }
        Ok(CoinSystem {
            stacks,
            gamma,
            false_stack,
        })
    }

    pub fn all_true(n: usize, gamma: f64) -> Result<Self> {
        Self::new(Stacks::Finite(n), gamma, None)
    }

    pub fn with_false(n: usize, gamma: f64, j: usize) -> Result<Self> {
        Self::new(Stacks::Finite(n), gamma, Some(j))
    }

    pub fn stacks(&self) -> Stacks {
        self.stacks
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn false_stack(&self) -> Option<usize> {
        self.false_stack
    }

    /// Weight `q_i` of a coin in stack `i` (1-based).
    pub fn weight(&self, i: usize) -> f64 {
        if Some(i) == self.false_stack {
            BASE_WEIGHT + self.gamma
        } else {
            BASE_WEIGHT
        }
    }
}

/// Device parameters: sensitivity `ε`, probability threshold `η`, bias `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl DeviceConfig {
    pub fn new(epsilon: f64, eta: f64, gamma: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_eta(eta)?;
        check_gamma(gamma)?;
        Ok(DeviceConfig {
            epsilon,
            eta,
            gamma,
        })
    }

    /// Whether `(1+γ)^T > 1+ε`, the range where the Brownian bound holds.
    pub fn brownian_applicable(&self, t: f64) -> bool {
        growth::growth_minus_one(self.gamma, t) > self.epsilon
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("gamma must lie in (0,1), got {gamma}")))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("epsilon must be positive, got {epsilon}")))
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("eta must lie in (0,1), got {eta}")))
    }
}

/// A finite probe vector `x_1..x_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestVector {
    coords: Vec<f64>,
    norm_sq: f64,
}

impl TestVector {
    pub fn new(coords: Vec<f64>) -> Self {
        let norm_sq = coords.iter().map(|x| x * x).sum();
        TestVector { coords, norm_sq }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn is_null(&self) -> bool {
        self.norm_sq == 0.0
    }

    /// Coordinate `x_j`, 1-based.
    pub fn coord(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.coords.get(i)).copied()
    }
}

impl From<Vec<f64>> for TestVector {
    fn from(coords: Vec<f64>) -> Self {
        TestVector::new(coords)
    }
}

/// Decode the classic five-stack weighing: one coin from stack 1, two from
/// stack 2, .., five from stack 5, so the excess over 15 g is `γ·n` for
/// false stack `n`.
pub fn classical_weighting(measured_total: f64, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0) {
        return Err(Error::config(format!("gamma must be positive, got {gamma}")));
    }
    let units = (measured_total - 15.0 * BASE_WEIGHT) / gamma;
    let n = units.round();
    if (units - n).abs() > WEIGHING_TOLERANCE || !(1.0..=5.0).contains(&n) {
        return Err(Error::MalformedMeasurement(format!(
            "excess {units:.4}·gamma does not identify a stack in 1..=5"
        )));
    }
    Ok(n as usize)
}

/// Decode a weighing that takes `2^{i-1}` coins from stack `i`: the excess
/// over the true total, in units of `γ`, is the bitmask of false stacks.
/// Returns the 1-based false stacks in increasing order.
pub fn base2_weighting(measured_total: f64, n_stacks: usize, gamma: f64) -> Result<Vec<usize>> {
    if !(gamma > 0.0) {
        return Err(Error::config(format!("gamma must be positive, got {gamma}")));
    }
    if n_stacks == 0 || n_stacks > 52 {
        return Err(Error::config(format!(
            "base-2 weighing supports 1..=52 stacks, got {n_stacks}"
        )));
    }
    let true_total = ((1u64 << n_stacks) - 1) as f64 * BASE_WEIGHT;
    let units = (measured_total - true_total) / gamma;
    let k = units.round();
    let max = ((1u64 << n_stacks) - 1) as f64;
    if (units - k).abs() > WEIGHING_TOLERANCE || k < 0.0 || k > max {
        return Err(Error::MalformedMeasurement(format!(
            "excess {units:.4}·gamma is not a {n_stacks}-bit mask"
        )));
    }
    let mask = k as u64;
    Ok((1..=n_stacks).filter(|i| mask >> (i - 1) & 1 == 1).collect())
}

/// Value of `<Q^t x, x>`, with `overflow` set when it exceeds `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticForm {
    pub value: f64,
    pub overflow: bool,
}

/// `((1+γ)^t − 1)·x_j²` for the false stack inside the probe's prefix; zero
/// when every observed coin is true.
pub fn excess(system: &CoinSystem, x: &TestVector, t: u64) -> f64 {
    match system.false_stack().and_then(|j| x.coord(j)) {
        Some(xj) if xj != 0.0 && t > 0 => {
            growth::growth_minus_one(system.gamma(), t as f64) * xj * xj
        }
        _ => 0.0,
    }
}

fn check_dimension(system: &CoinSystem, x: &TestVector) -> Result<()> {
    match system.stacks() {
        Stacks::Finite(n) if x.len() > n => Err(Error::DimensionMismatch {
            probe: x.len(),
            stacks: n,
        }),
        _ => Ok(()),
    }
}

pub fn quadratic_form(system: &CoinSystem, x: &TestVector, t: u64) -> Result<QuadraticForm> {
    check_dimension(system, x)?;
    let value = x.norm_sq() + excess(system, x, t);
    if value.is_finite() {
        Ok(QuadraticForm {
            value,
            overflow: false,
        })
    } else {
        Ok(QuadraticForm {
            value: f64::INFINITY,
            overflow: true,
        })
    }
}

/// Whether `<Q^t x, x> > (1+ε)‖x‖²`, evaluated in the equivalent cone form
/// `((1+γ)^t − 1)·x_j² > ε‖x‖²`. An all-true system has zero excess and
/// never clicks.
pub fn clicks(system: &CoinSystem, x: &TestVector, t: u64, epsilon: f64) -> Result<bool> {
    check_dimension(system, x)?;
    if x.is_null() {
        return Err(Error::NullProbe);
    }
    Ok(excess(system, x, t) > epsilon * x.norm_sq())
}

/// First integer time at which a probe with `x_j ≠ 0` makes a system with
/// false stack `j` click.
pub fn first_click_time(x: &TestVector, j: usize, gamma: f64, epsilon: f64) -> Result<u64> {
    check_gamma(gamma)?;
    check_epsilon(epsilon)?;
    let xj = x.coord(j).ok_or(Error::IndexError {
        index: j,
        len: x.len(),
    })?;
    if xj == 0.0 {
        return Err(Error::NeverClicks(j));
    }
    let threshold = epsilon * x.norm_sq();
    let xj2 = xj * xj;
    let crossed = |t: u64| growth::growth_minus_one(gamma, t as f64) * xj2 > threshold;

    let ratio = threshold / xj2;
    let estimate = growth::log_one_plus_gamma_of_one_plus(gamma, ratio);
    if !estimate.is_finite() || estimate > 1e18 {
        return Err(Error::numerical(
            "first_click_time",
            format!("crossing time {estimate} is not representable"),
        ));
    }
    // The closed form can be off by one at integer boundaries; settle it
    // against the predicate itself.
    let mut t = estimate.floor() as u64 + 1;
    while t > 1 && crossed(t - 1) {
        t -= 1;
    }
    while !crossed(t) {
        t += 1;
    }
    Ok(t)
}

/// Computable duration after which the Gaussian indistinguishable set of an
/// `N`-stack system has probability at most `η`:
/// `log_{1+γ}(3⁴N³ε/(η⁴π²) + 1)`.
pub fn t_eta_finite(n_stacks: usize, epsilon: f64, gamma: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    if n_stacks == 0 {
        return Err(Error::config("n_stacks must be at least 1"));
    }
    let n = n_stacks as f64;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let arg = 81.0 * n * n * n * epsilon / (eta.powi(4) * pi2);
    Ok(growth::log_one_plus_gamma_of_one_plus(gamma, arg))
}

/// `t_eta_finite` evaluated with `precision_bits` of binary precision from
/// exact decimal inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedValue {
    pub decimal: String,
    pub value: f64,
}

pub fn t_eta_finite_extended(
    n_stacks: u64,
    epsilon: &str,
    gamma: &str,
    eta: &str,
    precision_bits: usize,
) -> Result<ExtendedValue> {
    let parse_f64 = |name: &str, s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config(format!("{name} is not a decimal number: {s:?}")))
    };
    check_epsilon(parse_f64("epsilon", epsilon)?)?;
    check_gamma(parse_f64("gamma", gamma)?)?;
    check_eta(parse_f64("eta", eta)?)?;
    if n_stacks == 0 {
        return Err(Error::config("n_stacks must be at least 1"));
    }

    let p = precision_bits.max(64) + 64;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().map_err(|e| Error::numerical("t_eta_finite_extended", format!("{e:?}")))?;
    let dec = |s: &str, cc: &mut Consts| BigFloat::parse(s.trim(), Radix::Dec, p, rm, cc);

    let eps = dec(epsilon, &mut cc);
    let gam = dec(gamma, &mut cc);
    let et = dec(eta, &mut cc);
    let one = BigFloat::from_u64(1, p);
    let n = BigFloat::from_u64(n_stacks, p);
    let pi = cc.pi(p, rm);

    let num = BigFloat::from_u64(81, p)
        .mul(&n.powi(3, p, rm), p, rm)
        .mul(&eps, p, rm);
    let den = et.powi(4, p, rm).mul(&pi.powi(2, p, rm), p, rm);
    let arg = num.div(&den, p, rm).add(&one, p, rm);
    let t = arg
        .ln(p, rm, &mut cc)
        .div(&one.add(&gam, p, rm).ln(p, rm, &mut cc), p, rm);
    if t.is_nan() {
        return Err(Error::numerical("t_eta_finite_extended", "NaN result"));
    }
    let decimal = t
        .format(Radix::Dec, rm, &mut cc)
        .map_err(|e| Error::numerical("t_eta_finite_extended", format!("{e:?}")))?;
    let value = decimal
        .parse::<f64>()
        .map_err(|_| Error::numerical("t_eta_finite_extended", format!("unparsable {decimal}")))?;
    Ok(ExtendedValue { decimal, value })
}
