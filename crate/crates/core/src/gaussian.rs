//! Finite-dimensional device with Gaussian probes.
//!
//! Probes are drawn from the centred Gaussian with covariance `½I`. When
//! stack `j` is false the indistinguishable set at time `t` is the cone
//! `((1+γ)^t − 1)·x_j² ≤ ε‖x‖²` around the plane `x_j = 0`; its probability
//! is bounded by splitting at radius `M` and optimising `M`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::coin::{self, CoinSystem, Stacks, TestVector};
use crate::error::{Error, Result};
use crate::growth;
use crate::mc::{self, McEstimate, TrialRng};

/// One `Normal(0, 1/2)` variate.
#[inline]
pub fn normal_half<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal) * FRAC_1_SQRT_2
}

/// Stream of Gaussian probes; draw `k` comes from trial stream `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussianSampler {
    dimension: usize,
    seed: u64,
    trial_counter: u64,
}

impl GaussianSampler {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("probe dimension must be at least 1"));
        }
        Ok(GaussianSampler {
            dimension,
            seed,
            trial_counter: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial_counter(&self) -> u64 {
        self.trial_counter
    }

    pub fn sample_test_vector(&mut self) -> TestVector {
        let x = self.sample_at(self.trial_counter);
        self.trial_counter += 1;
        x
    }

    /// Replay draw `index` without touching the counter.
    pub fn sample_at(&self, index: u64) -> TestVector {
        draw(&mut mc::trial_rng(self.seed, index), self.dimension)
    }
}

fn draw(rng: &mut TrialRng, dimension: usize) -> TestVector {
    TestVector::new((0..dimension).map(|_| normal_half(rng)).collect())
}

/// Membership in `F_{ε,t}`: `<Q^t x, x> ≤ (1+ε)‖x‖²`. Exactly the negation
/// of [`coin::clicks`] for non-null probes; the null probe is a member.
pub fn in_indistinguishable_set(system: &CoinSystem, x: &TestVector, epsilon: f64, t: u64) -> bool {
    x.is_null() || !(coin::excess(system, x, t) > epsilon * x.norm_sq())
}

/// Small-norm part of the split: `2M√ε / (√π·√((1+γ)^t − 1))`.
pub fn bound_small_norm(epsilon: f64, gamma: f64, t: u64, m: f64) -> Result<f64> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    if t == 0 {
        return Err(Error::DegenerateTime);
    }
    if !(m > 0.0) {
        return Err(Error::config(format!("radius M must be positive, got {m}")));
    }
    let ln = std::f64::consts::LN_2 + m.ln() + 0.5 * epsilon.ln()
        - 0.5 * PI.ln()
        - 0.5 * growth::ln_growth_minus_one(gamma, t as f64);
    Ok(ln.exp())
}

/// Large-norm part: `N√N / (M√π) · e^{−M²/N}`.
pub fn bound_large_norm(n_stacks: usize, m: f64) -> Result<f64> {
    if n_stacks == 0 {
        return Err(Error::config("n_stacks must be at least 1"));
    }
    if !(m > 0.0) {
        return Err(Error::config(format!("radius M must be positive, got {m}")));
    }
    let n = n_stacks as f64;
    Ok(n * n.sqrt() / (m * PI.sqrt()) * (-m * m / n).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundBreakdown {
    /// Split radius `N^{3/4}·(((1+γ)^t − 1)/ε)^{1/4}`.
    pub m_star: f64,
    pub small_norm_term: f64,
    pub large_norm_term: f64,
    pub total: f64,
    /// `3N^{3/4}ε^{1/4} / (√π((1+γ)^t − 1)^{1/4})`, clamped to `[0, 1]`.
    pub simplified: f64,
    pub simplified_raw: f64,
}

pub fn bound_total(n_stacks: usize, epsilon: f64, gamma: f64, t: u64) -> Result<BoundBreakdown> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    if n_stacks == 0 {
        return Err(Error::config("n_stacks must be at least 1"));
    }
    if t == 0 {
        return Err(Error::DegenerateTime);
    }
    let n = n_stacks as f64;
    let ln_g = growth::ln_growth_minus_one(gamma, t as f64);
    let ln_m = 0.75 * n.ln() + 0.25 * (ln_g - epsilon.ln());
    let m_star = ln_m.exp();
    let small = bound_small_norm(epsilon, gamma, t, m_star)?;
    let large = bound_large_norm(n_stacks, m_star)?;
    let simplified_raw = simplified_raw(n, epsilon, ln_g);
    Ok(BoundBreakdown {
        m_star,
        small_norm_term: small,
        large_norm_term: large,
        total: small + large,
        simplified: simplified_raw.clamp(0.0, 1.0),
        simplified_raw,
    })
}

fn simplified_raw(n: f64, epsilon: f64, ln_g: f64) -> f64 {
    (3f64.ln() + 0.75 * n.ln() + 0.25 * epsilon.ln() - 0.5 * PI.ln() - 0.25 * ln_g).exp()
}

/// Unclamped `3N^{3/4}ε^{1/4} / (√π((1+γ)^t − 1)^{1/4})` at a real duration.
pub fn simplified_bound(n_stacks: usize, epsilon: f64, gamma: f64, t: f64) -> Result<f64> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    if n_stacks == 0 {
        return Err(Error::config("n_stacks must be at least 1"));
    }
    if !(t > 0.0) {
        return Err(Error::DegenerateTime);
    }
    Ok(simplified_raw(n_stacks as f64, epsilon, growth::ln_growth_minus_one(gamma, t)))
}

fn probe_dimension(system: &CoinSystem) -> Result<usize> {
    match system.stacks() {
        Stacks::Finite(n) => Ok(n),
        Stacks::Countable => Err(Error::config(
            "Gaussian probes need a finite number of stacks",
        )),
    }
}

/// Fraction of Gaussian probes lying in `F_{ε,t}` for a system with a false
/// stack.
pub fn mc_indistinguishable_probability(
    system: &CoinSystem,
    epsilon: f64,
    t: u64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    coin::check_epsilon(epsilon)?;
    if system.false_stack().is_none() {
        return Err(Error::DegenerateExperiment(
            "all coins are true: F is the whole space with probability 1".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let dim = probe_dimension(system)?;
    let counter = mc::count_hits(trials, seed, |rng, _| {
        let x = draw(rng, dim);
        in_indistinguishable_set(system, &x, epsilon, t)
    });
    Ok(counter.estimate(seed))
}

/// Count of clicks on an all-true system; must be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SoundnessTally {
    pub trials: u64,
    pub clicks: u64,
}

/// Probe an all-true `n`-stack system with `trials` Gaussian vectors, trial
/// `i` at time `times[i % times.len()]`, and count clicks.
pub fn soundness_sweep(
    n_stacks: usize,
    gamma: f64,
    epsilon: f64,
    times: &[u64],
    trials: u64,
    seed: u64,
) -> Result<SoundnessTally> {
    if times.is_empty() {
        return Err(Error::config("soundness sweep needs at least one time"));
    }
    let system = CoinSystem::all_true(n_stacks, gamma)?;
    coin::check_epsilon(epsilon)?;
    let tally = mc::count_hits(trials, seed, |rng, i| {
        let x = draw(rng, n_stacks);
        let t = times[(i % times.len() as u64) as usize];
        // null probes have measure zero and are not valid device inputs
        !x.is_null() && coin::clicks(&system, &x, t, epsilon).unwrap_or(false)
    });
    Ok(SoundnessTally {
        trials: tally.trials,
        clicks: tally.hits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinitePosterior {
    /// `P(N̄) / (P(N̄) + (1 − P(N̄))·Prob(F))`
    pub posterior: f64,
    /// `1 − ((1 − P(N̄))/P(N̄))·Prob(F)`, valid for any prior.
    pub lower_bound: f64,
    /// `1 − N·Prob(F)`, the lower bound under the uniform prior `1/(N+1)`.
    pub uniform_lower_bound: f64,
}

/// Uniform prior over "no false stack" and "stack j false", `j = 1..N`.
pub fn uniform_prior(n_stacks: usize) -> f64 {
    1.0 / (n_stacks as f64 + 1.0)
}

/// Posterior probability that every coin is true after the device stayed
/// silent, given the probability `prob_f` of the indistinguishable set.
pub fn bayes_posterior_finite(prior_no_false: f64, prob_f: f64, n_stacks: usize) -> Result<FinitePosterior> {
    if !(prior_no_false > 0.0 && prior_no_false < 1.0) {
        return Err(Error::config(format!(
            "prior must lie in (0,1), got {prior_no_false}"
        )));
    }
    if !(0.0..=1.0).contains(&prob_f) {
        return Err(Error::config(format!(
            "probability of F must lie in [0,1], got {prob_f}"
        )));
    }
    let p = prior_no_false;
    Ok(FinitePosterior {
        posterior: p / (p + (1.0 - p) * prob_f),
        lower_bound: 1.0 - (1.0 - p) / p * prob_f,
        uniform_lower_bound: 1.0 - n_stacks as f64 * prob_f,
    })
}
