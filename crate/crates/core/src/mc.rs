//! Reproducible parallel Monte Carlo plumbing.
//!
//! Trial `i` of an experiment seeded with `s` always draws from ChaCha8
//! stream `i` keyed by `s`, so estimates do not depend on how trials are
//! distributed over workers. Trials are processed in fixed-size chunks and
//! chunk results are merged in chunk order, which keeps floating-point
//! accumulations bit-identical across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

pub type TrialRng = ChaCha8Rng;

/// Trials per work unit.
pub const CHUNK: u64 = 4096;

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Independent generator for trial `index` of the experiment keyed by `seed`.
pub fn trial_rng(seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named sub-experiment, e.g. the second estimator of a
/// paired comparison. Distinct tags give unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Run `trials` trials in parallel chunks and fold the per-chunk
/// accumulators in chunk order.
pub fn run_trials<A, I, S, M>(trials: u64, seed: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &mut TrialRng, u64) + Sync,
    M: Fn(A, A) -> A,
{
    let chunks = trials.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            for i in lo..hi {
                let mut rng = trial_rng(seed, i);
                step(&mut acc, &mut rng, i);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(init(), merge)
}

/// Count trials for which `hit` returns true.
pub fn count_hits<F>(trials: u64, seed: u64, hit: F) -> HitCounter
where
    F: Fn(&mut TrialRng, u64) -> bool + Sync,
{
    run_trials(
        trials,
        seed,
        HitCounter::default,
        |acc, rng, i| acc.record(hit(rng, i)),
        HitCounter::merge,
    )
}

/// Associative tally of Bernoulli outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HitCounter {
    pub trials: u64,
    pub hits: u64,
}

impl HitCounter {
    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn merge(self, other: Self) -> Self {
        HitCounter {
            trials: self.trials + other.trials,
            hits: self.hits + other.hits,
        }
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        McEstimate::from_counts(self.trials, self.hits, seed)
    }
}

/// Binomial proportion estimate with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub std_err: f64,
    /// Normal-approximation 95% interval, clamped to `[0, 1]`.
    pub ci95: (f64, f64),
    /// One-sided 95% Clopper–Pearson upper limit.
    pub exact_upper95: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(trials: u64, hits: u64, seed: u64) -> Self {
        assert!(trials > 0, "an estimate needs at least one trial");
        assert!(hits <= trials);
        let n = trials as f64;
        let p_hat = hits as f64 / n;
        let std_err = (p_hat * (1.0 - p_hat) / n).sqrt();
        let half = Z95 * std_err;
        McEstimate {
            trials,
            hits,
            p_hat,
            std_err,
            ci95: ((p_hat - half).max(0.0), (p_hat + half).min(1.0)),
            exact_upper95: clopper_pearson_upper(trials, hits, 0.05),
            seed,
        }
    }

    /// `p_hat - k·std_err <= ceiling`
    pub fn within(&self, ceiling: f64, k: f64) -> bool {
        self.p_hat <= ceiling + k * self.std_err
    }
}

/// One-sided upper confidence limit `p_u` with `P(X <= hits | p_u) = alpha`.
pub fn clopper_pearson_upper(trials: u64, hits: u64, alpha: f64) -> f64 {
    if hits >= trials {
        return 1.0;
    }
    let n = trials as f64;
    if hits == 0 {
        return 1.0 - alpha.powf(1.0 / n);
    }
    // P(X <= k | p) = 1 - I_p(k+1, n-k), decreasing in p.
    let a = hits as f64 + 1.0;
    let b = n - hits as f64;
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (hits as f64 / n, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

/// Running first and second moments of a weighted estimator, plus the
/// weight sums needed for the effective sample size.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightedMoments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub weight_sum: f64,
    pub weight_sq_sum: f64,
}

impl WeightedMoments {
    /// Record a trial with importance weight `w` and contribution `value`.
    pub fn record(&mut self, value: f64, w: f64) {
        self.n += 1;
        self.sum += value;
        self.sum_sq += value * value;
        self.weight_sum += w;
        self.weight_sq_sum += w * w;
    }

    pub fn merge(self, o: Self) -> Self {
        WeightedMoments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            weight_sum: self.weight_sum + o.weight_sum,
            weight_sq_sum: self.weight_sq_sum + o.weight_sq_sum,
        }
    }

    pub fn estimate(&self, seed: u64) -> WeightedEstimate {
        assert!(self.n > 0, "an estimate needs at least one trial");
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let std_err = (var / n).sqrt();
        let ess = if self.weight_sq_sum > 0.0 {
            self.weight_sum * self.weight_sum / self.weight_sq_sum
        } else {
            0.0
        };
        WeightedEstimate {
            trials: self.n,
            mean,
            std_err,
            ci95: (mean - Z95 * std_err, mean + Z95 * std_err),
            ess,
            seed,
        }
    }
}

/// Importance-sampling estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedEstimate {
    pub trials: u64,
    pub mean: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    /// Kish effective sample size of the importance weights.
    pub ess: f64,
    pub seed: u64,
}
