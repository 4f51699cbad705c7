//! Brownian probes on two discrete time scales.
//!
//! Probes are paths `x_0 = 0, x_1, .., x_N` of a Brownian particle whose
//! transition density over a step of length `δ` is the heat kernel
//! `e^{−u²/δ}/√(πδ)`, so increments are `Normal(0, δ/2)`. The equidistant
//! scale (`δ_m = 1`) carries the measure `W`; a perturbed scale with steps
//! `δ̃_m < 1`, `Σ(1 − δ̃_m) < ∞`, carries `W̃`, and
//!
//! ```text
//! dW̃/dW = exp(−Σ_m ((1 − δ̃_m)/δ̃_m)·|x_m − x_{m−1}|²) / Π_m √δ̃_m
//! ```
//!
//! The device fails at time `T` on the set
//! `F = {((1+γ)^T − 1)|x_j|² < ε‖x‖₁²}`, whose `W̃`-measure is at most
//! `√(ε / (((1+γ)^T − 1 − ε)·Π δ̃_m))`.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coin;
use crate::error::{Error, Result};
use crate::gaussian::{self, normal_half};
use crate::growth;
use crate::mc::{self, HitCounter, McEstimate, TrialRng, WeightedEstimate, WeightedMoments};
use crate::quadrature::Quadrature;

/// Default truncation length of Brownian probes.
pub const DEFAULT_LENGTH: usize = 64;

/// Minimum effective sample size accepted from the reweighted estimator.
pub const MIN_ESS: f64 = 100.0;

/// Step lengths of a discrete time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScale {
    /// `δ_m = 1`.
    Equidistant,
    /// `δ̃_m = e^{−2^{−m}}`, with `Π δ̃_m = e^{−1}`.
    Exp2,
    /// Explicit `δ̃_1, δ̃_2, ..`, followed by unit steps.
    Custom(Vec<f64>),
}

impl TimeScale {
    /// Look a generator up by name (`"equidistant"`, `"exp2"`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "equidistant" => Ok(TimeScale::Equidistant),
            "exp2" => Ok(TimeScale::Exp2),
            other => Err(Error::config(format!("unknown time scale {other:?}"))),
        }
    }

    pub fn custom(deltas: Vec<f64>) -> Result<Self> {
        let s = TimeScale::Custom(deltas);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let TimeScale::Custom(d) = self {
            if let Some((m, v)) = d.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::config(format!(
                    "custom step {} must lie in (0,1], got {v}",
                    m + 1
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            TimeScale::Equidistant => "equidistant",
            TimeScale::Exp2 => "exp2",
            TimeScale::Custom(_) => "custom",
        }
    }

    pub fn is_perturbed(&self) -> bool {
        match self {
            TimeScale::Equidistant => false,
            TimeScale::Exp2 => true,
            TimeScale::Custom(d) => d.iter().any(|&v| v < 1.0),
        }
    }

    /// Step length `δ_m`, `m >= 1`.
    pub fn delta(&self, m: usize) -> f64 {
        debug_assert!(m >= 1);
        match self {
            TimeScale::Equidistant => 1.0,
            TimeScale::Exp2 => (-exp2_neg(m)).exp(),
            TimeScale::Custom(d) => d.get(m - 1).copied().unwrap_or(1.0),
        }
    }

    /// `ln δ_m`.
    pub fn ln_delta(&self, m: usize) -> f64 {
        match self {
            TimeScale::Equidistant => 0.0,
            TimeScale::Exp2 => -exp2_neg(m),
            TimeScale::Custom(d) => d.get(m - 1).map_or(0.0, |v| v.ln()),
        }
    }

    /// Sobolev weight `(1 − δ_m)/δ_m`.
    pub fn weight(&self, m: usize) -> f64 {
        match self {
            TimeScale::Equidistant => 0.0,
            TimeScale::Exp2 => exp2_neg(m).exp_m1(),
            TimeScale::Custom(d) => d.get(m - 1).map_or(0.0, |v| (1.0 - v) / v),
        }
    }

    /// Time `t_l = Σ_{m ≤ l} δ_m`.
    pub fn time(&self, l: usize) -> f64 {
        (1..=l).map(|m| self.delta(m)).sum()
    }

    /// `Σ_{m ≤ n} ln δ_m`.
    pub fn ln_product(&self, n: usize) -> f64 {
        match self {
            TimeScale::Equidistant => 0.0,
            _ => (1..=n).map(|m| self.ln_delta(m)).sum(),
        }
    }

    /// Upper bound on `Σ_{m > n} (1 − δ_m)`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        match self {
            TimeScale::Equidistant => 0.0,
            // 1 − e^{−2^{−m}} ≤ 2^{−m}
            TimeScale::Exp2 => exp2_neg(n),
            TimeScale::Custom(d) => d.iter().skip(n).map(|v| 1.0 - v).sum(),
        }
    }

    /// `ln Π_{m ≥ 1} δ_m`, summed until the remaining tail is below
    /// rounding.
    pub fn ln_product_infinite(&self) -> f64 {
        match self {
            TimeScale::Equidistant => 0.0,
            TimeScale::Custom(d) => self.ln_product(d.len()),
            TimeScale::Exp2 => {
                let mut n = 1;
                while self.tail_bound(n) > 1e-3 * f64::EPSILON {
                    n += 1;
                }
                self.ln_product(n)
            }
        }
    }
}

/// `2^{−m}`
fn exp2_neg(m: usize) -> f64 {
    (-(m.min(1100) as f64)).exp2()
}

/// Per-step constants of a scale over a truncation length.
#[derive(Debug, Clone)]
struct ScaleTable {
    sd: Vec<f64>,
    weights: Vec<f64>,
    times: Vec<f64>,
    ln_product: f64,
}

impl ScaleTable {
    fn new(scale: &TimeScale, n: usize) -> Self {
        let mut t = 0.0;
        let mut times = Vec::with_capacity(n);
        for m in 1..=n {
            t += scale.delta(m);
            times.push(t);
        }
        ScaleTable {
            sd: (1..=n).map(|m| scale.delta(m).sqrt()).collect(),
            weights: (1..=n).map(|m| scale.weight(m)).collect(),
            times,
            ln_product: scale.ln_product(n),
        }
    }

    fn sample(&self, rng: &mut TrialRng) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.sd.len() + 1);
        let mut pos = 0.0;
        x.push(pos);
        for &sd in &self.sd {
            pos += sd * normal_half(rng);
            x.push(pos);
        }
        x
    }

    fn weighted_norm(&self, x: &[f64]) -> f64 {
        x.windows(2)
            .zip(&self.weights)
            .map(|(w, &c)| c * (w[1] - w[0]) * (w[1] - w[0]))
            .sum()
    }

    fn quasi_loop(&self, x: &[f64], c: f64) -> bool {
        c.is_infinite() && c > 0.0
            || x[1..].iter().zip(&self.times).all(|(&xm, &tm)| xm * xm / tm < c)
    }
}

/// A truncated Brownian path with `x_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<'a> {
    scale: &'a TimeScale,
    positions: Vec<f64>,
}

impl<'a> Trajectory<'a> {
    /// Path through the given positions `x_1..x_N`; `x_0 = 0` is prepended.
    pub fn from_positions(scale: &'a TimeScale, xs: &[f64]) -> Self {
        let mut positions = Vec::with_capacity(xs.len() + 1);
        positions.push(0.0);
        positions.extend_from_slice(xs);
        Trajectory { scale, positions }
    }

    pub fn scale(&self) -> &TimeScale {
        self.scale
    }

    /// Positions `x_0..x_N`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }
}

/// Heat kernel `G(x, t | y, s) = e^{−|x−y|²/(t−s)} / √(π(t−s))`.
pub fn green(x: f64, t: f64, y: f64, s: f64) -> Result<f64> {
    if !(t > s) {
        return Err(Error::InvalidTimes { t, s });
    }
    let dt = t - s;
    let d = x - y;
    Ok((-d * d / dt).exp() / (PI * dt).sqrt())
}

pub fn sample_trajectory(scale: &TimeScale, length: usize, seed: u64) -> Result<Trajectory<'_>> {
    let mut rng = mc::trial_rng(seed, 0);
    sample_trajectory_with(&mut rng, scale, length)
}

/// Sample a path of `length` steps with `Normal(0, δ_m/2)` increments.
pub fn sample_trajectory_with<'a>(
    rng: &mut TrialRng,
    scale: &'a TimeScale,
    length: usize,
) -> Result<Trajectory<'a>> {
    if length == 0 {
        return Err(Error::config("trajectory length must be at least 1"));
    }
    scale.validate()?;
    let table = ScaleTable::new(scale, length);
    Ok(Trajectory {
        scale,
        positions: table.sample(rng),
    })
}

/// An open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub lo: f64,
    pub hi: f64,
}

impl Gate {
    pub const FULL: Gate = Gate {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::config(format!("empty gate ({lo}, {hi})")));
        }
        Ok(Gate { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Cylinder set `{x : x_{l_k} ∈ Δ_k}` over step indices `l_1 < .. < l_N`.
/// Times are read off the scale, `t_k = t_{l_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    steps: Vec<usize>,
    gates: Vec<Gate>,
}

impl GateSpec {
    pub fn new(steps: Vec<usize>, gates: Vec<Gate>) -> Result<Self> {
        if steps.is_empty() || steps.len() != gates.len() {
            return Err(Error::config("gate spec needs one gate per step, at least one"));
        }
        if steps[0] == 0 || steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("gate steps must be strictly increasing and >= 1"));
        }
        for g in &gates {
            Gate::new(g.lo, g.hi)?;
        }
        Ok(GateSpec { steps, gates })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn contains(&self, traj: &Trajectory<'_>) -> bool {
        self.steps
            .iter()
            .zip(&self.gates)
            .all(|(&l, g)| traj.positions.get(l).is_some_and(|&x| g.contains(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderMeasure {
    pub value: f64,
    pub numerator: f64,
    /// The ungated iterated integral; equals 1 by kernel normalisation.
    pub denominator: f64,
}

/// Largest gate count handled by nested quadrature.
pub const MAX_QUADRATURE_GATES: usize = 3;

/// Tolerance on the ungated iterated integral against 1.
pub const NORMALISATION_TOL: f64 = 1e-9;

/// `W^N(C)` as the ratio of gated and ungated iterated kernel integrals.
pub fn cylinder_measure(spec: &GateSpec, scale: &TimeScale) -> Result<CylinderMeasure> {
    if spec.steps.len() > MAX_QUADRATURE_GATES {
        return Err(Error::config(format!(
            "quadrature handles at most {MAX_QUADRATURE_GATES} gates, got {}",
            spec.steps.len()
        )));
    }
    scale.validate()?;
    let times: Vec<f64> = spec.steps.iter().map(|&l| scale.time(l)).collect();
    let numerator = iterated(&times, &spec.gates, 0, 0.0, 0.0)?;
    let full = vec![Gate::FULL; spec.gates.len()];
    let denominator = iterated(&times, &full, 0, 0.0, 0.0)?;
    if (denominator - 1.0).abs() > NORMALISATION_TOL {
        return Err(Error::numerical(
            "cylinder_measure",
            format!("ungated integral {denominator} differs from 1"),
        ));
    }
    Ok(CylinderMeasure {
        value: (numerator / denominator).clamp(0.0, 1.0),
        numerator,
        denominator,
    })
}

/// `∫_{Δ_k} G(x, t_k | x_prev, t_prev) · I_{k+1}(x) dx`, `I_N = 1`.
fn iterated(times: &[f64], gates: &[Gate], k: usize, x_prev: f64, t_prev: f64) -> Result<f64> {
    if k == times.len() {
        return Ok(1.0);
    }
    let dt = times[k] - t_prev;
    // e^{−u²/dt} < e^{−1600} beyond 40√dt
    let reach = 40.0 * dt.sqrt();
    let lo = gates[k].lo.max(x_prev - reach);
    let hi = gates[k].hi.min(x_prev + reach);
    if !(lo < hi) {
        return Ok(0.0);
    }
    let failure: Cell<Option<Error>> = Cell::new(None);
    let integrand = |x: f64| -> f64 {
        let g = green(x, times[k], x_prev, t_prev).unwrap_or(0.0);
        match iterated(times, gates, k + 1, x, times[k]) {
            Ok(inner) => g * inner,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let q = Quadrature::new(1e-13, 1e-12).with_initial_segments(8);
    let r = q.integrate(integrand, lo, hi)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r.value)
}

/// Empirical frequency of a cylinder set.
pub fn mc_cylinder_frequency(
    spec: &GateSpec,
    scale: &TimeScale,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    scale.validate()?;
    let length = *spec.steps.last().expect("validated non-empty");
    let table = ScaleTable::new(scale, length);
    Ok(mc::count_hits(trials, seed, |rng, _| {
        let traj = Trajectory {
            scale,
            positions: table.sample(rng),
        };
        spec.contains(&traj)
    })
    .estimate(seed))
}

/// `|x|₁² = Σ |x_m − x_{m−1}|²`.
pub fn sobolev_norm_sq(traj: &Trajectory<'_>) -> f64 {
    traj.increments().map(|d| d * d).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub value: f64,
    /// Set when every weight over the path vanishes (unperturbed scale).
    pub zero_weights: bool,
}

/// `‖x‖₁² = Σ ((1 − δ̃_m)/δ̃_m)·|x_m − x_{m−1}|²` with weights from `scale`.
pub fn weighted_sobolev_norm_sq(traj: &Trajectory<'_>, scale: &TimeScale) -> WeightedNorm {
    let mut zero_weights = true;
    let value = traj
        .increments()
        .enumerate()
        .map(|(i, d)| {
            let w = scale.weight(i + 1);
            zero_weights &= w == 0.0;
            w * d * d
        })
        .sum();
    WeightedNorm {
        value,
        zero_weights,
    }
}

/// Whether `max_m x_m²/t_m < C` along the path's own time scale.
pub fn is_quasi_loop(traj: &Trajectory<'_>, c: f64) -> bool {
    let table = ScaleTable::new(traj.scale, traj.len());
    table.quasi_loop(&traj.positions, c)
}

/// `ln(dW̃/dW)` truncated at the path length.
pub fn ln_radon_nikodym_weight(traj: &Trajectory<'_>, scale: &TimeScale) -> f64 {
    -weighted_sobolev_norm_sq(traj, scale).value - 0.5 * scale.ln_product(traj.len())
}

/// Density of `W̃` with respect to `W` on the first `N` steps:
/// `exp(−‖x‖₁²) / Π_{l ≤ N} √δ̃_l`. Its `W`-mean is exactly 1.
pub fn radon_nikodym_weight(traj: &Trajectory<'_>, scale: &TimeScale) -> f64 {
    ln_radon_nikodym_weight(traj, scale).exp()
}

fn indistinguishable(xj: f64, norm: f64, growth_m1: f64, epsilon: f64) -> bool {
    if xj == 0.0 {
        0.0 < epsilon * norm
    } else {
        growth_m1 * xj * xj < epsilon * norm
    }
}

/// Membership in `F = {((1+γ)^T − 1)|x_j|² < ε‖x‖₁²}`, the Sobolev norm
/// weighted by `scale`.
pub fn in_indistinguishable_brownian(
    traj: &Trajectory<'_>,
    scale: &TimeScale,
    j: usize,
    gamma: f64,
    epsilon: f64,
    t: f64,
) -> Result<bool> {
    if j == 0 || j > traj.len() {
        return Err(Error::IndexError {
            index: j,
            len: traj.len(),
        });
    }
    coin::check_gamma(gamma)?;
    coin::check_epsilon(epsilon)?;
    if !(t > 0.0) {
        return Err(Error::config(format!("duration must be positive, got {t}")));
    }
    let norm = weighted_sobolev_norm_sq(traj, scale).value;
    Ok(indistinguishable(
        traj.positions[j],
        norm,
        growth::growth_minus_one(gamma, t),
        epsilon,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerBound {
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
}

/// `√(ε / (((1+γ)^T − 1 − ε)·Π δ̃_m))`, for `(1+γ)^T > 1 + ε`.
pub fn wiener_bound(epsilon: f64, gamma: f64, t: f64, scale: &TimeScale) -> Result<WienerBound> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    scale.validate()?;
    let g = growth::growth_minus_one(gamma, t);
    if !(g > epsilon) {
        return Err(Error::BoundNotApplicable {
            growth: g,
            epsilon,
        });
    }
    let ln_excess = if g.is_finite() {
        (g - epsilon).ln()
    } else {
        growth::ln_growth_minus_one(gamma, t)
    };
    let raw = (0.5 * (epsilon.ln() - ln_excess - scale.ln_product_infinite())).exp();
    Ok(WienerBound {
        raw,
        value: raw.clamp(0.0, 1.0),
    })
}

/// `T_η = log_{1+γ}(ε/(η²·Π δ̃_m) + 1 + ε)`, the duration at which the
/// bound equals `η`.
pub fn t_eta_brownian(epsilon: f64, gamma: f64, eta: f64, scale: &TimeScale) -> Result<f64> {
    coin::check_epsilon(epsilon)?;
    coin::check_gamma(gamma)?;
    coin::check_eta(eta)?;
    scale.validate()?;
    let a = epsilon / (eta * eta * scale.ln_product_infinite().exp()) + epsilon;
    Ok(growth::log_one_plus_gamma_of_one_plus(gamma, a))
}

/// Which coordinate the indistinguishable set is tested on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FalseIndex {
    /// The known injected index.
    Fixed(usize),
    /// Every `j ≤ N`; the largest estimate is reported.
    Sup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerExperiment {
    pub false_index: FalseIndex,
    pub gamma: f64,
    pub epsilon: f64,
    pub t: f64,
    pub scale: TimeScale,
    pub length: usize,
    pub trials: u64,
    pub seed: u64,
    /// Quasi-loop constant; `+inf` admits every path.
    pub quasi_loop_c: f64,
}

impl WienerExperiment {
    pub fn new(j: usize, gamma: f64, epsilon: f64, t: f64, trials: u64, seed: u64) -> Self {
        WienerExperiment {
            false_index: FalseIndex::Fixed(j),
            gamma,
            epsilon,
            t,
            scale: TimeScale::Exp2,
            length: DEFAULT_LENGTH,
            trials,
            seed,
            quasi_loop_c: f64::INFINITY,
        }
    }
}

/// Tag separating the reweighted estimator's streams from the direct one.
const REWEIGHT_STREAM: u64 = 0x7265_7765_6967_6874;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerMcResult {
    /// Coordinate whose estimate is reported.
    pub j: usize,
    /// Paths sampled under `W̃`.
    pub direct: McEstimate,
    /// Paths sampled under `W`, reweighted by `dW̃/dW`.
    pub reweighted: WeightedEstimate,
    pub joint_std_err: f64,
    /// `|direct − reweighted| ≤ 3·joint_std_err`
    pub agree: bool,
    /// `None` when `(1+γ)^T ≤ 1 + ε`.
    pub bound: Option<WienerBound>,
}

/// Estimate `W̃(F)` on truncated paths by direct sampling and by
/// importance-reweighted equidistant sampling.
pub fn mc_wiener_indistinguishable(exp: &WienerExperiment) -> Result<WienerMcResult> {
    coin::check_gamma(exp.gamma)?;
    coin::check_epsilon(exp.epsilon)?;
    exp.scale.validate()?;
    if exp.length == 0 {
        return Err(Error::config("trajectory length must be at least 1"));
    }
    if exp.trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    if !(exp.t > 0.0) {
        return Err(Error::config(format!("duration must be positive, got {}", exp.t)));
    }
    let indices: Vec<usize> = match exp.false_index {
        FalseIndex::Fixed(j) => {
            if j == 0 || j > exp.length {
                return Err(Error::IndexError {
                    index: j,
                    len: exp.length,
                });
            }
            vec![j]
        }
        FalseIndex::Sup => (1..=exp.length).collect(),
    };

    let growth_m1 = growth::growth_minus_one(exp.gamma, exp.t);
    let perturbed = ScaleTable::new(&exp.scale, exp.length);
    let flat = ScaleTable::new(&TimeScale::Equidistant, exp.length);
    let k = indices.len();

    let direct: Vec<HitCounter> = mc::run_trials(
        exp.trials,
        exp.seed,
        || vec![HitCounter::default(); k],
        |acc, rng, _| {
            let x = perturbed.sample(rng);
            let norm = perturbed.weighted_norm(&x);
            let admitted = perturbed.quasi_loop(&x, exp.quasi_loop_c);
            for (c, &j) in acc.iter_mut().zip(&indices) {
                c.record(admitted && indistinguishable(x[j], norm, growth_m1, exp.epsilon));
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    );

    let rw_seed = mc::derive_seed(exp.seed, REWEIGHT_STREAM);
    let reweighted: Vec<WeightedMoments> = mc::run_trials(
        exp.trials,
        rw_seed,
        || vec![WeightedMoments::default(); k],
        |acc, rng, _| {
            let x = flat.sample(rng);
            let norm = perturbed.weighted_norm(&x);
            let w = (-norm - 0.5 * perturbed.ln_product).exp();
            let admitted = perturbed.quasi_loop(&x, exp.quasi_loop_c);
            for (m, &j) in acc.iter_mut().zip(&indices) {
                let hit = admitted && indistinguishable(x[j], norm, growth_m1, exp.epsilon);
                m.record(if hit { w } else { 0.0 }, w);
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    );

    // Report the coordinate with the largest direct estimate.
    let pick = (0..k)
        .max_by(|&a, &b| direct[a].hits.cmp(&direct[b].hits).then(b.cmp(&a)))
        .expect("at least one index");
    let d = direct[pick].estimate(exp.seed);
    let r = reweighted[pick].estimate(rw_seed);
    if r.ess < MIN_ESS {
        return Err(Error::UnstableWeights {
            ess: r.ess,
            min: MIN_ESS,
        });
    }
    let joint = (d.std_err * d.std_err + r.std_err * r.std_err).sqrt();
    let bound = match wiener_bound(exp.epsilon, exp.gamma, exp.t, &exp.scale) {
        Ok(b) => Some(b),
        Err(Error::BoundNotApplicable { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(WienerMcResult {
        j: indices[pick],
        direct: d,
        reweighted: r,
        joint_std_err: joint,
        agree: (d.p_hat - r.mean).abs() <= 3.0 * joint,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianPosterior {
    /// `1 − ((1 − P)/P)·bound`
    pub lower_bound: f64,
    /// Bayes value with the clamped bound as the probability of `F`.
    pub point: f64,
    pub bound: WienerBound,
}

/// Non-click posterior that the system holds no false coin.
pub fn bayes_posterior_brownian(
    prior_no_false: f64,
    epsilon: f64,
    gamma: f64,
    t: f64,
    scale: &TimeScale,
) -> Result<BrownianPosterior> {
    let bound = wiener_bound(epsilon, gamma, t, scale)?;
    let post = gaussian::bayes_posterior_finite(prior_no_false, bound.value, 1)?;
    let p = prior_no_false;
    Ok(BrownianPosterior {
        lower_bound: 1.0 - (1.0 - p) / p * bound.raw,
        point: post.posterior,
        bound,
    })
}

/// Fraction of paths that are quasi-loops with constant `c`.
pub fn mc_quasi_loop_fraction(
    scale: &TimeScale,
    length: usize,
    c: f64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if length == 0 || trials == 0 {
        return Err(Error::config("length and trials must be at least 1"));
    }
    scale.validate()?;
    let table = ScaleTable::new(scale, length);
    Ok(mc::count_hits(trials, seed, |rng, _| {
        let x = table.sample(rng);
        table.quasi_loop(&x, c)
    })
    .estimate(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionRow {
    pub level: f64,
    /// `P(max_{m ≤ N} |x_m| > a)`
    pub running_max: McEstimate,
    /// `P(|x_N| > a)`
    pub endpoint: McEstimate,
}

/// Running-maximum and endpoint exceedance frequencies of the same paths.
pub fn mc_reflection_tail(
    scale: &TimeScale,
    length: usize,
    levels: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<ReflectionRow>> {
    if length == 0 || trials == 0 {
        return Err(Error::config("length and trials must be at least 1"));
    }
    scale.validate()?;
    let table = ScaleTable::new(scale, length);
    let k = levels.len();
    let counts: Vec<(HitCounter, HitCounter)> = mc::run_trials(
        trials,
        seed,
        || vec![(HitCounter::default(), HitCounter::default()); k],
        |acc, rng, _| {
            let x = table.sample(rng);
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let end = x[length].abs();
            for ((mx, en), &a) in acc.iter_mut().zip(levels) {
                mx.record(peak > a);
                en.record(end > a);
            }
        },
        |a, b| {
            a.into_iter()
                .zip(b)
                .map(|((m1, e1), (m2, e2))| (m1.merge(m2), e1.merge(e2)))
                .collect()
        },
    );
    Ok(levels
        .iter()
        .zip(counts)
        .map(|(&level, (m, e))| ReflectionRow {
            level,
            running_max: m.estimate(seed),
            endpoint: e.estimate(seed),
        })
        .collect())
}
