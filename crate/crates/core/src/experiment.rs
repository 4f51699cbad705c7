//! File-driven experiments: JSON config in, CSV tables and a JSON summary
//! out.
//!
//! Reals are written in shortest round-trip form, so a config replayed
//! with the same seed yields byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coin::{self, CoinSystem, DeviceConfig};
use crate::error::Error;
use crate::gaussian;
use crate::halting::{self, DeviceRun, ProgramKind, ToyProgram, Verdict};
use crate::mc;
use crate::tentative::{self, Schedule};
use crate::wiener::{self, FalseIndex, TimeScale, WienerExperiment};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const SOUNDNESS_STREAM: u64 = 0x73_6f75_6e64;

/// A rejected config, addressed by line when the offending key is found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.origin, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.origin, self.message),
            _ => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(ConfigError),
    #[error("numerical failure in {operation}: {detail}")]
    Numerical { operation: String, detail: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }

    fn from_core(e: Error, operation: &str) -> Self {
        match e {
            Error::NumericalFailure { operation, detail } => RunError::Numerical {
                operation: operation.to_string(),
                detail,
            },
            e if e.is_numerical() => RunError::Numerical {
                operation: operation.to_string(),
                detail: e.to_string(),
            },
            e => RunError::Config(ConfigError {
                origin: "config".into(),
                line: None,
                column: None,
                message: format!("{operation}: {e}"),
            }),
        }
    }
}

fn half() -> f64 {
    0.5
}
fn one() -> usize {
    1
}
fn default_length() -> usize {
    wiener::DEFAULT_LENGTH
}
fn default_horizon() -> usize {
    wiener::DEFAULT_LENGTH
}
fn default_t_cap() -> f64 {
    1e4
}
fn exp2() -> TimeScale {
    TimeScale::Exp2
}
fn fixed_one() -> FalseIndex {
    FalseIndex::Fixed(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteParams {
    pub n: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub times: Vec<u64>,
    pub trials: u64,
    /// Adds a row at `ceil(T_η)`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "one")]
    pub false_stack: usize,
    #[serde(default = "half")]
    pub prior: f64,
    /// All-true probes swept over the same grid.
    #[serde(default)]
    pub soundness_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    pub n: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub times: Vec<u64>,
    #[serde(default)]
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledParams {
    pub n_grid: Vec<u64>,
    pub schedule: Schedule,
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(default = "half")]
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TentativeParams {
    /// Either `alpha`, or `epsilon`, `gamma` and `t` to derive it.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub coupled: Option<CoupledParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub trials: u64,
    /// Adds a row at `T_η`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "exp2")]
    pub scale: TimeScale,
    #[serde(default = "fixed_one")]
    pub false_index: FalseIndex,
    #[serde(default)]
    pub quasi_loop_c: Option<f64>,
    #[serde(default = "half")]
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaltingParams {
    pub program: ToyProgram,
    pub gamma: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub trials: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Defaults to `ceil(T_η)`.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_t_cap")]
    pub t_cap: f64,
    #[serde(default = "exp2")]
    pub scale: TimeScale,
    #[serde(default = "half")]
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Finite(FiniteParams),
    Bounds(BoundsParams),
    Tentative(TentativeParams),
    Brownian(BrownianParams),
    Halting(HaltingParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Finite(_) => "finite",
            Experiment::Bounds(_) => "bounds",
            Experiment::Tentative(_) => "tentative",
            Experiment::Brownian(_) => "brownian",
            Experiment::Halting(_) => "halting",
        }
    }

    fn trials_mut(&mut self) -> Option<&mut u64> {
        match self {
            Experiment::Finite(p) => Some(&mut p.trials),
            Experiment::Brownian(p) => Some(&mut p.trials),
            Experiment::Halting(p) => Some(&mut p.trials),
            Experiment::Bounds(_) | Experiment::Tentative(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Required, here or as an override.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub trials: Option<u64>,
}

/// A config ready to run, with its source kept for error addressing.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub output: PathBuf,
}

pub fn parse_config(src: &str, origin: &str) -> Result<ExperimentConfig, RunError> {
    serde_json::from_str(src).map_err(|e| {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        // Flattened sections are buffered, so data errors carry the position
        // of the enclosing object; point at the named key instead when possible.
        let key_line = match e.classify() {
            serde_json::error::Category::Data => unknown_key(&message).and_then(|k| locate(src, k)),
            _ => None,
        };
        RunError::Config(ConfigError {
            origin: origin.to_string(),
            line: Some(key_line.unwrap_or(e.line())),
            column: key_line.is_none().then(|| e.column()),
            message,
        })
    })
}

fn unknown_key(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

/// Parse, apply overrides and validate.
pub fn load_config(src: &str, origin: &str, overrides: &Overrides) -> Result<LoadedConfig, RunError> {
    let mut config = parse_config(src, origin)?;
    if let Some(s) = overrides.seed {
        config.seed = Some(s);
    }
    if let Some(o) = &overrides.output {
        config.output = Some(o.clone());
    }
    if let (Some(t), Some(slot)) = (overrides.trials, config.experiment.trials_mut()) {
        *slot = t;
    }
    let located = |field: &str, message: String| {
        RunError::Config(ConfigError {
            origin: origin.to_string(),
            line: locate(src, field),
            column: None,
            message,
        })
    };
    let seed = config
        .seed
        .ok_or_else(|| located("seed", "a seed is required (config \"seed\" or --seed)".into()))?;
    let output = config.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    validate(&config.experiment).map_err(|(field, msg)| located(field, msg))?;
    Ok(LoadedConfig {
        config,
        seed,
        output,
    })
}

/// 1-based line of the first occurrence of `"field"` in `src`.
fn locate(src: &str, field: &str) -> Option<usize> {
    let key = format!("\"{field}\"");
    src.lines().position(|l| l.contains(&key)).map(|i| i + 1)
}

type Invalid = (&'static str, String);

fn check(field: &'static str, r: crate::Result<()>) -> Result<(), Invalid> {
    r.map_err(|e| (field, e.to_string()))
}

fn need(field: &'static str, ok: bool, msg: &str) -> Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err((field, msg.to_string()))
    }
}

fn check_prior(p: f64) -> Result<(), Invalid> {
    need("prior", p > 0.0 && p < 1.0, "prior must lie in (0,1)")
}

fn validate(exp: &Experiment) -> Result<(), Invalid> {
    match exp {
        Experiment::Finite(p) => {
            need("n", p.n >= 1, "n must be at least 1")?;
            check("gamma", coin::check_gamma(p.gamma))?;
            check("epsilon", coin::check_epsilon(p.epsilon))?;
            need("times", !p.times.is_empty(), "times must not be empty")?;
            need("times", p.times.iter().all(|&t| t > 0), "times must be positive")?;
            need("trials", p.trials >= 1, "trials must be at least 1")?;
            need("false_stack", (1..=p.n).contains(&p.false_stack), "false_stack must lie in 1..=n")?;
            if let Some(eta) = p.eta {
                check("eta", coin::check_eta(eta))?;
            }
            check_prior(p.prior)
        }
        Experiment::Bounds(p) => {
            need("n", p.n >= 1, "n must be at least 1")?;
            check("gamma", coin::check_gamma(p.gamma))?;
            check("epsilon", coin::check_epsilon(p.epsilon))?;
            need("times", p.times.iter().all(|&t| t > 0), "times must be positive")?;
            p.etas.iter().try_for_each(|&e| check("etas", coin::check_eta(e)))
        }
        Experiment::Tentative(p) => {
            need("n_grid", !p.n_grid.is_empty(), "n_grid must not be empty")?;
            need("n_grid", p.n_grid.iter().all(|&n| n >= 1), "n_grid entries must be at least 1")?;
            match (p.alpha, p.epsilon, p.gamma, p.t) {
                (Some(a), None, None, None) => need("alpha", a > 0.0 && a.is_finite(), "alpha must be positive")?,
                (None, Some(e), Some(g), Some(t)) => {
                    check("epsilon", coin::check_epsilon(e))?;
                    check("gamma", coin::check_gamma(g))?;
                    need("t", t > 0.0, "t must be positive")?;
                }
                _ => return Err(("alpha", "give either alpha or all of epsilon, gamma, t".into())),
            }
            if let Some(c) = &p.coupled {
                need("n_grid", !c.n_grid.is_empty(), "coupled n_grid must not be empty")?;
                need(
                    "n_grid",
                    c.n_grid.windows(2).all(|w| w[0] < w[1]),
                    "coupled n_grid must be strictly increasing",
                )?;
                check("epsilon", coin::check_epsilon(c.epsilon))?;
                check("gamma", coin::check_gamma(c.gamma))?;
                check_prior(c.prior)?;
            }
            Ok(())
        }
        Experiment::Brownian(p) => {
            check("gamma", coin::check_gamma(p.gamma))?;
            check("epsilon", coin::check_epsilon(p.epsilon))?;
            need("times", p.times.iter().all(|&t| t > 0.0 && t.is_finite()), "times must be positive")?;
            need("trials", p.trials >= 1, "trials must be at least 1")?;
            need("length", p.length >= 1, "length must be at least 1")?;
            check("scale", p.scale.validate())?;
            if let FalseIndex::Fixed(j) = p.false_index {
                need("false_index", (1..=p.length).contains(&j), "false_index must lie in 1..=length")?;
            }
            if let Some(eta) = p.eta {
                check("eta", coin::check_eta(eta))?;
            }
            if let Some(c) = p.quasi_loop_c {
                need("quasi_loop_c", c > 0.0, "quasi_loop_c must be positive")?;
            }
            check_prior(p.prior)
        }
        Experiment::Halting(p) => {
            check("program", p.program.validate())?;
            check("gamma", DeviceConfig::new(p.epsilon, p.eta, p.gamma).map(|_| ()))?;
            need("trials", p.trials >= 1, "trials must be at least 1")?;
            need("horizon", p.horizon >= 1, "horizon must be at least 1")?;
            need(
                "horizon",
                p.horizon as u64 <= p.program.step_budget,
                "horizon exceeds the program's step budget",
            )?;
            check("scale", p.scale.validate())?;
            if let Some(t) = p.t {
                need("t", t > 0.0 && t <= p.t_cap, "t must lie in (0, t_cap]")?;
            }
            check_prior(p.prior)
        }
    }
}

/// One CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Shortest string that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

fn real(x: f64) -> String {
    fmt_real(x)
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn int<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

/// Tables and summary produced by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub summary: Value,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Write every table plus `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RunError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for t in &self.tables {
            let p = dir.join(t.file_name());
            fs::write(&p, t.to_csv()).map_err(io(&p))?;
            written.push(p);
        }
        let p = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        text.push('\n');
        fs::write(&p, text).map_err(io(&p))?;
        written.push(p);
        Ok(written)
    }
}

/// Run a validated experiment in memory.
pub fn run(loaded: &LoadedConfig) -> Result<RunOutput, RunError> {
    let seed = loaded.seed;
    let (tables, results) = match &loaded.config.experiment {
        Experiment::Finite(p) => run_finite(p, seed)?,
        Experiment::Bounds(p) => run_bounds(p)?,
        Experiment::Tentative(p) => run_tentative(p)?,
        Experiment::Brownian(p) => run_brownian(p, seed)?,
        Experiment::Halting(p) => run_halting(p, seed)?,
    };
    let files: Vec<String> = tables
        .iter()
        .map(Table::file_name)
        .chain(std::iter::once("summary.json".to_string()))
        .collect();
    let mut config = loaded.config.clone();
    config.seed = Some(seed);
    config.output = Some(loaded.output.clone());
    let summary = json!({
        "tool": "haltsim",
        "version": VERSION,
        "kind": loaded.config.experiment.kind(),
        "seed": seed,
        "config": config,
        "files": files,
        "results": results,
    });
    Ok(RunOutput { tables, summary })
}

type Produced = (Vec<Table>, Value);

fn core<T>(op: &str, r: crate::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::from_core(e, op))
}

fn run_finite(p: &FiniteParams, seed: u64) -> Result<Produced, RunError> {
    let system = core("coin system", CoinSystem::with_false(p.n, p.gamma, p.false_stack))?;
    let t_eta = p
        .eta
        .map(|eta| core("t_eta_finite", coin::t_eta_finite(p.n, p.epsilon, p.gamma, eta)))
        .transpose()?;
    let mut grid: Vec<(u64, &str)> = p.times.iter().map(|&t| (t, "grid")).collect();
    if let Some(te) = t_eta {
        grid.push((te.ceil() as u64, "t_eta"));
    }
    let mut table = Table::new(
        "finite",
        &[
            "role", "n", "gamma", "epsilon", "false_stack", "t", "trials", "seed", "hits",
            "estimate", "std_err", "exact_upper95", "bound_total", "bound_simplified",
            "within_bound", "posterior", "posterior_lower_bound",
        ],
    );
    let mut rows = Vec::new();
    for (i, &(t, role)) in grid.iter().enumerate() {
        let row_seed = mc::derive_seed(seed, i as u64);
        let est = core(
            "mc_indistinguishable_probability",
            gaussian::mc_indistinguishable_probability(&system, p.epsilon, t, p.trials, row_seed),
        )?;
        let b = core("bound_total", gaussian::bound_total(p.n, p.epsilon, p.gamma, t))?;
        let post = core(
            "bayes_posterior_finite",
            gaussian::bayes_posterior_finite(p.prior, b.simplified, p.n),
        )?;
        let within = est.within(b.simplified, 3.0);
        table.push(vec![
            role.into(),
            int(p.n),
            real(p.gamma),
            real(p.epsilon),
            int(p.false_stack),
            int(t),
            int(p.trials),
            int(row_seed),
            int(est.hits),
            real(est.p_hat),
            real(est.std_err),
            real(est.exact_upper95),
            real(b.total),
            real(b.simplified),
            int(within),
            real(post.posterior),
            real(post.lower_bound),
        ]);
        rows.push(json!({"role": role, "t": t, "estimate": est, "bound": b, "posterior": post, "within_bound": within}));
    }
    let soundness = if p.soundness_trials > 0 {
        let s = core(
            "soundness_sweep",
            gaussian::soundness_sweep(
                p.n,
                p.gamma,
                p.epsilon,
                &grid.iter().map(|g| g.0).collect::<Vec<_>>(),
                p.soundness_trials,
                mc::derive_seed(seed, SOUNDNESS_STREAM),
            ),
        )?;
        Some(s)
    } else {
        None
    };
    Ok((vec![table], json!({"t_eta": t_eta, "rows": rows, "soundness": soundness})))
}

fn run_bounds(p: &BoundsParams) -> Result<Produced, RunError> {
    let mut bounds = Table::new(
        "bounds",
        &[
            "n", "gamma", "epsilon", "t", "m_star", "small_norm_term", "large_norm_term",
            "total", "simplified", "simplified_raw",
        ],
    );
    let mut rows = Vec::new();
    for &t in &p.times {
        let b = core("bound_total", gaussian::bound_total(p.n, p.epsilon, p.gamma, t))?;
        bounds.push(vec![
            int(p.n),
            real(p.gamma),
            real(p.epsilon),
            int(t),
            real(b.m_star),
            real(b.small_norm_term),
            real(b.large_norm_term),
            real(b.total),
            real(b.simplified),
            real(b.simplified_raw),
        ]);
        rows.push(json!({"t": t, "bound": b}));
    }
    let mut etas = Table::new(
        "t_eta",
        &["n", "gamma", "epsilon", "eta", "t_eta", "t_eta_ceil", "simplified_at_ceil"],
    );
    let mut eta_rows = Vec::new();
    for &eta in &p.etas {
        let te = core("t_eta_finite", coin::t_eta_finite(p.n, p.epsilon, p.gamma, eta))?;
        let ceil = te.ceil() as u64;
        let b = core("bound_total", gaussian::bound_total(p.n, p.epsilon, p.gamma, ceil.max(1)))?;
        etas.push(vec![
            int(p.n),
            real(p.gamma),
            real(p.epsilon),
            real(eta),
            real(te),
            int(ceil),
            real(b.simplified_raw),
        ]);
        eta_rows.push(json!({"eta": eta, "t_eta": te, "simplified_at_ceil": b.simplified_raw}));
    }
    Ok((vec![bounds, etas], json!({"bounds": rows, "t_eta": eta_rows})))
}

fn run_tentative(p: &TentativeParams) -> Result<Produced, RunError> {
    let alpha = match (p.alpha, p.epsilon, p.gamma, p.t) {
        (Some(a), ..) => a,
        (None, Some(e), Some(g), Some(t)) => core("alpha_for", tentative::alpha_for(e, g, t))?,
        _ => unreachable!("validated"),
    };
    let demo = core("section_measure", tentative::discontinuity_demo(alpha, &p.n_grid))?;
    let mut section = Table::new(
        "section",
        &["n", "alpha", "scaled_gate", "measure", "limit", "abs_diff"],
    );
    for r in &demo {
        section.push(vec![
            int(r.n),
            real(r.alpha),
            real(r.scaled_gate),
            real(r.measure),
            real(r.limit),
            real((r.measure - r.limit).abs()),
        ]);
    }
    let mut tables = vec![section];
    let mut coupled_rows = None;
    if let Some(c) = &p.coupled {
        let rows = core(
            "coupled_scaling_demo",
            tentative::coupled_scaling_demo(&c.n_grid, &c.schedule, c.epsilon, c.gamma, c.prior),
        )?;
        let mut t = Table::new(
            "coupled",
            &["n", "t", "alpha", "scaled_gate", "measure", "limit", "prob_f", "posterior"],
        );
        for r in &rows {
            t.push(vec![
                int(r.n),
                real(r.t),
                real(r.alpha),
                real(r.scaled_gate),
                real(r.measure),
                real(r.limit),
                real(r.prob_f),
                real(r.posterior),
            ]);
        }
        tables.push(t);
        coupled_rows = Some(rows);
    }
    Ok((tables, json!({"alpha": alpha, "section": demo, "coupled": coupled_rows})))
}

fn run_brownian(p: &BrownianParams, seed: u64) -> Result<Produced, RunError> {
    let t_eta = p
        .eta
        .map(|eta| core("t_eta_brownian", wiener::t_eta_brownian(p.epsilon, p.gamma, eta, &p.scale)))
        .transpose()?;
    let mut grid: Vec<(f64, &str)> = p.times.iter().map(|&t| (t, "grid")).collect();
    if let Some(te) = t_eta {
        grid.push((te, "t_eta"));
    }
    let mut table = Table::new(
        "brownian",
        &[
            "role", "t", "length", "scale", "gamma", "epsilon", "j", "trials", "seed",
            "estimate_direct", "std_err_direct", "estimate_reweighted", "std_err_reweighted",
            "ess", "agree", "bound", "bound_raw", "t_eta", "posterior_lower_bound",
        ],
    );
    let mut rows = Vec::new();
    for (i, &(t, role)) in grid.iter().enumerate() {
        let row_seed = mc::derive_seed(seed, i as u64);
        let exp = WienerExperiment {
            false_index: p.false_index,
            gamma: p.gamma,
            epsilon: p.epsilon,
            t,
            scale: p.scale.clone(),
            length: p.length,
            trials: p.trials,
            seed: row_seed,
            quasi_loop_c: p.quasi_loop_c.unwrap_or(f64::INFINITY),
        };
        let r = core("mc_wiener_indistinguishable", wiener::mc_wiener_indistinguishable(&exp))?;
        let posterior = match r.bound {
            Some(_) => Some(core(
                "bayes_posterior_brownian",
                wiener::bayes_posterior_brownian(p.prior, p.epsilon, p.gamma, t, &p.scale),
            )?),
            None => None,
        };
        table.push(vec![
            role.into(),
            real(t),
            int(p.length),
            p.scale.name().into(),
            real(p.gamma),
            real(p.epsilon),
            int(r.j),
            int(p.trials),
            int(row_seed),
            real(r.direct.p_hat),
            real(r.direct.std_err),
            real(r.reweighted.mean),
            real(r.reweighted.std_err),
            real(r.reweighted.ess),
            int(r.agree),
            opt_real(r.bound.map(|b| b.value)),
            opt_real(r.bound.map(|b| b.raw)),
            opt_real(t_eta),
            opt_real(posterior.map(|q| q.lower_bound)),
        ]);
        rows.push(json!({"role": role, "t": t, "result": r, "posterior": posterior}));
    }
    Ok((vec![table], json!({"t_eta": t_eta, "rows": rows})))
}

fn program_label(p: &ToyProgram) -> String {
    match &p.kind {
        ProgramKind::BoundedLoop { k } => format!("bounded-loop({k})"),
        ProgramKind::Diverge => "diverge".into(),
        ProgramKind::CounterMachine { instructions, .. } => {
            format!("counter-machine({} instructions)", instructions.len())
        }
    }
}

fn run_halting(p: &HaltingParams, seed: u64) -> Result<Produced, RunError> {
    let config = core("device config", DeviceConfig::new(p.epsilon, p.eta, p.gamma))?;
    let t = match p.t {
        Some(t) => t,
        None => core("t_eta_brownian", wiener::t_eta_brownian(p.epsilon, p.gamma, p.eta, &p.scale))?.ceil(),
    };
    let run = DeviceRun {
        config,
        scale: p.scale.clone(),
        horizon: p.horizon,
        t,
        t_cap: p.t_cap,
        trials: p.trials,
        seed,
        prior_no_false: p.prior,
    };
    let report = core("run_device", halting::run_device(&p.program, &run))?;
    let mut table = Table::new(
        "halting",
        &[
            "program", "horizon", "t", "trials", "seed", "verdict", "witness", "clicks",
            "first_trial", "confirmed", "posterior_lower_bound", "bound", "horizon_blind",
            "halts_at", "steps_simulated",
        ],
    );
    let blank = String::new;
    let row = match &report.verdict {
        Verdict::Click {
            witness,
            clicks,
            first_trial,
            confirmed,
            ..
        } => vec![
            program_label(&p.program),
            int(p.horizon),
            real(t),
            int(p.trials),
            int(seed),
            "click".into(),
            int(witness),
            int(clicks),
            int(first_trial),
            int(confirmed),
            blank(),
            blank(),
            int(false),
            int(witness),
            int(report.steps_simulated),
        ],
        Verdict::NonClick {
            posterior_lower_bound,
            bound,
            horizon_blind,
            halts_at,
            ..
        } => vec![
            program_label(&p.program),
            int(p.horizon),
            real(t),
            int(p.trials),
            int(seed),
            "non-click".into(),
            blank(),
            int(0),
            blank(),
            blank(),
            opt_real(*posterior_lower_bound),
            opt_real(bound.map(|b| b.value)),
            int(horizon_blind),
            halts_at.map(int).unwrap_or_default(),
            int(report.steps_simulated),
        ],
    };
    table.push(row);
    Ok((vec![table], json!({"t": t, "report": report})))
}
