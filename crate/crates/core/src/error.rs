use thiserror::Error;

/// Failure modes shared by every operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed measurement: {0}")]
    MalformedMeasurement(String),

    #[error("null probe: the test vector has zero norm")]
    NullProbe,

    #[error("coordinate {0} of the probe is zero; the device never clicks on it")]
    NeverClicks(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate time t = 0: (1+gamma)^t - 1 vanishes")]
    DegenerateTime,

    #[error("degenerate experiment: {0}")]
    DegenerateExperiment(String),

    #[error("numerical failure in {operation}: {detail}")]
    NumericalFailure {
        operation: &'static str,
        detail: String,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid times: need t > s, got t = {t}, s = {s}")]
    InvalidTimes { t: f64, s: f64 },

    #[error("index {index} out of range 1..={len}")]
    IndexError { index: usize, len: usize },

    #[error("bound not applicable: (1+gamma)^T - 1 = {growth} must exceed epsilon = {epsilon}")]
    BoundNotApplicable { growth: f64, epsilon: f64 },

    #[error("unstable importance weights: effective sample size {ess:.1} below {min}")]
    UnstableWeights { ess: f64, min: f64 },

    #[error("step budget exceeded: horizon {requested} needs more than the {budget} simulated steps allowed")]
    BudgetExceeded { requested: u64, budget: u64 },

    #[error("dimension mismatch: probe has {probe} coordinates, system has {stacks} stacks")]
    DimensionMismatch { probe: usize, stacks: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the failure is numerical rather than a rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure { .. } | Error::UnstableWeights { .. })
    }

    pub(crate) fn numerical(operation: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            operation,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
