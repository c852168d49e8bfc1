use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("row index {index} out of range for dimension {d}")]
    IndexOutOfRange { index: usize, d: usize },

    #[error("index tuples have mixed lengths ({first} and {other})")]
    MixedTupleLengths { first: usize, other: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "separation violated: log_tau(rho) = {log_tau_rho:.6} exceeds 1 - 1/delta = {bound:.6}"
    )]
    SeparationViolated { log_tau_rho: f64, bound: f64 },

    #[error("sample size {0} is not a perfect square")]
    NonSquareSample(u64),

    #[error("tensor power {0} is not a positive even integer")]
    OddPower(u32),

    #[error("sample window tau^(-2p) = {window:.3e} exceeds 2^62; use explicit parameters")]
    SampleOverflow { window: f64 },

    #[error("block size {t} does not divide column count {n}")]
    Divisibility { n: usize, t: usize },

    #[error("product may overflow: inner {inner} x |X| {bound_x} x |Y| {bound_y} exceeds 2^62")]
    OverflowRisk {
        inner: usize,
        bound_x: i64,
        bound_y: i64,
    },

    #[error("iteration {iteration} marked {marks} block pairs, over the cap of {cap}")]
    MarkCapExceeded {
        iteration: usize,
        marks: usize,
        cap: usize,
    },

    #[error("no pair found above the outlier threshold")]
    NoPairFound,

    #[error("retries exhausted after {rounds} rounds: {reason}")]
    RetriesExhausted { rounds: usize, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("memory budget exceeded: {needed} columns requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
