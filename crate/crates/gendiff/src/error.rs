use thiserror::Error;

/// Errors surfaced by characteristics, verdicts, simulation and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sigma vanishes at probe point x = {0}")]
    ZeroSigma(f64),
    #[error("(1+|mu|)/sigma^2 is not locally integrable near x = {0}")]
    NonLocallyIntegrable(f64),
    #[error("query {query} outside the scale range [{lo}, {hi}]")]
    OutOfRange { query: f64, lo: f64, hi: f64 },
    #[error("scale function could not be inverted to tolerance at y = {0}")]
    InversionFailure(f64),
    #[error("window [{lo}, {hi}] not contained in the scale image")]
    WindowOutOfRange { lo: f64, hi: f64 },
    #[error("points must satisfy a <= x <= b, got a = {a}, x = {x}, b = {b}")]
    OrderViolation { a: f64, x: f64, b: f64 },
    #[error("spec `{label}` is invalid: {first_violation}")]
    InvalidSpec { label: String, first_violation: String },
    #[error("stickiness parameter must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("removal at level {level} would exceed the remnant length")]
    BudgetExceeded { level: u32 },
    #[error("grid step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("window [{lo}, {hi}] too small or not divisible by step {h}")]
    WindowTooSmall { lo: f64, hi: f64, h: f64 },
    #[error("start point {x0} maps outside the chain window [{lo}, {hi}]")]
    StartOutsideWindow { x0: f64, lo: f64, hi: f64 },
    #[error("level {level} outside the chain window [{lo}, {hi}]")]
    LevelOutsideWindow { level: f64, lo: f64, hi: f64 },
    #[error("expected exit time diverges for the requested window")]
    InfiniteTarget,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("cannot write output: {0}")]
    OutputFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
