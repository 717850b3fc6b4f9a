use thiserror::Error;

use crate::exprdsl::ExprError;
use crate::linalg::LinalgError;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("unknown system '{0}'")]
    UnknownSystem(String),
    #[error("coordinate x{coordinate} = {value} lies outside the domain box")]
    OutsideDomain { coordinate: usize, value: f64 },
    #[error("metric is not positive definite at {point:?}")]
    MetricNotPositiveDefinite { point: Vec<f64> },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("margin grid needs at least 2 points per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("loop needs at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error("consecutive samples {index} and {next} are ambiguous under the periodic identification")]
    WrapAmbiguity { index: usize, next: usize },
    #[error("loop has zero length")]
    DegenerateLoop,
    #[error("tangent fields belong to different loops")]
    MismatchedLoops,
    #[error("tangent speed vanishes near sample {index}")]
    NearZeroSpeed { index: usize },
    #[error("loop is not critical: gradient norm {grad_norm:e} exceeds {tolerance:e}")]
    NotCritical { grad_norm: f64, tolerance: f64 },
    #[error("flow state has zero speed")]
    ZeroSpeed,
    #[error("trajectory left the domain at t = {time}")]
    DomainExit { time: f64 },
    #[error("Newton iteration stagnated after {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("no loop with negative potential term found")]
    NoWitness,
    #[error("sweepout family maximum {value} fell below zero")]
    FamilyBelowZero { value: f64 },
    #[error("sweepout family endpoints are not admissible: {0}")]
    InvalidFamily(String),
    #[error("continuation diverged at stage {stage}: {reason}")]
    StageDivergence { stage: usize, reason: String },
    #[error("loop collapsed to a point (length {length:e})")]
    Collapse { length: f64 },
    #[error("energy bound violated at iterate {iterate}: E1 = {energy} > {bound}")]
    EnergyBound { iterate: usize, energy: f64, bound: f64 },
    #[error("factor systems do not match")]
    FactorMismatch,
    #[error("io error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
