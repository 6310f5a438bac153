use std::fmt;

use thiserror::Error;

use crate::report::CheckReport;

/// One `(value, residual)` sample recorded by an iterative solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TracePoint {
    pub value: f64,
    pub residual: f64,
}

/// Pipeline stage tag attached to errors raised inside a two-solution run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Stage {
    Hypotheses,
    FindEndpoint,
    BoundaryEstimate,
    MountainPass,
    Minimization,
    Distinctness,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Hypotheses => "hypotheses",
            Stage::FindEndpoint => "find-endpoint",
            Stage::BoundaryEstimate => "boundary-estimate",
            Stage::MountainPass => "mountain-pass",
            Stage::Minimization => "minimization",
            Stage::Distinctness => "distinctness",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside table range [0, {max}]")]
    Range { value: f64, max: f64 },

    #[error("conjugate evaluation did not converge (best lower bound {lower_bound}, residual {residual:e})")]
    ConjugateFailure { lower_bound: f64, residual: f64 },

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("non-finite integrand at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },

    #[error("search failed: {0}")]
    SearchFailure(String),

    #[error("solver did not converge: {reason}")]
    NonConvergence {
        reason: String,
        trace: Vec<TracePoint>,
    },

    #[error("every start was trapped on the boundary of the sublevel set ({} witnesses)", witnesses.len())]
    BoundaryTrap { witnesses: Vec<TracePoint> },

    #[error("{} hypothesis check(s) failed", .0.len())]
    HypothesesFailed(Vec<CheckReport>),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
