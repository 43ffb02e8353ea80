use thiserror::Error;

use crate::optim::OptimumPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate gradient{}", fmt_index(*.index))]
    DegenerateGradient { index: Option<usize> },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("feasible region is empty: budget {gamma} is below g(0) = {floor}")]
    InfeasibleRegion { gamma: f64, floor: f64 },

    #[error(
        "ascent did not converge: KKT residual {} after {} iterations",
        .best.kkt_residual,
        .best.iterations
    )]
    NonConverged { best: Box<OptimumPoint> },

    #[error("unsupported dimension m = {m} (at most {max})")]
    UnsupportedDimension { m: usize, max: usize },

    #[error("margin undefined for a horizon of {k} observation(s)")]
    UndefinedMargin { k: usize },

    #[error("no feasible masking found: best margin {best_margin} vs target {target}")]
    MaskingInfeasible { best_margin: f64, target: f64 },

    #[error("kappa denominator vanishes for pair (j = {j}, k = {k})")]
    KappaDegenerate { j: usize, k: usize },

    #[error("noise study unreliable: {invalid} of {total} trials failed")]
    UnreliableStudy { invalid: usize, total: usize },

    #[error("bound undefined: trace of the noise covariance is zero")]
    ZeroNoiseTrace,

    #[error("solver failed at t = {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Unsupported(String),
}

fn fmt_index(index: Option<usize>) -> String {
    match index {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at(self, index: usize) -> Error {
        match self {
            Error::DegenerateGradient { index: None } => Error::DegenerateGradient { index: Some(index) },
            other => Error::AtIndex {
                index,
                source: Box::new(other),
            },
        }
    }
}
