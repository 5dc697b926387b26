use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singular(String),
    #[error("quadrature did not meet its error bound: estimate {estimate:e} > tolerance {tolerance:e} ({context})")]
    Accuracy {
        estimate: f64,
        tolerance: f64,
        context: String,
    },
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("contraction abort at t = {t}: term {k} sup-norm {norm:e} against previous {prev:e}")]
    ConvergenceAbort { t: f64, k: usize, norm: f64, prev: f64 },
    #[error("source set of {requested} exceeds the cap of {cap}")]
    MemoryBudget { requested: usize, cap: usize },
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
