use thiserror::Error;

use crate::distribution::Distribution;
use crate::losses::Classifier;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible kinds: {0}")]
    Incompatible(String),

    /// The minimizer ran out of steps. Carries the last iterate so callers can
    /// inspect how far it got.
    #[error("minimizer did not reach tolerance after {steps} steps (gradient norm {grad_norm:e})")]
    MinimizerNonConvergence {
        steps: usize,
        grad_norm: f64,
        last: Box<Classifier>,
    },

    #[error("fixed-classifier iteration did not settle after {iters} iterations (last W1 step {last_step:e})")]
    FixedPointNonConvergence {
        iters: usize,
        last_step: f64,
        last: Box<Distribution>,
    },

    #[error("every sensitivity probe had a zero denominator")]
    DegenerateProbes,

    #[error("no grid point produced a long-run loss")]
    EmptyGrid,

    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}
