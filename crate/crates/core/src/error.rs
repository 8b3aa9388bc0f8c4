use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical routines and dataset loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate spectrum: no strictly positive eigenvalue")]
    DegenerateSpectrum,

    #[error("degenerate kernel: centered kernel is zero")]
    DegenerateKernel,

    #[error("index {index} out of range [1, {max}]")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid label at row {row}: {reason}")]
    InvalidLabel { row: usize, reason: String },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("requested {requested} components but numerical rank is {rank}")]
    RankExceeded { requested: usize, rank: usize },

    #[error("kernel matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("initial weights are outside the feature span (relative residual {residual:.3e})")]
    OutsideFeatureSpan { residual: f64 },

    #[error("training diverged at step {step} (loss {loss:.3e})")]
    Divergence { step: usize, loss: f64 },

    #[error("PSD violation: {0}")]
    NotPsd(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("parse error in {path} at line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
