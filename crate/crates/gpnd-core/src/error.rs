//! Error type shared by all core modules.

use alloc::vec::Vec;
use thiserror::Error;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A network was built from an empty layer list.
    #[error("network spec is empty")]
    EmptySpec,
    /// A layer was declared with a zero input or output dimension.
    #[error("layer dimensions must be at least 1")]
    ZeroDimension,
    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Consecutive layers do not chain (output dim != next input dim).
    #[error("layer {layer} outputs {out} values but layer {next} expects {next_in}")]
    LayerChainMismatch {
        layer: usize,
        out: usize,
        next: usize,
        next_in: usize,
    },
    /// A non-finite value was found where finite input is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// A backward pass was given a tape produced by a different network.
    #[error("tape does not match network")]
    TapeMismatch,
    /// An optimizer step was given non-finite gradients.
    #[error("non-finite gradient passed to optimizer")]
    NonFiniteGradient,
    /// A training loss became non-finite; training aborts.
    #[error("non-finite {term} loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        term: &'static str,
    },
    /// A precondition on an argument value was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    /// A sample set has zero variance where spread is required.
    #[error("degenerate samples: zero variance")]
    DegenerateSamples,
    /// Latent dimensions whose encodings are constant over the fit set.
    #[error("latent dimensions with constant encodings: {dims:?}")]
    DegenerateLatentDims { dims: Vec<usize> },
    /// A metric or threshold search needs both classes present.
    #[error("scored set must contain both inliers and outliers")]
    SingleClass,
    /// Split fractions are infeasible for the dataset size.
    #[error("split infeasible: {0}")]
    InfeasibleSplit(&'static str),
    /// Outlier injection was asked to draw from an empty donor pool.
    #[error("donor pool for outlier injection is empty")]
    EmptyDonorPool,
    /// Classification was requested before a threshold was selected.
    #[error("decision threshold is unset")]
    ThresholdUnset,
    /// Serialized model or dataset bytes failed validation.
    #[error("malformed serialized data: {0}")]
    Codec(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
