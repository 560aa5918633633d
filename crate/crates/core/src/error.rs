use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments, malformed files, inconsistent shapes.
    Input,
    /// A decomposition or the weight solver failed to produce a usable answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("every input column is numerically zero")]
    AllZeroInput,
    #[error("ambient dimensions differ: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("subspace dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("point {index} is in Gr({k},{n}) but the set is in Gr({expected_k},{expected_n})")]
    HeterogeneousSet { index: usize, n: usize, k: usize, expected_n: usize, expected_k: usize },
    #[error("basis is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("{weights} weights supplied for {inputs} subspaces")]
    WeightMismatch { inputs: usize, weights: usize },
    #[error("weight {index} is {value}, weights must be positive and finite")]
    NonpositiveWeight { index: usize, value: f64 },
    #[error(
        "requested flag component of dimension {requested} but the flag has length {available}"
    )]
    ComponentTooLarge { requested: usize, available: usize },
    #[error("distance matrix has no positive eigenvalues above tolerance (all points coincide)")]
    NoPositiveEigenvalues,
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("{points} points cannot supply {neighbors} neighbors each (need more points than neighbors)")]
    TooFewPoints { points: usize, neighbors: usize },
    #[error("weight solver did not reach tolerance within {iterations} iterations (KKT residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },
    #[error("{context}: decomposition failed to converge")]
    DecompositionFailed { context: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("payload holds {found} bytes, header implies {expected}")]
    PayloadSizeMismatch { expected: u64, found: u64 },
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("patch of size {patch} does not fit a {rows}x{cols} image")]
    PatchLargerThanImage { patch: usize, rows: usize, cols: usize },
    #[error("patch spans {vectors} spectra but the ambient space has only {bands} bands")]
    RankExceedsAmbient { vectors: usize, bands: usize },
    #[error("class {label} has {available} pixels, fewer than the draw size {draw_size}")]
    ClassTooSmall { label: u32, available: usize, draw_size: usize },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoPositiveEigenvalues
            | Error::SolverDivergence { .. }
            | Error::DecompositionFailed { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }

    /// Stable variant name for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AllZeroInput => "AllZeroInput",
            Error::AmbientMismatch { .. } => "AmbientMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::HeterogeneousSet { .. } => "HeterogeneousSet",
            Error::NotOrthonormal { .. } => "NotOrthonormal",
            Error::WeightMismatch { .. } => "WeightMismatch",
            Error::NonpositiveWeight { .. } => "NonpositiveWeight",
            Error::ComponentTooLarge { .. } => "ComponentTooLarge",
            Error::NoPositiveEigenvalues => "NoPositiveEigenvalues",
            Error::SizeMismatch { .. } => "SizeMismatch",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::SolverDivergence { .. } => "SolverDivergence",
            Error::DecompositionFailed { .. } => "DecompositionFailed",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::PayloadSizeMismatch { .. } => "PayloadSizeMismatch",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::PatchLargerThanImage { .. } => "PatchLargerThanImage",
            Error::RankExceedsAmbient { .. } => "RankExceedsAmbient",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::Parse { .. } => "Parse",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
