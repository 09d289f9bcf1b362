use thiserror::Error;

/// Errors raised by the estimation pipeline.
///
/// Variant names double as the machine-readable error name written to
/// stderr by the command-line front end (see [`Error::name`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("local polynomial fit is ill-posed at x0 = {x0}")]
    IllPosedFit { x0: f64 },
    #[error("no grid point admitted a well-posed fit")]
    AllPointsIllPosed,
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate design: covariate has zero variance")]
    DegenerateDesign,
    #[error("every point has zero weight")]
    AllPointsExcluded,
    #[error("sample mean {mean} is too close to zero relative to sd {sd}")]
    MeanNearZero { mean: f64, sd: f64 },
    #[error("segment {segment} holds {count} sample points (at least {min} required)")]
    EmptySegment {
        segment: usize,
        count: usize,
        min: usize,
    },
    #[error("trimming removed every observation")]
    EmptyRetainedSet,
    #[error("{count} grid points inside the integration range are not valid")]
    InvalidGridPoints { count: usize },
    #[error("distortion has (near) zero mean {0}")]
    ZeroMeanDistortion(f64),
    #[error("method {method} is not applicable to model {model}")]
    MethodInapplicable { method: String, model: String },
    #[error("unknown model id {0}")]
    UnknownModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short identifier of the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::IllPosedFit { .. } => "IllPosedFit",
            Error::AllPointsIllPosed => "AllPointsIllPosed",
            Error::DegenerateSample(_) => "DegenerateSample",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DegenerateDesign => "DegenerateDesign",
            Error::AllPointsExcluded => "AllPointsExcluded",
            Error::MeanNearZero { .. } => "MeanNearZero",
            Error::EmptySegment { .. } => "EmptySegment",
            Error::EmptyRetainedSet => "EmptyRetainedSet",
            Error::InvalidGridPoints { .. } => "InvalidGridPoints",
            Error::ZeroMeanDistortion(_) => "ZeroMeanDistortion",
            Error::MethodInapplicable { .. } => "MethodInapplicable",
            Error::UnknownModel(_) => "UnknownModel",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
