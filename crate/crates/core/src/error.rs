use thiserror::Error;

/// Errors raised by fitting, scheduling, learners and the evaluation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("at least three observations are required to fit a trend, got {0}")]
    FewerThanThreeObservations(usize),

    #[error(
        "observation positions must be strictly increasing (position {next} follows {previous})"
    )]
    NonMonotonePositions { previous: u64, next: u64 },

    #[error("invalid observation at position {position}: accuracy {accuracy} is outside (0, 100]")]
    InvalidObservation { position: u64, accuracy: f64 },

    #[error("trend fit did not converge: {0}")]
    FitDiverged(String),

    #[error("invalid power curve parameters a={a}, b={b}, c={c}")]
    InvalidParameters { a: f64, b: f64, c: f64 },

    #[error("position must be strictly positive, got {0}")]
    NonPositivePosition(f64),

    #[error("trend slope is not positive at position {0}")]
    NonPositiveSlope(f64),

    #[error("PORT {0} is outside (0, 1]")]
    PortOutOfRange(f64),

    #[error("invalid step function: {0}")]
    InvalidStep(String),

    #[error(
        "position of level {0} depends on the learning trace and cannot be computed statically"
    )]
    AdaptivePosition(usize),

    #[error("word position {position} lies beyond the corpus ({total} words)")]
    PositionBeyondCorpus { position: u64, total: u64 },

    #[error("no trend is available at level {0}")]
    MissingTrend(usize),

    #[error("working level is undefined for this trace")]
    WLevelUndefined,

    #[error("scope end {scope} precedes evaluation position {position}")]
    ScopeBeforeX { scope: u64, position: u64 },

    #[error("invalid convergence parameters: {0}")]
    InvalidParams(String),

    #[error("run has no convergence level")]
    NoCLevel,

    #[error("inflated variant is not viable: {0}")]
    NonViableInflation(String),

    #[error("invalid learner specification: {0}")]
    InvalidLearner(String),

    #[error("training position {position} exceeds the fold training size {available}")]
    PositionBeyondFold { position: u64, available: u64 },

    #[error("invalid fold configuration: {0}")]
    InvalidFolds(String),

    #[error("external learner failed: {0}")]
    ExternalCommandFailed(String),

    #[error("external learner output has no parsable `accuracy:` line: {0}")]
    UnparsableExternalOutput(String),

    #[error("corpus parse error at line {line}: {message}")]
    CorpusParse { line: usize, message: String },

    #[error("empty corpus or sentence: {0}")]
    EmptyCorpus(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
