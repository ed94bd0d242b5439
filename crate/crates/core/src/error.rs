use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("malformed interval [{a},{b}]")]
    MalformedInterval { a: usize, b: usize },

    #[error("interval [{a},{b}] exceeds trajectory horizon {horizon}")]
    IntervalOutOfRange { a: usize, b: usize, horizon: usize },

    #[error("formula contains an uninstantiated template predicate `{0}`")]
    Uninstantiated(String),

    #[error("no collision-free cell found near ({0}, {1})")]
    NoFreeCell(f64, f64),

    #[error("unknown object id {0}")]
    UnknownObject(u32),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("trigger footprint out of map bounds")]
    TriggerOutOfBounds,

    #[error("connectivity failure: {0}")]
    ConnectivityFailed(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("no satisfying trajectory found within {restarts} restarts")]
    SolverFailed { restarts: usize },

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("train/test splits share map id {0}")]
    SplitOverlap(u64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for each variant (used in error reports).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownPredicate(_) => "unknown_predicate",
            Error::MalformedInterval { .. } => "malformed_interval",
            Error::IntervalOutOfRange { .. } => "interval_out_of_range",
            Error::Uninstantiated(_) => "uninstantiated",
            Error::NoFreeCell(..) => "no_free_cell",
            Error::UnknownObject(_) => "unknown_object",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::TriggerOutOfBounds => "trigger_out_of_bounds",
            Error::ConnectivityFailed(_) => "connectivity_failed",
            Error::EmptyInput(_) => "empty_input",
            Error::NonFinite(_) => "non_finite",
            Error::SolverFailed { .. } => "solver_failed",
            Error::Diverged { .. } => "diverged",
            Error::SplitOverlap(_) => "split_overlap",
            Error::InvalidParam(_) => "invalid_param",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
