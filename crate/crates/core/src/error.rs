use std::path::PathBuf;

/// Errors surfaced by the simulator, the learners and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("aircraft {0} is not alive")]
    DeadAircraft(usize),

    #[error("aircraft is not alive")]
    AircraftNotAlive,

    #[error("unknown tactical command index {0}")]
    UnknownCommand(usize),

    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed joint action: {0}")]
    MalformedAction(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("opponent pool is empty")]
    EmptyPool,

    #[error("every evaluation round failed")]
    AllRoundsFailed,

    #[error("training aborted at episode {episode}: {source}")]
    TrainingAborted {
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DeadAircraft(_) => "dead_aircraft",
            Error::AircraftNotAlive => "dead_aircraft",
            Error::UnknownCommand(_) => "unknown_command",
            Error::InvalidTimeStep(_) => "invalid_time_step",
            Error::InvalidConfig(_) => "invalid_config",
            Error::MalformedAction(_) => "malformed_action",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EmptyBuffer => "empty_buffer",
            Error::EmptyPool => "empty_pool",
            Error::AllRoundsFailed => "all_rounds_failed",
            Error::TrainingAborted { .. } => "training_aborted",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Toml(_) => "config_parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
