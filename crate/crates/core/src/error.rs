use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("gaze directions are antiparallel; blink interpolation is undefined")]
    AntiparallelInterpolation,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t} does not increase (previous {prev})")]
    NonMonotonic { line: usize, t: f64, prev: f64 },
    #[error("trajectory has no valid gaze sample")]
    AllInvalid,
    #[error("blink at sample {index} cannot be repaired: {source}")]
    Unrecoverable {
        index: usize,
        #[source]
        source: GeometryError,
    },
    #[error("downsample factor must be at least 1")]
    BadFactor,
    #[error("participant {0} is listed in both train and test sets")]
    OverlappingSplit(u32),
    #[error("participant {0} is not covered by the split")]
    UncoveredParticipant(u32),
    #[error("invalid task config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error("bad architecture: {0}")]
    Architecture(String),
}

/// A controller produced an unusable command.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerFault {
    #[error("controller produced a non-finite command")]
    NonFinite,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("trajectory of {0} samples is too short (need at least 2)")]
    TooShort(usize),
    #[error("loss diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("first sample has parallel gaze; no focal point to inherit")]
    DegenerateFirstSample,
    #[error("trajectory is empty")]
    Empty,
    #[error("no controllers or no trajectories to evaluate")]
    NothingToEvaluate,
    #[error("preparing trajectories: {0}")]
    Dataset(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
