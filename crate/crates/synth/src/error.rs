use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("funder {0:?} has no ground-truth assignment")]
    MissingTruth(String),

    #[error("unknown name style {0:?}")]
    UnknownStyle(String),
}
