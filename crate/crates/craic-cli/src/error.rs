//! Command errors with stable machine-readable codes.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact `{path}`; run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{artifact} was built from a different `{input}` (recorded {recorded}, found {actual}); re-run the earlier stage or pass --force")]
    HashMismatch {
        artifact: String,
        input: String,
        recorded: String,
        actual: String,
    },
    #[error("work directory is locked by another craic process ({0})")]
    LockHeld(PathBuf),
    #[error("malformed artifact {path}: {message}")]
    MalformedArtifact { path: PathBuf, message: String },
    #[error(transparent)]
    Extract(#[from] craic_core::extract::ExtractError),
    #[error(transparent)]
    Textprep(#[from] craic_core::textprep::TextprepError),
    #[error(transparent)]
    Vocab(#[from] craic_core::vocab::VocabError),
    #[error(transparent)]
    Neural(#[from] craic_core::neural::NeuralError),
    #[error(transparent)]
    Checkpoint(#[from] craic_core::neural::CheckpointError),
    #[error(transparent)]
    Score(#[from] craic_core::score::ScoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable error code for the one-line machine-readable report.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::MissingArtifact { .. } => "MissingArtifact",
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::HashMismatch { .. } => "HashMismatch",
            CliError::LockHeld(_) => "LockHeld",
            CliError::MalformedArtifact { .. } => "MalformedArtifact",
            CliError::Extract(_) => "ExtractError",
            CliError::Textprep(craic_core::textprep::TextprepError::InsufficientPairs {
                ..
            }) => "InsufficientPairs",
            CliError::Vocab(_) => "VocabError",
            CliError::Neural(craic_core::neural::NeuralError::DivergenceDetected { .. }) => {
                "DivergenceDetected"
            }
            CliError::Neural(_) => "NeuralError",
            CliError::Checkpoint(_) => "CheckpointError",
            CliError::Score(craic_core::score::ScoreError::VocabMismatch { .. }) => {
                "VocabMismatch"
            }
            CliError::Score(_) => "ScoreError",
            CliError::Io(_) => "IoError",
        }
    }

    /// The single stderr line emitted on failure.
    pub fn machine_line(&self) -> String {
        let message = self.to_string().replace('\n', " ");
        serde_json::json!({ "error": self.code(), "message": message }).to_string()
    }
}
