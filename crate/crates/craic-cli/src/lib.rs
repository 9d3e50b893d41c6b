//! Pipeline commands behind the `craic` binary. Each stage reads the
//! previous stage's artifacts from the work directory and writes its own;
//! runs are deterministic for a fixed seed, so re-running a stage without
//! input changes reproduces its outputs byte for byte.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod lock;

pub use config::PipelineConfig;
pub use error::CliError;
