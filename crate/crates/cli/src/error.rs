use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("missing dependency: {0} (run the earlier subcommand first)")]
    Missing(String),

    #[error("run directory is locked ({}); remove the lock if no other process owns it", .0.display())]
    Locked(PathBuf),

    #[error("artifact {file} carries config hash {found}, this run is {expected}")]
    MixedHash { file: String, found: String, expected: String },

    #[error("bad artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Core(#[from] viewsym::Error),

    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1: a property check failed; 2: the config was rejected; 3: anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}
