use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tagfile::TagFileError;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NO_PEAK: u8 = 2;
pub const EXIT_MALFORMED: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    TagFile { path: PathBuf, source: TagFileError },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] entlink_core::Error),
    #[error("writing report: {0}")]
    Report(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn tag_file(path: &Path, source: TagFileError) -> Self {
        match source {
            TagFileError::Io(e) => CliError::io(path, e),
            source => CliError::TagFile {
                path: path.to_path_buf(),
                source,
            },
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(entlink_core::Error::NoPeak { .. }) => EXIT_NO_PEAK,
            CliError::TagFile { .. } => EXIT_MALFORMED,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Report(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Report(e.to_string())
    }
}
