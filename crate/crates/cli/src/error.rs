//! Harness errors, split by who is at fault: bad configuration (exit 2)
//! versus failures at run time (exit 3).

use lnav_core::cell::CellError;
use lnav_core::container::ContainerError;
use lnav_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The request itself is malformed: unknown names, unreadable config,
    /// inconsistent flags.
    #[error("configuration error: {0}")]
    Config(String),
    /// The request was valid but executing it failed.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<CellError> for CliError {
    fn from(e: CellError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<lnav_core::image::ImageError> for CliError {
    fn from(e: lnav_core::image::ImageError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
