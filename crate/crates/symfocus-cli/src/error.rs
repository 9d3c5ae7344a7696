//! Command failures, split by exit code.

use std::io;
use std::path::Path;

use symfocus::asymmetry::AsymmetryError;
use symfocus::cluster::ClusterError;
use symfocus::image_io::ImageError;
use symfocus::phantom::PhantomError;
use symfocus::report::ReportError;
use thiserror::Error;

/// Input and output problems exit 1, configuration problems exit 2.
/// Usage errors never reach this type; clap reports them itself, also
/// with exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        // An inverted K range is a settings problem; the other variants
        // mean the data could not support the request.
        match e {
            ClusterError::BadRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AsymmetryError> for CliError {
    fn from(e: AsymmetryError) -> Self {
        match e {
            AsymmetryError::Cluster(inner) => inner.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PhantomError> for CliError {
    fn from(e: PhantomError) -> Self {
        // Specs come from generator flags or the spec list, both of which
        // configure a run rather than feed it scan data.
        match e {
            PhantomError::InvalidSpec(_) => CliError::Config(e.to_string()),
            PhantomError::EmptyInput => CliError::Input(e.to_string()),
        }
    }
}

pub fn read_err(path: &Path, e: io::Error) -> CliError {
    CliError::Input(format!("cannot read {}: {e}", path.display()))
}

pub fn write_err(path: &Path, e: io::Error) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}
