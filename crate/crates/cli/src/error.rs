use std::io;
use std::path::Path;

use thiserror::Error;
use tslagent_runtime::experiment::ExperimentError;
use tslagent_runtime::llm::OracleError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input: specs, artifacts, bindings, configs, traces.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Unrealizable(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Oracle(String),
    #[error("{0}")]
    Io(String),
    /// Well-formed input the analysis cannot answer.
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Unrealizable(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Oracle(_) => 5,
            CliError::Io(_) => 6,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |e| CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Oracle(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Synthesis(m) => CliError::Unrealizable(m),
            ExperimentError::Turn { .. } | ExperimentError::Oracle(_) => CliError::Oracle(e.to_string()),
            ExperimentError::Io(m) => CliError::Io(m),
            other => CliError::Parse(other.to_string()),
        }
    }
}
