use std::path::Path;
use std::process::ExitCode;

use bridgecause_core::diagnosis::DiagnosisError;
use bridgecause_core::neighborhood::NeighborhoodError;
use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or contradictory settings, unknown ids, invalid rules.
    #[error("configuration error: {0}")]
    Config(String),
    /// Reading or writing files.
    #[error("{0}")]
    Io(String),
    /// Malformed input documents.
    #[error("parse error: {0}")]
    Parse(String),
    /// The answer oracle failed where no degradation is possible.
    #[error("oracle error: {0}")]
    Oracle(String),
    /// The interest camera does not see the mesh.
    #[error("{0}")]
    InterestMissed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Oracle(_) => 4,
            CliError::InterestMissed(_) => 5,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn parse(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Parse(format!("{}: {e}", path.display()))
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

impl From<NeighborhoodError> for CliError {
    fn from(e: NeighborhoodError) -> Self {
        match e {
            NeighborhoodError::InterestMissed(_) => CliError::InterestMissed(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<DiagnosisError> for CliError {
    fn from(e: DiagnosisError) -> Self {
        match e {
            DiagnosisError::Neighborhood(e) => e.into(),
            DiagnosisError::Identification { ref transcript, .. } => {
                let mut msg = e.to_string();
                for t in transcript {
                    let outcome = t.error.as_deref().or(t.answer.as_deref()).unwrap_or("-");
                    msg.push_str(&format!(
                        "\n  {}: {} -> {}",
                        t.image_id, t.question, outcome
                    ));
                }
                CliError::Oracle(msg)
            }
            DiagnosisError::Rule { .. } => CliError::Config(e.to_string()),
            DiagnosisError::RuleSyntax(_) => CliError::Parse(e.to_string()),
        }
    }
}
