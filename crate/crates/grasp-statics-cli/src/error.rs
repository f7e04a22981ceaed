//! Error taxonomy of the CLI, mapped onto distinct exit codes:
//! 1 parse, 2 validation, 3 solver, 4 I/O.

use std::fmt;

use grasp_statics::compliance::ComplianceError;
use grasp_statics::equilibrium::{SolveError, TrajectoryError};
use grasp_statics::grasp::GraspError;
use grasp_statics::stiffness_id::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Validation,
    Solver,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Parse => 1,
            ErrorKind::Validation => 2,
            ErrorKind::Solver => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Parse => "parse",
            ErrorKind::Validation => "validation",
            ErrorKind::Solver => "solver",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Parse,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Solver,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    /// Machine-readable error report for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind.label(),
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<GraspError> for CliError {
    fn from(e: GraspError) -> Self {
        match e {
            GraspError::InvalidScenario { .. } => CliError::validation(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InvalidProblem { .. } => CliError::validation(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        match &e.source {
            SolveError::InvalidProblem { .. } => CliError::validation(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<ComplianceError> for CliError {
    fn from(e: ComplianceError) -> Self {
        CliError::solver(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidData { .. } => CliError::validation(e.to_string()),
            FitError::RankDeficientData { .. } => CliError::solver(e.to_string()),
        }
    }
}
