use std::fmt;

use latefuse_core::Error;

/// Process exit status for each failure family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

/// A failure tagged with the stage (and stream, if any) it came from.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            stage: "usage".into(),
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage tag to core errors.
pub trait StageExt<T> {
    fn stage(self, stage: impl fmt::Display) -> Result<T, CliError>;
}

impl<T> StageExt<T> for Result<T, Error> {
    fn stage(self, stage: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            stage: stage.to_string(),
            kind: if e.is_numerical() { ExitKind::Numerical } else { ExitKind::Data },
            message: e.to_string(),
        })
    }
}
