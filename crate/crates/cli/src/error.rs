use std::fmt;

use atomsim::SimError;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Numerical,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::Numerical | ErrorKind::Io => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Usage => "usage",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Io => "io",
        };
        json!({
            "error": { "kind": kind, "message": self.message },
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self {
            kind: if e.is_numerical() { ErrorKind::Numerical } else { ErrorKind::Usage },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
