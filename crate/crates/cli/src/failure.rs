use fpca_core::{Error, ErrorKind};
use serde::Serialize;

/// A failed run: exit code plus the machine-readable error object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_SPECTRUM: i32 = 4;
pub const EXIT_IO: i32 = 5;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            exit_code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: "io",
            exit_code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (kind, exit_code) = match e.kind() {
            ErrorKind::Config => ("config", EXIT_CONFIG),
            ErrorKind::DegenerateInput => ("degenerate_input", EXIT_DEGENERATE),
            ErrorKind::Spectrum => ("spectrum", EXIT_SPECTRUM),
            ErrorKind::Io => ("io", EXIT_IO),
        };
        Self {
            kind,
            exit_code,
            message: e.to_string(),
        }
    }
}
