use std::fmt;
use std::path::Path;

/// A failure reported as one JSON line on stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            exit_code: 1,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit_code: 2,
            ..CliError::new("usage", message)
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            exit_code: 2,
            ..CliError::new("config", message)
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        let kind = if e.kind() == std::io::ErrorKind::NotFound {
            "missing-file"
        } else {
            "io"
        };
        CliError::new(kind, format!("{}: {e}", path.display()))
    }

    pub fn json_line(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
