use std::fmt;

use mnn_core::ErrorKind;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }

    /// Single-line JSON object for stderr.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.class(),
            "code": self.code(),
            "message": self.message(),
        })
        .to_string()
    }

    /// Wraps a core error with some context.
    pub fn core(context: impl fmt::Display, err: mnn_core::Error) -> Self {
        let msg = format!("{context}: {err}");
        match err.kind() {
            ErrorKind::Parameter => CliError::Config(msg),
            ErrorKind::Data => CliError::Data(msg),
            ErrorKind::Numeric => CliError::Numeric(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}
