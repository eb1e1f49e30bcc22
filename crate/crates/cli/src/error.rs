use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// Failures reading or validating a chain container.
#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a chain container (bad magic bytes)")]
    BadMagic,
    #[error("unsupported container version {found} (this build reads {expected})")]
    Version { found: u32, expected: u32 },
    #[error("container truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("container checksum mismatch")]
    Checksum,
    #[error("malformed container: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Contract(String),
    #[error("{}: {source}", path.display())]
    Container {
        path: PathBuf,
        #[source]
        source: ContainerError,
    },
    #[error(transparent)]
    Core(#[from] orthohmc::Error),
}

/// Machine-readable form of an error, printed on failure.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub code: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable identifier for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Contract(_) => "contract",
            CliError::Container { source, .. } => match source {
                ContainerError::BadMagic => "container-magic",
                ContainerError::Version { .. } => "container-version",
                ContainerError::Truncated { .. } => "container-truncated",
                ContainerError::Checksum => "container-checksum",
                ContainerError::Malformed(_) => "container-malformed",
            },
            CliError::Core(e) => match e {
                orthohmc::Error::Config(_) => "config",
                orthohmc::Error::NumericStability(_)
                | orthohmc::Error::CayleySingular { .. }
                | orthohmc::Error::NonFinite(_)
                | orthohmc::Error::Resolution { .. } => "numeric",
                _ => "sampler",
            },
        }
    }

    /// Process exit status; distinct per class.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            "contract" => 5,
            "container-magic" => 10,
            "container-version" => 11,
            "container-truncated" => 12,
            "container-checksum" => 13,
            "container-malformed" => 14,
            "numeric" => 20,
            _ => 21,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let mut message = self.to_string();
        let mut source = std::error::Error::source(self);
        while let Some(s) = source {
            let text = s.to_string();
            if !message.contains(&text) {
                message.push_str(": ");
                message.push_str(&text);
            }
            source = s.source();
        }
        ErrorReport {
            code: self.code(),
            exit_code: self.exit_code(),
            message,
        }
    }
}
