use std::path::PathBuf;

use thiserror::Error;

use crate::graph::PaperId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by the scholarly-metadata provider or its fixture store.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider has no record for {endpoint} {key}")]
    NotFound { endpoint: String, key: String },
    #[error("no recorded fixture for {endpoint} {key}")]
    FixtureMissing { endpoint: String, key: String },
    #[error("provider throttled the request after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unexpected provider response: {0}")]
    Decode(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("referential integrity violated: {0}")]
    Integrity(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("non-finite numeric state: {0}")]
    Numeric(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("insight provider failed: {0}")]
    Insight(String),
    #[error("event timestamp {ts} precedes last logged timestamp {last}")]
    Ordering { ts: i64, last: i64 },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("unsupported schema version {found} (supported: {supported})")]
    Migration { found: u64, supported: u32 },
    #[error("replay incomplete at event {index} ({action}): {reason}")]
    ReplayIncomplete { index: usize, action: String, reason: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn not_found(id: &PaperId) -> Self {
        Error::NotFound(format!("paper {id}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable machine-readable code used in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Integrity(_) => "integrity",
            Error::NotFound(_) => "not_found",
            Error::Numeric(_) => "numeric",
            Error::Capacity(_) => "capacity",
            Error::Provider(ProviderError::NotFound { .. })
            | Error::Provider(ProviderError::FixtureMissing { .. }) => "not_found",
            Error::Provider(ProviderError::RateLimited { .. }) => "rate_limited",
            Error::Provider(_) => "provider",
            Error::Insight(_) => "insight",
            Error::Ordering { .. } => "ordering",
            Error::Parse { .. } => "parse",
            Error::Migration { .. } => "migration",
            Error::ReplayIncomplete { .. } => "replay_incomplete",
            Error::Protocol(_) => "protocol",
            Error::Io { .. } => "io",
        }
    }

    pub fn is_not_found(&self) -> bool {
        self.code() == "not_found"
    }

    /// Process exit code: 2 validation, 3 not-found, 4 provider/transport, 5 replay,
    /// 1 for local i/o failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Integrity(_)
            | Error::Numeric(_)
            | Error::Capacity(_)
            | Error::Ordering { .. }
            | Error::Protocol(_)
            | Error::Parse { .. }
            | Error::Migration { .. } => 2,
            e if e.is_not_found() => 3,
            Error::Provider(_) | Error::Insight(_) => 4,
            Error::ReplayIncomplete { .. } => 5,
            Error::NotFound(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}
