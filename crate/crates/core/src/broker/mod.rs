//! Runtime permission mediation: app registration, intent validation,
//! consent prompts, decisions and grant checks.

mod clock;
mod engine;
mod event;
mod handle;
mod journal;
mod state;
mod types;


pub use clock::{Clock, LogicalClock, SystemClock, Timestamp};
pub use engine::{Broker, Observer};
pub use event::{BrokerEvent, EventRecord};
pub use handle::{BrokerHandle, Ticket};
pub use journal::Journal;
pub use types::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PermissionName;

/// Why one permission of a request or manifest was rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationFailure {
    pub permission: String,
    /// `PURPOSE_NOT_APPROVED`, `SCOPE_MISMATCH`, `UNKNOWN_PERMISSION`,
    /// `DUPLICATE_REASON`, `UNREQUESTED_PERMISSION` or
    /// `UNDECLARED_PERMISSION`.
    pub reason: String,
}

impl ValidationFailure {
    pub fn new(permission: &PermissionName, reason: &str) -> Self {
        Self {
            permission: permission.to_string(),
            reason: reason.to_string(),
        }
    }
}

fn describe(failures: &[ValidationFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("{}: {}", f.permission, f.reason))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("unknown permission {0}")]
    UnknownPermission(String),
    #[error("app {0} is already registered")]
    DuplicateApp(String),
    #[error("unknown app {0}")]
    UnknownApp(String),
    #[error("permission {0} is not declared in the app manifest")]
    UndeclaredPermission(String),
    #[error("intent validation failed ({})", describe(.0))]
    ValidationFailed(Vec<ValidationFailure>),
    #[error("unknown prompt {0}")]
    UnknownPrompt(String),
    #[error("prompt {0} was already decided differently")]
    AlreadyDecided(String),
    #[error("prompt {0} expired")]
    PromptExpired(String),
    #[error("no live grant for {permission} on {app}")]
    NoGrant { app: String, permission: String },
    #[error("registry version {offered} cannot replace active version {active}")]
    RegistryConflict { active: u64, offered: u64 },
    #[error("journal {path}: {source}")]
    JournalIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("journal {path} line {line}: {message}")]
    JournalCorrupt { path: String, line: usize, message: String },
    #[error("broker queue is closed")]
    QueueClosed,
}

impl BrokerError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownPermission(_) => "UNKNOWN_PERMISSION",
            Self::DuplicateApp(_) => "DUPLICATE_APP",
            Self::UnknownApp(_) => "UNKNOWN_APP",
            Self::UndeclaredPermission(_) => "UNDECLARED_PERMISSION",
            Self::ValidationFailed(_) => "VALIDATION_FAILED",
            Self::UnknownPrompt(_) => "UNKNOWN_PROMPT",
            Self::AlreadyDecided(_) => "ALREADY_DECIDED",
            Self::PromptExpired(_) => "PROMPT_EXPIRED",
            Self::NoGrant { .. } => "NO_GRANT",
            Self::RegistryConflict { .. } => "REGISTRY_CONFLICT",
            Self::JournalIo { .. } => "JOURNAL_IO",
            Self::JournalCorrupt { .. } => "JOURNAL_CORRUPT",
            Self::QueueClosed => "QUEUE_CLOSED",
        }
    }
}
