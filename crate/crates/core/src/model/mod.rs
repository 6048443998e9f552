//! Permissions, purpose labels, scope limitations and the intent registry.

mod registry;
mod types;

pub use registry::{EntryRow, IntentRegistry, IntentVerdict, RegistryDocument};
pub use types::{
    IntentLabel, PermissionName, PermissionWithReason, PurposeLabel, ScopeLimitation,
    MAX_DESCRIPTION_CHARS,
};

use thiserror::Error;

/// Violations of a domain type's own invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid permission name {0:?}: expected uppercase letters, digits and underscores")]
    InvalidPermissionName(String),
    #[error("invalid purpose label {0:?}: expected uppercase letters, digits and underscores")]
    InvalidPurposeLabel(String),
    #[error("purpose description for {0} must not be empty")]
    EmptyDescription(String),
    #[error("purpose description for {permission} is {chars} characters (max 280)")]
    DescriptionTooLong { permission: String, chars: usize },
    #[error("scope NOT_PROVIDED on {permission} requires purpose NOT_PROVIDED, got {purpose}")]
    ScopeRequiresNotProvided { permission: String, purpose: String },
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed registry: {0}")]
    Malformed(String),
    #[error("({permission}, {purpose}) bound to both {first} and {second}")]
    DuplicateScope {
        permission: String,
        purpose: String,
        first: ScopeLimitation,
        second: ScopeLimitation,
    },
    #[error("unknown permission {0}")]
    UnknownPermission(String),
    #[error("unknown purpose {0}")]
    UnknownPurpose(String),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "IO_ERROR",
            Self::Malformed(_) => "MALFORMED_REGISTRY",
            Self::DuplicateScope { .. } => "DUPLICATE_SCOPE",
            Self::UnknownPermission(_) => "UNKNOWN_PERMISSION",
            Self::UnknownPurpose(_) => "UNKNOWN_PURPOSE",
        }
    }
}
