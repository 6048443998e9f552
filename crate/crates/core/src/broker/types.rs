use std::fmt;

use serde::{Deserialize, Serialize};

use super::clock::Timestamp;
use crate::model::{IntentLabel, PermissionName, PermissionWithReason};

/// Opaque application identifier: letters, digits, `.`, `_` and `-`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AppId(String);

impl AppId {
    pub fn new(id: impl Into<String>) -> Result<Self, String> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 128
            && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
        if ok {
            Ok(Self(id))
        } else {
            Err(format!("invalid app id {id:?}"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AppId {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AppId> for String {
    fn from(value: AppId) -> Self {
        value.0
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! sequential_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(u64);

        impl $name {
            pub fn from_index(n: u64) -> Self {
                Self(n)
            }

            pub fn index(&self) -> u64 {
                self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;

            fn try_from(value: String) -> Result<Self, Self::Error> {
                value.parse()
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix(concat!($prefix, "-"))
                    .and_then(|n| n.parse().ok())
                    .filter(|&n| n > 0)
                    .map(Self)
                    .ok_or_else(|| format!("invalid {} {s:?}", stringify!($name)))
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> Self {
                value.to_string()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "-{:06}"), self.0)
            }
        }
    };
}

sequential_id!(PromptId, "p");
sequential_id!(RequestId, "r");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SdkGeneration {
    #[default]
    Legacy,
    IntentAware,
}

/// Registration payload, as read from an app manifest file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AppManifest {
    pub app_id: AppId,
    pub display_name: String,
    #[serde(default)]
    pub sdk_generation: SdkGeneration,
    pub permissions: Vec<PermissionName>,
    /// Intents used when a request carries no reason for a permission.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intents: Vec<PermissionWithReason>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppRecord {
    pub app_id: AppId,
    pub display_name: String,
    pub declared_permissions: Vec<PermissionName>,
    pub sdk_generation: SdkGeneration,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intents: Vec<PermissionWithReason>,
    /// Current session number, starting at 1.
    pub session: u64,
    pub registered_at: Timestamp,
}

impl AppRecord {
    pub fn declares(&self, permission: &PermissionName) -> bool {
        self.declared_permissions.contains(permission)
    }

    pub fn static_intent(&self, permission: &PermissionName) -> Option<&PermissionWithReason> {
        self.intents.iter().find(|i| &i.permission_name == permission)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PermissionRequest {
    pub app_id: AppId,
    #[serde(default)]
    pub request_code: i64,
    pub permissions: Vec<PermissionName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasons: Option<Vec<PermissionWithReason>>,
}

impl PermissionRequest {
    pub fn legacy(app_id: AppId, request_code: i64, permissions: Vec<PermissionName>) -> Self {
        Self {
            app_id,
            request_code,
            permissions,
            reasons: None,
        }
    }

    pub fn with_reasons(mut self, reasons: Vec<PermissionWithReason>) -> Self {
        self.reasons = Some(reasons);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PromptState {
    Pending,
    Decided,
    Expired,
}

/// A consent question for one permission of one request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prompt {
    pub prompt_id: PromptId,
    pub request_id: RequestId,
    pub app_id: AppId,
    pub app_display_name: String,
    pub permission: PermissionName,
    pub intent: IntentLabel,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_link: Option<String>,
    pub registry_version: u64,
    pub state: PromptState,
    pub session: u64,
    pub created_at: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Allow,
    Deny,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrantMode {
    Once,
    #[default]
    Always,
}

/// A user's answer to a prompt. `mode` defaults to `ALWAYS`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConsentDecision {
    pub verdict: Verdict,
    #[serde(default)]
    pub mode: GrantMode,
}

impl ConsentDecision {
    pub fn new(verdict: Verdict, mode: GrantMode) -> Self {
        Self { verdict, mode }
    }

    pub fn allow() -> Self {
        Self::new(Verdict::Allow, GrantMode::Always)
    }

    pub fn deny() -> Self {
        Self::new(Verdict::Deny, GrantMode::Always)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrantAction {
    Decide,
    Revoke,
}

/// One line of the grant history. Revocations are appended as records of
/// their own; nothing is ever removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GrantRecord {
    pub action: GrantAction,
    pub app_id: AppId,
    pub permission: PermissionName,
    pub verdict: Verdict,
    pub mode: GrantMode,
    pub intent_shown: IntentLabel,
    pub registry_version: u64,
    pub decided_at: Timestamp,
    pub prompt_id: PromptId,
    pub session: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrantStatus {
    Granted,
    Denied,
    Unrequested,
}

/// Result returned to the requesting app for one permission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PermissionResult {
    pub permission: PermissionName,
    pub status: GrantStatus,
    /// Set when the permission needed a prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<PromptId>,
}

/// Bookkeeping for one submitted request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestRecord {
    pub request_id: RequestId,
    pub app_id: AppId,
    pub request_code: i64,
    pub permissions: Vec<PermissionName>,
    pub prompt_ids: Vec<PromptId>,
    /// Permissions answered from an existing grant, without a prompt.
    pub already_granted: Vec<PermissionName>,
    pub submitted_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<Vec<PermissionResult>>,
}

impl RequestRecord {
    pub fn is_complete(&self) -> bool {
        self.results.is_some()
    }
}

/// What `request_permissions` hands back to the caller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestReceipt {
    pub request_id: RequestId,
    pub prompt_ids: Vec<PromptId>,
    pub already_granted: Vec<PermissionName>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        let p = PromptId::from_index(7);
        assert_eq!(p.to_string(), "p-000007");
        assert_eq!("p-000007".parse::<PromptId>().unwrap(), p);
        assert!("r-000007".parse::<PromptId>().is_err());
        assert!("p-000000".parse::<PromptId>().is_err());
        assert_eq!(RequestId::from_index(1_234_567).to_string(), "r-1234567");
        assert!(AppId::new("com.example.gps").is_ok());
        assert!(AppId::new("a/b").is_err());
        assert!(AppId::new("").is_err());
    }

    #[test]
    fn decision_defaults_to_always() {
        let d: ConsentDecision = serde_json::from_str(r#"{"verdict":"ALLOW"}"#).unwrap();
        assert_eq!(d, ConsentDecision::allow());
    }

    #[test]
    fn manifest_format() {
        let m: AppManifest = serde_json::from_str(
            r#"{"appId":"com.example.gps","displayName":"SampleGPSTesting","sdkGeneration":"INTENT_AWARE",
                "permissions":["android.permission.ACCESS_FINE_LOCATION","INTERNET"]}"#,
        )
        .unwrap();
        assert_eq!(m.sdk_generation, SdkGeneration::IntentAware);
        assert_eq!(m.permissions[0].as_str(), "ACCESS_FINE_LOCATION");
        let legacy: AppManifest =
            serde_json::from_str(r#"{"appId":"x","displayName":"X","permissions":[]}"#).unwrap();
        assert_eq!(legacy.sdk_generation, SdkGeneration::Legacy);
    }
}
