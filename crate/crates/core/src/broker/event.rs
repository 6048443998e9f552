use serde::{Deserialize, Serialize};

use super::clock::Timestamp;
use super::types::{AppId, AppRecord, GrantRecord, PermissionResult, Prompt, PromptId, RequestId, RequestRecord};
use crate::model::RegistryDocument;

/// A state change. Events carry everything needed to apply them, so replay
/// never consults the clock or the registry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", rename_all_fields = "camelCase")]
pub enum BrokerEvent {
    RegistryActivated { version: u64, registry: RegistryDocument },
    AppRegistered { app: AppRecord },
    RequestSubmitted { request: RequestRecord },
    PromptCreated { prompt: Prompt },
    PromptDecided { prompt_id: PromptId, grant: GrantRecord },
    PromptExpired { prompt_id: PromptId, app_id: AppId },
    RequestCompleted {
        request_id: RequestId,
        app_id: AppId,
        request_code: i64,
        results: Vec<PermissionResult>,
    },
    SessionEnded { app_id: AppId, new_session: u64 },
    GrantRevoked { grant: GrantRecord },
}

impl BrokerEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::RegistryActivated { .. } => "registry-activated",
            Self::AppRegistered { .. } => "app-registered",
            Self::RequestSubmitted { .. } => "request-submitted",
            Self::PromptCreated { .. } => "prompt-created",
            Self::PromptDecided { .. } => "prompt-decided",
            Self::PromptExpired { .. } => "prompt-expired",
            Self::RequestCompleted { .. } => "request-completed",
            Self::SessionEnded { .. } => "session-ended",
            Self::GrantRevoked { .. } => "grant-revoked",
        }
    }
}

/// An event with its position in the broker's total order. This is also the
/// journal line format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: Timestamp,
    #[serde(flatten)]
    pub event: BrokerEvent,
}
