use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::event::{BrokerEvent, EventRecord};
use super::types::{
    AppId, AppRecord, GrantAction, GrantRecord, Prompt, PromptId, PromptState, RequestId, RequestRecord,
};
use crate::model::{IntentRegistry, PermissionName};

/// Broker state as a pure fold over events.
#[derive(Clone, Debug, Default)]
pub(crate) struct State {
    pub seq: u64,
    pub last_at: Option<super::clock::Timestamp>,
    pub registries: BTreeMap<u64, Arc<IntentRegistry>>,
    pub active: Option<u64>,
    pub apps: BTreeMap<AppId, AppRecord>,
    /// Index = prompt number - 1.
    pub prompts: Vec<Prompt>,
    /// Index = request number - 1.
    pub requests: Vec<RequestRecord>,
    pub grants: Vec<GrantRecord>,
    /// Latest grant record per (app, permission).
    pub latest_grant: HashMap<(AppId, PermissionName), usize>,
    /// Decision record per decided prompt.
    pub decision_of: HashMap<PromptId, usize>,
    /// Numbers of pending prompts.
    pub pending: BTreeSet<u64>,
}

impl State {
    pub fn registry(&self) -> Option<&Arc<IntentRegistry>> {
        self.active.and_then(|v| self.registries.get(&v))
    }

    pub fn prompt(&self, id: &PromptId) -> Option<&Prompt> {
        let i = id.index().checked_sub(1)? as usize;
        self.prompts.get(i)
    }

    fn prompt_mut(&mut self, id: &PromptId) -> Result<&mut Prompt, String> {
        let i = id.index().checked_sub(1).ok_or("prompt index 0")? as usize;
        self.prompts.get_mut(i).ok_or_else(|| format!("unknown prompt {id}"))
    }

    pub fn request(&self, id: &RequestId) -> Option<&RequestRecord> {
        let i = id.index().checked_sub(1)? as usize;
        self.requests.get(i)
    }

    fn push_grant(&mut self, grant: GrantRecord) -> usize {
        let idx = self.grants.len();
        self.latest_grant
            .insert((grant.app_id.clone(), grant.permission.clone()), idx);
        self.grants.push(grant);
        idx
    }

    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), String> {
        if rec.seq != self.seq + 1 {
            return Err(format!("event {} applied after {}", rec.seq, self.seq));
        }
        match &rec.event {
            BrokerEvent::RegistryActivated { version, registry } => {
                let reg = IntentRegistry::from_document(registry.clone()).map_err(|e| e.to_string())?;
                if reg.version() != *version {
                    return Err(format!("registry document version {} != {version}", reg.version()));
                }
                self.registries.insert(*version, Arc::new(reg));
                self.active = Some(*version);
            }
            BrokerEvent::AppRegistered { app } => {
                if self.apps.insert(app.app_id.clone(), app.clone()).is_some() {
                    return Err(format!("app {} registered twice", app.app_id));
                }
            }
            BrokerEvent::RequestSubmitted { request } => {
                if request.request_id.index() != self.requests.len() as u64 + 1 {
                    return Err(format!("request id {} out of order", request.request_id));
                }
                self.requests.push(request.clone());
            }
            BrokerEvent::PromptCreated { prompt } => {
                if prompt.prompt_id.index() != self.prompts.len() as u64 + 1 {
                    return Err(format!("prompt id {} out of order", prompt.prompt_id));
                }
                self.pending.insert(prompt.prompt_id.index());
                self.prompts.push(prompt.clone());
            }
            BrokerEvent::PromptDecided { prompt_id, grant } => {
                let p = self.prompt_mut(prompt_id)?;
                if p.state != PromptState::Pending {
                    return Err(format!("prompt {prompt_id} decided while {:?}", p.state));
                }
                p.state = PromptState::Decided;
                self.pending.remove(&prompt_id.index());
                let idx = self.push_grant(grant.clone());
                self.decision_of.insert(prompt_id.clone(), idx);
            }
            BrokerEvent::PromptExpired { prompt_id, .. } => {
                let p = self.prompt_mut(prompt_id)?;
                if p.state != PromptState::Pending {
                    return Err(format!("prompt {prompt_id} expired while {:?}", p.state));
                }
                p.state = PromptState::Expired;
                self.pending.remove(&prompt_id.index());
            }
            BrokerEvent::RequestCompleted { request_id, results, .. } => {
                let i = request_id.index().checked_sub(1).ok_or("request index 0")? as usize;
                let r = self
                    .requests
                    .get_mut(i)
                    .ok_or_else(|| format!("unknown request {request_id}"))?;
                r.results = Some(results.clone());
            }
            BrokerEvent::SessionEnded { app_id, new_session } => {
                let app = self
                    .apps
                    .get_mut(app_id)
                    .ok_or_else(|| format!("unknown app {app_id}"))?;
                app.session = *new_session;
            }
            BrokerEvent::GrantRevoked { grant } => {
                if grant.action != GrantAction::Revoke {
                    return Err("revocation record without REVOKE action".into());
                }
                self.push_grant(grant.clone());
            }
        }
        self.seq = rec.seq;
        self.last_at = Some(rec.at);
        Ok(())
    }
}
