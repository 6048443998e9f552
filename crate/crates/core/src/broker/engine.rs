use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use super::clock::{Clock, SystemClock, Timestamp};
use super::event::{BrokerEvent, EventRecord};
use super::journal::Journal;
use super::state::State;
use super::types::*;
use super::{BrokerError, ValidationFailure};
use crate::model::{IntentLabel, IntentRegistry, PermissionName, PermissionWithReason};

pub type Observer = Box<dyn Fn(&EventRecord) + Send>;

/// The consent broker: one event-sourced state machine.
///
/// Every mutation is turned into events, journaled (when a journal is
/// attached), applied, and handed to the observer, in that order.
pub struct Broker {
    state: State,
    log: Vec<EventRecord>,
    journal: Option<Journal>,
    clock: Box<dyn Clock>,
    pinned: Option<Timestamp>,
    observer: Option<Observer>,
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker")
            .field("seq", &self.state.seq)
            .field("apps", &self.state.apps.len())
            .field("prompts", &self.state.prompts.len())
            .finish_non_exhaustive()
    }
}

impl Broker {
    /// In-memory broker on the wall clock.
    pub fn new(registry: IntentRegistry) -> Self {
        Self::with_clock(registry, SystemClock)
    }

    pub fn with_clock(registry: IntentRegistry, clock: impl Clock + 'static) -> Self {
        let mut b = Self {
            state: State::default(),
            log: Vec::new(),
            journal: None,
            clock: Box::new(clock),
            pinned: None,
            observer: None,
        };
        b.activate(&registry).expect("in-memory activation cannot fail");
        b
    }

    /// Replays the journal at `path` (created if absent) and activates
    /// `registry` if it differs from the journal's active registry.
    pub fn open(path: impl AsRef<Path>, registry: IntentRegistry, clock: impl Clock + 'static) -> Result<Self, BrokerError> {
        let (journal, records) = Journal::open(path.as_ref())?;
        let mut b = Self::replay(records, clock).map_err(|(line, message)| BrokerError::JournalCorrupt {
            path: path.as_ref().display().to_string(),
            line,
            message,
        })?;
        b.journal = Some(journal);
        let current = b.state.registry().map(|r| r.to_canonical_json());
        if current.as_deref() != Some(registry.to_canonical_json().as_str()) {
            if let Some(active) = b.state.active {
                if registry.version() <= active {
                    return Err(BrokerError::RegistryConflict {
                        active,
                        offered: registry.version(),
                    });
                }
            }
            b.activate(&registry)?;
        }
        Ok(b)
    }

    /// Rebuilds a broker from recorded events. On failure returns the
    /// 1-based index of the offending record.
    pub fn replay(records: Vec<EventRecord>, clock: impl Clock + 'static) -> Result<Self, (usize, String)> {
        let mut state = State::default();
        for (i, rec) in records.iter().enumerate() {
            state.apply(rec).map_err(|m| (i + 1, m))?;
        }
        if !records.is_empty() && state.active.is_none() {
            return Err((1, "journal has no active registry".into()));
        }
        Ok(Self {
            state,
            log: records,
            journal: None,
            clock: Box::new(clock),
            pinned: None,
            observer: None,
        })
    }

    pub fn set_observer(&mut self, observer: Observer) {
        self.observer = Some(observer);
    }

    pub fn set_durable(&mut self, durable: bool) {
        if let Some(j) = &mut self.journal {
            j.set_durable(durable);
        }
    }

    fn emit(&mut self, event: BrokerEvent) -> Result<EventRecord, BrokerError> {
        let mut at = self.pinned.take().unwrap_or_else(|| self.clock.now());
        if let Some(last) = self.state.last_at {
            at = at.max(last);
        }
        let rec = EventRecord {
            seq: self.state.seq + 1,
            at,
            event,
        };
        if let Some(j) = &mut self.journal {
            j.append(&rec)?;
        }
        self.state
            .apply(&rec)
            .unwrap_or_else(|m| panic!("broker produced an inapplicable event: {m}"));
        if let Some(obs) = &self.observer {
            obs(&rec);
        }
        self.log.push(rec.clone());
        Ok(rec)
    }

    /// Reads the clock for a record built before its event is emitted; the
    /// next emitted event carries the same instant.
    fn stamp(&mut self) -> Timestamp {
        let mut t = self.clock.now();
        if let Some(last) = self.state.last_at {
            t = t.max(last);
        }
        self.pinned = Some(t);
        t
    }

    // ----- queries -----

    pub fn registry(&self) -> &IntentRegistry {
        self.state.registry().expect("broker always has an active registry")
    }

    pub fn registry_arc(&self) -> Arc<IntentRegistry> {
        self.state.registry().expect("broker always has an active registry").clone()
    }

    pub fn registry_version(&self, version: u64) -> Option<&IntentRegistry> {
        self.state.registries.get(&version).map(Arc::as_ref)
    }

    pub fn last_seq(&self) -> u64 {
        self.state.seq
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn events_since(&self, seq: u64) -> &[EventRecord] {
        let start = self.log.partition_point(|r| r.seq <= seq);
        &self.log[start..]
    }

    pub fn app(&self, app_id: &AppId) -> Option<&AppRecord> {
        self.state.apps.get(app_id)
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppRecord> + '_ {
        self.state.apps.values()
    }

    pub fn prompt(&self, id: &PromptId) -> Option<&Prompt> {
        self.state.prompt(id)
    }

    pub fn request(&self, id: &RequestId) -> Option<&RequestRecord> {
        self.state.request(id)
    }

    /// Pending prompts in creation order, optionally for one app.
    pub fn pending_prompts(&self, app: Option<&AppId>) -> Vec<Prompt> {
        self.state
            .pending
            .iter()
            .map(|&n| &self.state.prompts[n as usize - 1])
            .filter(|p| app.is_none_or(|a| &p.app_id == a))
            .cloned()
            .collect()
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.state.prompts
    }

    /// Full grant history of an app, oldest first.
    pub fn grants(&self, app_id: &AppId) -> Result<Vec<GrantRecord>, BrokerError> {
        self.require_app(app_id)?;
        Ok(self.state.grants.iter().filter(|g| &g.app_id == app_id).cloned().collect())
    }

    pub fn all_grants(&self) -> &[GrantRecord] {
        &self.state.grants
    }

    fn require_app(&self, app_id: &AppId) -> Result<&AppRecord, BrokerError> {
        self.state
            .apps
            .get(app_id)
            .ok_or_else(|| BrokerError::UnknownApp(app_id.to_string()))
    }

    /// The decision currently in force for (app, permission): the latest
    /// record, unless it is a revocation, a ONCE decision from an earlier
    /// session, or bound to a registry entry that has since changed.
    pub fn live_decision(&self, app_id: &AppId, permission: &PermissionName) -> Option<&GrantRecord> {
        let app = self.state.apps.get(app_id)?;
        let idx = *self.state.latest_grant.get(&(app_id.clone(), permission.clone()))?;
        let g = &self.state.grants[idx];
        if g.action == GrantAction::Revoke {
            return None;
        }
        if g.mode == GrantMode::Once && g.session != app.session {
            return None;
        }
        if !g.intent_shown.is_legacy()
            && self.registry().scope_for(permission, &g.intent_shown.purpose) != Some(g.intent_shown.scope)
        {
            return None;
        }
        Some(g)
    }

    pub fn check_grant(&self, app_id: &AppId, permission: &PermissionName) -> Result<GrantStatus, BrokerError> {
        self.require_app(app_id)?;
        if !self.registry().contains_permission(permission) {
            return Err(BrokerError::UnknownPermission(permission.to_string()));
        }
        Ok(match self.live_decision(app_id, permission).map(|g| g.verdict) {
            Some(Verdict::Allow) => GrantStatus::Granted,
            Some(Verdict::Deny) => GrantStatus::Denied,
            None => GrantStatus::Unrequested,
        })
    }

    // ----- commands -----

    fn activate(&mut self, registry: &IntentRegistry) -> Result<(), BrokerError> {
        self.emit(BrokerEvent::RegistryActivated {
            version: registry.version(),
            registry: registry.to_document(),
        })?;
        Ok(())
    }

    /// Switches to a newer registry. Existing grants stay on record; those
    /// whose (permission, purpose, scope) entry changed stop being live.
    pub fn upgrade_registry(&mut self, registry: IntentRegistry) -> Result<(), BrokerError> {
        let active = self.registry().version();
        if registry.version() <= active {
            return Err(BrokerError::RegistryConflict {
                active,
                offered: registry.version(),
            });
        }
        self.activate(&registry)
    }

    pub fn register_app(&mut self, manifest: AppManifest) -> Result<AppRecord, BrokerError> {
        if self.state.apps.contains_key(&manifest.app_id) {
            return Err(BrokerError::DuplicateApp(manifest.app_id.to_string()));
        }
        let registry = self.registry();
        let mut declared: Vec<PermissionName> = Vec::with_capacity(manifest.permissions.len());
        for p in manifest.permissions {
            if !registry.contains_permission(&p) {
                return Err(BrokerError::UnknownPermission(p.to_string()));
            }
            if !declared.contains(&p) {
                declared.push(p);
            }
        }
        let mut failures = Vec::new();
        let mut seen = BTreeSet::new();
        for intent in &manifest.intents {
            let perm = &intent.permission_name;
            let reason = if !seen.insert(perm.clone()) {
                Some("DUPLICATE_REASON")
            } else if !declared.contains(perm) {
                Some("UNDECLARED_PERMISSION")
            } else {
                let v = registry.validate_intent(intent);
                (!v.is_ok()).then_some(v.code())
            };
            if let Some(reason) = reason {
                failures.push(ValidationFailure::new(perm, reason));
            }
        }
        if !failures.is_empty() {
            return Err(BrokerError::ValidationFailed(failures));
        }
        let registered_at = self.stamp();
        let app = AppRecord {
            app_id: manifest.app_id,
            display_name: manifest.display_name,
            declared_permissions: declared,
            sdk_generation: manifest.sdk_generation,
            intents: manifest.intents,
            session: 1,
            registered_at,
        };
        self.emit(BrokerEvent::AppRegistered { app: app.clone() })?;
        Ok(app)
    }

    /// Validates the whole request, then creates one prompt per permission
    /// that is not already covered by a live ALLOW/ALWAYS grant for the same
    /// intent. Nothing is created if any check fails.
    pub fn request_permissions(&mut self, request: PermissionRequest) -> Result<RequestReceipt, BrokerError> {
        let app = self.require_app(&request.app_id)?.clone();
        let registry = self.registry_arc();

        let mut permissions: Vec<PermissionName> = Vec::with_capacity(request.permissions.len());
        for p in request.permissions {
            if !registry.contains_permission(&p) {
                return Err(BrokerError::UnknownPermission(p.to_string()));
            }
            if !app.declares(&p) {
                return Err(BrokerError::UndeclaredPermission(p.to_string()));
            }
            if !permissions.contains(&p) {
                permissions.push(p);
            }
        }

        let mut failures = Vec::new();
        let mut supplied: Vec<&PermissionWithReason> = Vec::new();
        for reason in request.reasons.iter().flatten() {
            let perm = &reason.permission_name;
            if supplied.iter().any(|r| &r.permission_name == perm) {
                failures.push(ValidationFailure::new(perm, "DUPLICATE_REASON"));
            } else if !permissions.contains(perm) {
                failures.push(ValidationFailure::new(perm, "UNREQUESTED_PERMISSION"));
            } else {
                supplied.push(reason);
            }
        }
        let mut intents: Vec<PermissionWithReason> = Vec::with_capacity(permissions.len());
        for p in &permissions {
            let declared = supplied
                .iter()
                .find(|r| &r.permission_name == p)
                .copied()
                .or_else(|| app.static_intent(p))
                .cloned()
                .unwrap_or_else(|| PermissionWithReason::legacy(p.clone()));
            let verdict = registry.validate_intent(&declared);
            if !verdict.is_ok() {
                failures.push(ValidationFailure::new(p, verdict.code()));
            }
            intents.push(declared);
        }
        if !failures.is_empty() {
            return Err(BrokerError::ValidationFailed(failures));
        }

        let request_id = RequestId::from_index(self.state.requests.len() as u64 + 1);
        let mut next_prompt = self.state.prompts.len() as u64;
        let mut prompts = Vec::new();
        let mut already_granted = Vec::new();
        let submitted_at = self.stamp();
        for declared in intents {
            let intent: IntentLabel = declared.intent();
            let covered = self
                .live_decision(&app.app_id, &declared.permission_name)
                .is_some_and(|g| g.verdict == Verdict::Allow && g.mode == GrantMode::Always && g.intent_shown == intent);
            if covered {
                already_granted.push(declared.permission_name);
                continue;
            }
            next_prompt += 1;
            prompts.push(Prompt {
                prompt_id: PromptId::from_index(next_prompt),
                request_id: request_id.clone(),
                app_id: app.app_id.clone(),
                app_display_name: app.display_name.clone(),
                permission: declared.permission_name,
                intent,
                description: declared.purpose_description,
                policy_link: declared.policy_link,
                registry_version: registry.version(),
                state: PromptState::Pending,
                session: app.session,
                created_at: submitted_at,
            });
        }
        let record = RequestRecord {
            request_id: request_id.clone(),
            app_id: app.app_id.clone(),
            request_code: request.request_code,
            permissions,
            prompt_ids: prompts.iter().map(|p| p.prompt_id.clone()).collect(),
            already_granted: already_granted.clone(),
            submitted_at,
            results: None,
        };
        let receipt = RequestReceipt {
            request_id: request_id.clone(),
            prompt_ids: record.prompt_ids.clone(),
            already_granted,
        };
        self.emit(BrokerEvent::RequestSubmitted { request: record })?;
        for prompt in prompts {
            self.emit(BrokerEvent::PromptCreated { prompt })?;
        }
        self.maybe_complete(&request_id)?;
        Ok(receipt)
    }

    fn maybe_complete(&mut self, request_id: &RequestId) -> Result<(), BrokerError> {
        let Some(req) = self.state.request(request_id) else {
            return Ok(());
        };
        if req.is_complete() {
            return Ok(());
        }
        let mut results = Vec::with_capacity(req.permissions.len());
        for perm in &req.permissions {
            if req.already_granted.contains(perm) {
                results.push(PermissionResult {
                    permission: perm.clone(),
                    status: GrantStatus::Granted,
                    prompt_id: None,
                });
                continue;
            }
            let prompt = req
                .prompt_ids
                .iter()
                .filter_map(|id| self.state.prompt(id))
                .find(|p| &p.permission == perm)
                .expect("every permission of a request has a prompt or a grant");
            let status = match prompt.state {
                PromptState::Pending => return Ok(()),
                PromptState::Expired => GrantStatus::Denied,
                PromptState::Decided => match self.state.decision_of.get(&prompt.prompt_id).map(|&i| self.state.grants[i].verdict) {
                    Some(Verdict::Allow) => GrantStatus::Granted,
                    _ => GrantStatus::Denied,
                },
            };
            results.push(PermissionResult {
                permission: perm.clone(),
                status,
                prompt_id: Some(prompt.prompt_id.clone()),
            });
        }
        let (app_id, request_code) = (req.app_id.clone(), req.request_code);
        self.emit(BrokerEvent::RequestCompleted {
            request_id: request_id.clone(),
            app_id,
            request_code,
            results,
        })?;
        Ok(())
    }

    /// Records the user's answer. Re-submitting the same answer returns the
    /// original grant; a different answer is `ALREADY_DECIDED`.
    pub fn decide(&mut self, prompt_id: &PromptId, decision: ConsentDecision) -> Result<GrantRecord, BrokerError> {
        let prompt = self
            .state
            .prompt(prompt_id)
            .ok_or_else(|| BrokerError::UnknownPrompt(prompt_id.to_string()))?
            .clone();
        match prompt.state {
            PromptState::Decided => {
                let g = &self.state.grants[self.state.decision_of[prompt_id]];
                return if g.verdict == decision.verdict && g.mode == decision.mode {
                    Ok(g.clone())
                } else {
                    Err(BrokerError::AlreadyDecided(prompt_id.to_string()))
                };
            }
            PromptState::Expired => return Err(BrokerError::PromptExpired(prompt_id.to_string())),
            PromptState::Pending => {}
        }
        let decided_at = self.stamp();
        let grant = GrantRecord {
            action: GrantAction::Decide,
            app_id: prompt.app_id.clone(),
            permission: prompt.permission.clone(),
            verdict: decision.verdict,
            mode: decision.mode,
            intent_shown: prompt.intent.clone(),
            registry_version: prompt.registry_version,
            decided_at,
            prompt_id: prompt_id.clone(),
            session: prompt.session,
        };
        self.emit(BrokerEvent::PromptDecided {
            prompt_id: prompt_id.clone(),
            grant: grant.clone(),
        })?;
        self.maybe_complete(&prompt.request_id)?;
        Ok(grant)
    }

    /// Appends a revocation for the live decision on (app, permission).
    pub fn revoke(&mut self, app_id: &AppId, permission: &PermissionName) -> Result<GrantRecord, BrokerError> {
        self.require_app(app_id)?;
        let live = self
            .live_decision(app_id, permission)
            .ok_or_else(|| BrokerError::NoGrant {
                app: app_id.to_string(),
                permission: permission.to_string(),
            })?
            .clone();
        let at = self.stamp();
        let session = self.state.apps[app_id].session;
        let grant = GrantRecord {
            action: GrantAction::Revoke,
            decided_at: at,
            session,
            ..live
        };
        self.emit(BrokerEvent::GrantRevoked { grant: grant.clone() })?;
        Ok(grant)
    }

    /// Ends the app's session: pending prompts expire (counting as denied)
    /// and ONCE decisions stop being live. Returns the expired prompt ids.
    pub fn end_session(&mut self, app_id: &AppId) -> Result<Vec<PromptId>, BrokerError> {
        let session = self.require_app(app_id)?.session;
        let pending = self.pending_prompts(Some(app_id));
        let mut requests: Vec<RequestId> = Vec::new();
        for p in &pending {
            self.emit(BrokerEvent::PromptExpired {
                prompt_id: p.prompt_id.clone(),
                app_id: app_id.clone(),
            })?;
            if !requests.contains(&p.request_id) {
                requests.push(p.request_id.clone());
            }
        }
        for r in &requests {
            self.maybe_complete(r)?;
        }
        self.emit(BrokerEvent::SessionEnded {
            app_id: app_id.clone(),
            new_session: session + 1,
        })?;
        Ok(pending.into_iter().map(|p| p.prompt_id).collect())
    }
}
