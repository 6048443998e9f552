//! Many requester apps hammering one broker through its command queue.
//!
//! Each app is driven by its own task and decides only its own prompts, so
//! its outcome is a function of the seed alone; the merged report is ordered
//! by app and does not depend on how tasks interleave.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::decider::AutoDecider;
use super::HarnessError;
use crate::broker::{
    AppId, AppManifest, Broker, BrokerEvent, BrokerHandle, GrantMode, GrantStatus, LogicalClock, PermissionRequest,
    SdkGeneration,
};
use crate::exec::{self, ExecMode};
use crate::model::{IntentRegistry, PermissionName, PermissionWithReason};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StressConfig {
    pub apps: usize,
    pub requests_per_app: usize,
    pub seed: u64,
    pub mode: ExecMode,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            apps: 16,
            requests_per_app: 20,
            seed: 0,
            mode: ExecMode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestOutcome {
    pub request_code: i64,
    pub permissions: Vec<PermissionName>,
    pub prompts: usize,
    pub results: Vec<GrantStatus>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AppOutcome {
    pub app_id: AppId,
    pub requests: Vec<RequestOutcome>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StressReport {
    pub apps: Vec<AppOutcome>,
    pub events: u64,
    pub prompts: usize,
    pub violations: Vec<String>,
}

impl StressReport {
    /// Text form that is identical across runs with the same seed.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        for app in &self.apps {
            for r in &app.requests {
                let perms: Vec<&str> = r.permissions.iter().map(|p| p.as_str()).collect();
                let _ = writeln!(
                    out,
                    "{} #{} [{}] prompts={} {:?}",
                    app.app_id,
                    r.request_code,
                    perms.join(","),
                    r.prompts,
                    r.results
                );
            }
        }
        let _ = writeln!(out, "events={} prompts={}", self.events, self.prompts);
        out
    }
}

fn app_id(i: usize) -> AppId {
    AppId::new(format!("stress.app-{i:03}")).expect("valid id")
}

fn drive_app(handle: &BrokerHandle, registry: &IntentRegistry, index: usize, cfg: &StressConfig) -> Result<AppOutcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let catalog = registry.permissions();
    let declared: Vec<PermissionName> = catalog.choose_multiple(&mut rng, 6.min(catalog.len())).cloned().collect();
    let id = app_id(index);
    let manifest = AppManifest {
        app_id: id.clone(),
        display_name: format!("Stress app {index}"),
        sdk_generation: SdkGeneration::IntentAware,
        permissions: declared.clone(),
        intents: Vec::new(),
    };
    handle.call(move |b| b.register_app(manifest))??;
    let mut decider = AutoDecider::random(rng.random(), 0.5, GrantMode::Always);
    let mut requests = Vec::with_capacity(cfg.requests_per_app);
    for code in 0..cfg.requests_per_app as i64 {
        let n = rng.random_range(1..=declared.len());
        let permissions: Vec<PermissionName> = declared.choose_multiple(&mut rng, n).cloned().collect();
        let intent_aware = rng.random_bool(0.5);
        let reasons = intent_aware.then(|| {
            permissions
                .iter()
                .filter_map(|p| {
                    let intent = registry.approved_purposes(p).ok()?.into_iter().next()?;
                    PermissionWithReason::new(p.clone(), intent.purpose, "Stress run.", intent.scope).ok()
                })
                .collect::<Vec<_>>()
        });
        let mut req = PermissionRequest::legacy(id.clone(), code, permissions.clone());
        req.reasons = reasons;
        let receipt = handle.call(move |b| b.request_permissions(req))??;
        let prompts = receipt.prompt_ids.len();
        for pid in receipt.prompt_ids.clone() {
            let prompt = handle
                .call({
                    let pid = pid.clone();
                    move |b| b.prompt(&pid).cloned()
                })?
                .ok_or_else(|| HarnessError::Stress(format!("prompt {pid} vanished")))?;
            if let Some(d) = decider.decide(&prompt) {
                handle.call(move |b| b.decide(&pid, d))??;
            }
        }
        let rid = receipt.request_id.clone();
        let results = handle
            .call(move |b| b.request(&rid).and_then(|r| r.results.clone()))?
            .ok_or_else(|| HarnessError::Stress(format!("request {} did not complete", receipt.request_id)))?;
        requests.push(RequestOutcome {
            request_code: code,
            permissions,
            prompts,
            results: results.into_iter().map(|r| r.status).collect(),
        });
    }
    Ok(AppOutcome { app_id: id, requests })
}

/// Checks the final journal: contiguous sequence numbers, one decision per
/// prompt and a completion for every request.
fn audit(broker: &Broker) -> Vec<String> {
    let mut violations = Vec::new();
    for (i, e) in broker.events().iter().enumerate() {
        if e.seq != i as u64 + 1 {
            violations.push(format!("event {i} has seq {}", e.seq));
            break;
        }
    }
    let mut decided: BTreeMap<String, usize> = BTreeMap::new();
    let mut created = 0;
    let mut submitted = 0;
    let mut completed = 0;
    for e in broker.events() {
        match &e.event {
            BrokerEvent::PromptCreated { .. } => created += 1,
            BrokerEvent::PromptDecided { prompt_id, .. } => *decided.entry(prompt_id.to_string()).or_default() += 1,
            BrokerEvent::RequestSubmitted { .. } => submitted += 1,
            BrokerEvent::RequestCompleted { .. } => completed += 1,
            _ => {}
        }
    }
    if decided.len() != created {
        violations.push(format!("{created} prompts created, {} decided", decided.len()));
    }
    if let Some((p, n)) = decided.iter().find(|(_, n)| **n > 1) {
        violations.push(format!("prompt {p} decided {n} times"));
    }
    if submitted != completed {
        violations.push(format!("{submitted} requests submitted, {completed} completed"));
    }
    violations
}

pub fn run_stress(registry: &IntentRegistry, cfg: &StressConfig) -> Result<StressReport, HarnessError> {
    let handle = BrokerHandle::spawn(Broker::with_clock(registry.clone(), LogicalClock::new()));
    let indices: Vec<usize> = (0..cfg.apps).collect();
    let outcomes = exec::map_ordered(cfg.mode, &indices, |&i| drive_app(&handle, registry, i, cfg));
    let broker = handle
        .shutdown()
        .ok_or_else(|| HarnessError::Stress("broker worker did not stop".into()))?;
    let apps = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(StressReport {
        prompts: broker.prompts().len(),
        events: broker.last_seq(),
        violations: audit(&broker),
        apps,
    })
}
