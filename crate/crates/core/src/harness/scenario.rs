use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decider::{AutoDecider, DecisionPolicy, ScriptedDecision};
use super::HarnessError;
use crate::broker::{
    AppId, AppManifest, Broker, BrokerEvent, EventRecord, GrantMode, GrantStatus, LogicalClock, PermissionRequest, Prompt,
};
use crate::data;
use crate::model::{IntentRegistry, PermissionName, PermissionWithReason, PurposeLabel, ScopeLimitation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum Step {
    Request {
        app: AppId,
        #[serde(default)]
        request_code: i64,
        permissions: Vec<PermissionName>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reasons: Option<Vec<PermissionWithReason>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_prompts: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_error: Option<String>,
    },
    /// Checks the first pending prompt matching `app`/`permission`; with
    /// neither given, checks every pending prompt.
    ExpectPrompt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        app: Option<AppId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        permission: Option<PermissionName>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        purpose: Option<PurposeLabel>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Option<ScopeLimitation>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
        #[serde(default)]
        description_non_empty: bool,
    },
    ExpectPending {
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        app: Option<AppId>,
    },
    /// Decides every pending prompt (of `app`, if given) in FIFO order.
    AutoDecide {
        policy: DecisionPolicy,
        #[serde(default)]
        mode: GrantMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        app: Option<AppId>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        decisions: Vec<ScriptedDecision>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        allow_probability: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_decided: Option<usize>,
    },
    CheckGrant {
        app: AppId,
        permission: PermissionName,
        expect: GrantStatus,
    },
    Revoke {
        app: AppId,
        permission: PermissionName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_error: Option<String>,
    },
    EndSession {
        app: AppId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_expired: Option<usize>,
    },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Request { .. } => "request",
            Step::ExpectPrompt { .. } => "expect_prompt",
            Step::ExpectPending { .. } => "expect_pending",
            Step::AutoDecide { .. } => "auto_decide",
            Step::CheckGrant { .. } => "check_grant",
            Step::Revoke { .. } => "revoke",
            Step::EndSession { .. } => "end_session",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub apps: Vec<AppManifest>,
    pub steps: Vec<Step>,
}

pub const BUILTIN_SCENARIOS: [&str; 3] = ["sample-gps", "phonograph", "legacy-app"];

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::ScenarioMalformed(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str) -> Result<Self, HarnessError> {
        let text = data::scenario(name).ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
        Self::from_json(text)
    }

    /// Loads a built-in scenario by name, or a scenario file by path.
    pub fn resolve(name_or_path: &str) -> Result<Self, HarnessError> {
        match data::scenario(name_or_path) {
            Some(text) => Self::from_json(text),
            None if Path::new(name_or_path).exists() => Self::load(Path::new(name_or_path)),
            None => Err(HarnessError::UnknownScenario(name_or_path.to_string())),
        }
    }

    /// Steps may only mention apps the scenario registers and permissions
    /// those apps declare.
    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ScenarioMalformed(format!("{}: {m}", self.name)));
        let app = |id: &AppId| self.apps.iter().find(|a| &a.app_id == id);
        for (i, step) in self.steps.iter().enumerate() {
            let n = i + 1;
            let mut refs: Vec<(&AppId, Vec<&PermissionName>)> = Vec::new();
            match step {
                Step::Request {
                    app,
                    permissions,
                    reasons,
                    ..
                } => {
                    let mut ps: Vec<&PermissionName> = permissions.iter().collect();
                    ps.extend(reasons.iter().flatten().map(|r| &r.permission_name));
                    refs.push((app, ps));
                }
                Step::CheckGrant { app, permission, .. } | Step::Revoke { app, permission, .. } => {
                    refs.push((app, vec![permission]));
                }
                Step::ExpectPrompt { app: Some(app), permission, .. } => refs.push((app, permission.iter().collect())),
                Step::ExpectPrompt { app: None, permission: Some(p), .. } => {
                    if !self.apps.iter().any(|a| a.permissions.contains(p)) {
                        return bad(format!("step {n} mentions undeclared permission {p}"));
                    }
                }
                Step::ExpectPending { app: Some(app), .. } | Step::EndSession { app, .. } => refs.push((app, vec![])),
                Step::AutoDecide { app, decisions, policy, .. } => {
                    if let Some(app) = app {
                        refs.push((app, vec![]));
                    }
                    if *policy != DecisionPolicy::Scripted && !decisions.is_empty() {
                        return bad(format!("step {n}: decisions are only allowed with the scripted policy"));
                    }
                    for d in decisions {
                        let owner = d.app.as_deref().map(|a| AppId::new(a).map_err(HarnessError::ScenarioMalformed)).transpose()?;
                        let declared = match &owner {
                            Some(a) => app_declares(self, a, &d.permission),
                            None => self.apps.iter().any(|a| a.permissions.contains(&d.permission)),
                        };
                        if !declared {
                            return bad(format!("step {n} scripts undeclared permission {}", d.permission));
                        }
                    }
                }
                _ => {}
            }
            for (id, perms) in refs {
                let Some(m) = app(id) else {
                    return bad(format!("step {n} ({}) mentions unknown app {id}", step.name()));
                };
                if let Some(p) = perms.into_iter().find(|p| !m.permissions.contains(p)) {
                    return bad(format!("step {n} ({}) mentions permission {p} not declared by {id}", step.name()));
                }
            }
        }
        Ok(())
    }
}

fn app_declares(s: &Scenario, app: &AppId, p: &PermissionName) -> bool {
    s.apps.iter().any(|a| &a.app_id == app && a.permissions.contains(p))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpectationResult {
    pub step: usize,
    pub expectation: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub transcript: String,
    pub expectations: Vec<ExpectationResult>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.expectations.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExpectationResult> {
        self.expectations.iter().filter(|e| !e.passed)
    }
}

struct Run<'a> {
    broker: Broker,
    transcript: String,
    expectations: Vec<ExpectationResult>,
    step: usize,
    seen_seq: u64,
    seed: u64,
    _scenario: &'a Scenario,
}

fn describe_event(rec: &EventRecord) -> String {
    let body = match &rec.event {
        BrokerEvent::RegistryActivated { version, .. } => format!("version={version}"),
        BrokerEvent::AppRegistered { app } => format!(
            "{} \"{}\" {:?} session={} [{}]",
            app.app_id,
            app.display_name,
            app.sdk_generation,
            app.session,
            join(&app.declared_permissions)
        ),
        BrokerEvent::RequestSubmitted { request } => format!(
            "{} {} code={} [{}] prompts=[{}] granted=[{}]",
            request.request_id,
            request.app_id,
            request.request_code,
            join(&request.permissions),
            join(&request.prompt_ids),
            join(&request.already_granted)
        ),
        BrokerEvent::PromptCreated { prompt } => format!(
            "{} {} {} {} \"{}\" v{}",
            prompt.prompt_id, prompt.app_id, prompt.permission, prompt.intent, prompt.description, prompt.registry_version
        ),
        BrokerEvent::PromptDecided { prompt_id, grant } => {
            format!("{prompt_id} {:?}/{:?} {}", grant.verdict, grant.mode, grant.permission)
        }
        BrokerEvent::PromptExpired { prompt_id, app_id } => format!("{prompt_id} {app_id}"),
        BrokerEvent::RequestCompleted {
            request_id, results, ..
        } => format!(
            "{request_id} [{}]",
            results
                .iter()
                .map(|r| format!("{}={:?}", r.permission, r.status))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        BrokerEvent::SessionEnded { app_id, new_session } => format!("{app_id} session={new_session}"),
        BrokerEvent::GrantRevoked { grant } => format!("{} {}", grant.app_id, grant.permission),
    };
    format!("  #{:<4} {} {} {}", rec.seq, rec.at, rec.event.kind(), body)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl Run<'_> {
    fn line(&mut self, s: impl AsRef<str>) {
        self.transcript.push_str(s.as_ref());
        self.transcript.push('\n');
    }

    fn flush_events(&mut self) {
        let new: Vec<String> = self.broker.events_since(self.seen_seq).iter().map(describe_event).collect();
        self.seen_seq = self.broker.last_seq();
        for l in new {
            self.line(l);
        }
    }

    fn expect(&mut self, expectation: String, outcome: Result<(), String>) {
        let passed = outcome.is_ok();
        let detail = outcome.err();
        match &detail {
            None => self.line(format!("  PASS {expectation}")),
            Some(d) => self.line(format!("  FAIL {expectation}: {d}")),
        }
        self.expectations.push(ExpectationResult {
            step: self.step,
            expectation,
            passed,
            detail,
        });
    }

    fn check_prompt(p: &Prompt, purpose: &Option<PurposeLabel>, scope: &Option<ScopeLimitation>, description: &Option<String>, non_empty: bool) -> Result<(), String> {
        if let Some(u) = purpose {
            if &p.intent.purpose != u {
                return Err(format!("{} purpose is {}", p.prompt_id, p.intent.purpose));
            }
        }
        if let Some(s) = scope {
            if &p.intent.scope != s {
                return Err(format!("{} scope is {}", p.prompt_id, p.intent.scope));
            }
        }
        if let Some(d) = description {
            if &p.description != d {
                return Err(format!("{} description is {:?}", p.prompt_id, p.description));
            }
        }
        if non_empty && p.description.trim().is_empty() {
            return Err(format!("{} has an empty description", p.prompt_id));
        }
        Ok(())
    }

    fn run_step(&mut self, step: &Step) {
        match step {
            Step::Request {
                app,
                request_code,
                permissions,
                reasons,
                expect_prompts,
                expect_error,
            } => {
                self.line(format!("step {} request {app} code={request_code} [{}]", self.step, join(permissions)));
                let req = PermissionRequest {
                    app_id: app.clone(),
                    request_code: *request_code,
                    permissions: permissions.clone(),
                    reasons: reasons.clone(),
                };
                let result = self.broker.request_permissions(req);
                self.flush_events();
                match (result, expect_error) {
                    (Ok(receipt), None) => {
                        self.line(format!("  -> {} prompts=[{}]", receipt.request_id, join(&receipt.prompt_ids)));
                        if let Some(n) = expect_prompts {
                            let got = receipt.prompt_ids.len();
                            self.expect(format!("request creates {n} prompt(s)"), if got == *n { Ok(()) } else { Err(format!("created {got}")) });
                        }
                    }
                    (Ok(receipt), Some(code)) => {
                        self.line(format!("  -> {} prompts=[{}]", receipt.request_id, join(&receipt.prompt_ids)));
                        self.expect(format!("request fails with {code}"), Err("request succeeded".into()));
                    }
                    (Err(e), Some(code)) => {
                        self.line(format!("  -> error {}: {e}", e.code()));
                        self.expect(format!("request fails with {code}"), if e.code() == code { Ok(()) } else { Err(format!("failed with {}", e.code())) });
                    }
                    (Err(e), None) => {
                        self.line(format!("  -> error {}: {e}", e.code()));
                        self.expect("request succeeds".into(), Err(format!("{}: {e}", e.code())));
                    }
                }
            }
            Step::ExpectPrompt {
                app,
                permission,
                purpose,
                scope,
                description,
                description_non_empty,
            } => {
                self.line(format!("step {} expect_prompt", self.step));
                let pending = self.broker.pending_prompts(app.as_ref());
                let mut what = Vec::new();
                if let Some(p) = permission {
                    what.push(p.to_string());
                }
                if let Some(u) = purpose {
                    what.push(u.to_string());
                }
                if let Some(s) = scope {
                    what.push(s.to_string());
                }
                if *description_non_empty {
                    what.push("non-empty description".into());
                }
                let outcome = if permission.is_none() && app.is_none() {
                    if pending.is_empty() {
                        Err("no pending prompts".into())
                    } else {
                        pending
                            .iter()
                            .try_for_each(|p| Self::check_prompt(p, purpose, scope, description, *description_non_empty))
                    }
                } else {
                    match pending.iter().find(|p| permission.as_ref().is_none_or(|x| &p.permission == x)) {
                        Some(p) => Self::check_prompt(p, purpose, scope, description, *description_non_empty),
                        None => Err("no matching pending prompt".into()),
                    }
                };
                let label = if permission.is_none() && app.is_none() { "every pending prompt shows" } else { "prompt shows" };
                self.expect(format!("{label} {}", what.join(" ")), outcome);
            }
            Step::ExpectPending { count, app } => {
                self.line(format!("step {} expect_pending", self.step));
                let got = self.broker.pending_prompts(app.as_ref()).len();
                self.expect(format!("{count} pending prompt(s)"), if got == *count { Ok(()) } else { Err(format!("{got} pending")) });
            }
            Step::AutoDecide {
                policy,
                mode,
                app,
                decisions,
                allow_probability,
                expect_decided,
            } => {
                self.line(format!("step {} auto_decide {policy:?} {mode:?}", self.step));
                let mut decider = match policy {
                    DecisionPolicy::AllowAll => AutoDecider::AllowAll(*mode),
                    DecisionPolicy::DenyAll => AutoDecider::DenyAll(*mode),
                    DecisionPolicy::Scripted => AutoDecider::Scripted {
                        script: decisions.clone(),
                        default_mode: *mode,
                    },
                    DecisionPolicy::Random => AutoDecider::random(
                        self.seed.wrapping_add(self.step as u64),
                        allow_probability.unwrap_or(0.5),
                        *mode,
                    ),
                };
                let mut decided = 0;
                let mut errors = Vec::new();
                for p in self.broker.pending_prompts(app.as_ref()) {
                    if let Some(d) = decider.decide(&p) {
                        match self.broker.decide(&p.prompt_id, d) {
                            Ok(_) => decided += 1,
                            Err(e) => errors.push(format!("{}: {}", p.prompt_id, e.code())),
                        }
                    }
                }
                self.flush_events();
                if !errors.is_empty() {
                    self.expect("decisions accepted".into(), Err(errors.join(", ")));
                }
                if let Some(n) = expect_decided {
                    self.expect(format!("{n} prompt(s) decided"), if decided == *n { Ok(()) } else { Err(format!("decided {decided}")) });
                }
            }
            Step::CheckGrant { app, permission, expect } => {
                self.line(format!("step {} check_grant {app} {permission}", self.step));
                let outcome = match self.broker.check_grant(app, permission) {
                    Ok(s) if s == *expect => Ok(()),
                    Ok(s) => Err(format!("status {s:?}")),
                    Err(e) => Err(e.code().to_string()),
                };
                self.expect(format!("{permission} is {expect:?}"), outcome);
            }
            Step::Revoke {
                app,
                permission,
                expect_error,
            } => {
                self.line(format!("step {} revoke {app} {permission}", self.step));
                let result = self.broker.revoke(app, permission);
                self.flush_events();
                let outcome = match (result, expect_error) {
                    (Ok(_), None) => Ok(()),
                    (Ok(_), Some(_)) => Err("revocation succeeded".into()),
                    (Err(e), Some(code)) if e.code() == code => Ok(()),
                    (Err(e), _) => Err(e.code().to_string()),
                };
                let label = match expect_error {
                    Some(c) => format!("revoke fails with {c}"),
                    None => "revoke succeeds".into(),
                };
                self.expect(label, outcome);
            }
            Step::EndSession { app, expect_expired } => {
                self.line(format!("step {} end_session {app}", self.step));
                let result = self.broker.end_session(app);
                self.flush_events();
                match result {
                    Ok(expired) => {
                        if let Some(n) = expect_expired {
                            let got = expired.len();
                            self.expect(format!("{n} prompt(s) expired"), if got == *n { Ok(()) } else { Err(format!("expired {got}")) });
                        }
                    }
                    Err(e) => self.expect("session ends".into(), Err(e.code().to_string())),
                }
            }
        }
    }
}

/// Runs a scenario on a fresh broker with a logical clock. `seed` overrides
/// the scenario's own seed.
pub fn run_scenario(scenario: &Scenario, registry: &IntentRegistry, seed: Option<u64>) -> Result<ScenarioReport, HarnessError> {
    scenario.check()?;
    let seed = seed.unwrap_or(scenario.seed);
    let mut run = Run {
        broker: Broker::with_clock(registry.clone(), LogicalClock::new()),
        transcript: String::new(),
        expectations: Vec::new(),
        step: 0,
        seen_seq: 0,
        seed,
        _scenario: scenario,
    };
    run.line(format!("scenario {} seed={seed} registry=v{}", scenario.name, registry.version()));
    for m in &scenario.apps {
        run.broker
            .register_app(m.clone())
            .map_err(|e| HarnessError::ScenarioMalformed(format!("{}: cannot register {}: {e}", scenario.name, m.app_id)))?;
    }
    run.flush_events();
    for (i, step) in scenario.steps.iter().enumerate() {
        run.step = i + 1;
        run.run_step(step);
    }
    let passed = run.expectations.iter().filter(|e| e.passed).count();
    let total = run.expectations.len();
    let verdict = if passed == total { "PASS" } else { "FAIL" };
    let _ = writeln!(run.transcript, "result {verdict} {passed}/{total} expectations");
    Ok(ScenarioReport {
        name: scenario.name.clone(),
        seed,
        transcript: run.transcript,
        expectations: run.expectations,
    })
}
