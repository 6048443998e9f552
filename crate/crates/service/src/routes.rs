use std::collections::HashMap;
use std::sync::atomic::Ordering;

use axum::body::Bytes;
use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use consentcore::broker::{
    AppId, AppManifest, Broker, BrokerError, ConsentDecision, GrantRecord, PermissionRequest,
    PermissionResult, Prompt, PromptId, PromptState, RequestId, RequestReceipt,
};
use consentcore::model::{PermissionName, PermissionWithReason};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::oneshot;

use crate::envelope::{respond, ApiError, Reply, REQUEST_ID_HEADER};
use crate::stream::stream_prompts;
use crate::AppState;

pub(crate) fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/registry", get(registry))
        .route("/v1/apps", post(register_app).get(list_apps))
        .route("/v1/apps/{app}", get(get_app))
        .route("/v1/apps/{app}/requests", post(submit_request))
        .route("/v1/apps/{app}/requests/{request}", get(get_request))
        .route("/v1/apps/{app}/grants", get(list_grants))
        .route("/v1/apps/{app}/grants/{perm}", get(check_grant))
        .route("/v1/apps/{app}/grants/{perm}/revoke", post(revoke))
        .route("/v1/apps/{app}/session/end", post(end_session))
        .route("/v1/prompts", get(list_prompts))
        .route("/v1/prompts/stream", get(stream_prompts))
        .route("/v1/prompts/{prompt}", get(get_prompt))
        .route("/v1/prompts/{prompt}/decision", post(decide))
        .route("/v1/events", get(list_events))
        .fallback(not_found)
        .with_state(state)
}

/// Echoes the caller's `X-Request-Id`, or numbers the request.
pub(crate) struct ReqId(pub String);

impl FromRequestParts<AppState> for ReqId {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let given = parts
            .headers
            .get(REQUEST_ID_HEADER)
            .and_then(|v| v.to_str().ok())
            .filter(|s| !s.is_empty() && s.len() <= 128);
        Ok(Self(match given {
            Some(id) => id.to_string(),
            None => format!("req-{}", state.next_request.fetch_add(1, Ordering::Relaxed) + 1),
        }))
    }
}

/// Runs `f` on the broker's command queue without blocking the runtime.
pub(crate) async fn on_broker<R, F>(state: &AppState, f: F) -> Result<R, ApiError>
where
    R: Send + 'static,
    F: FnOnce(&mut Broker) -> R + Send + 'static,
{
    let (tx, rx) = oneshot::channel();
    state.broker.submit_with(f, move |r| {
        let _ = tx.send(r);
    })?;
    rx.await.map_err(|_| BrokerError::QueueClosed.into())
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::malformed(format!("request body: {e}")))
}

fn path<T>(extracted: Result<Path<T>, PathRejection>) -> Result<T, ApiError> {
    extracted
        .map(|Path(p)| p)
        .map_err(|e| ApiError::malformed(e.body_text()))
}

fn query(
    extracted: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<HashMap<String, String>, ApiError> {
    extracted
        .map(|Query(q)| q)
        .map_err(|e| ApiError::malformed(e.body_text()))
}

fn app_id(raw: &str) -> Result<AppId, ApiError> {
    AppId::new(raw).map_err(ApiError::malformed)
}

fn permission(raw: &str) -> Result<PermissionName, ApiError> {
    PermissionName::new(raw).map_err(|e| ApiError::malformed(e.to_string()))
}

fn prompt_id(raw: &str) -> Result<PromptId, ApiError> {
    raw.parse().map_err(ApiError::malformed)
}

async fn not_found(ReqId(rid): ReqId) -> Response {
    respond(&rid, Err(ApiError::not_found("NOT_FOUND", "no such endpoint")))
}

async fn healthz(State(state): State<AppState>, ReqId(rid): ReqId) -> Response {
    let outcome = on_broker(&state, |b| (b.last_seq(), b.registry().version())).await;
    respond(
        &rid,
        outcome.and_then(|(last_seq, version)| {
            Reply::ok(json!({ "status": "ok", "lastSeq": last_seq, "registryVersion": version }))
        }),
    )
}

async fn registry(State(state): State<AppState>, ReqId(rid): ReqId) -> Response {
    let outcome = on_broker(&state, |b| {
        let reg = b.registry();
        (reg.version(), reg.to_document())
    })
    .await;
    respond(
        &rid,
        outcome.and_then(|(version, doc)| Reply::ok(json!({ "version": version, "registry": doc }))),
    )
}

async fn register_app(State(state): State<AppState>, ReqId(rid): ReqId, bytes: Bytes) -> Response {
    let outcome = async {
        let manifest: AppManifest = body(&bytes)?;
        let record = on_broker(&state, move |b| b.register_app(manifest)).await??;
        Reply::created(record)
    };
    respond(&rid, outcome.await)
}

async fn list_apps(State(state): State<AppState>, ReqId(rid): ReqId) -> Response {
    let outcome = on_broker(&state, |b| b.apps().cloned().collect::<Vec<_>>()).await;
    respond(&rid, outcome.and_then(|apps| Reply::ok(json!({ "apps": apps }))))
}

async fn get_app(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    app: Result<Path<String>, PathRejection>,
) -> Response {
    let outcome = async {
        let app = app_id(&path(app)?)?;
        let record = on_broker(&state, move |b| {
            b.app(&app).cloned().ok_or(BrokerError::UnknownApp(app.to_string()))
        })
        .await??;
        Reply::ok(record)
    };
    respond(&rid, outcome.await)
}

/// Body of `POST /v1/apps/{app}/requests`. The app id comes from the path.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RequestBody {
    #[serde(default)]
    app_id: Option<AppId>,
    #[serde(default)]
    request_code: i64,
    permissions: Vec<PermissionName>,
    #[serde(default)]
    reasons: Option<Vec<PermissionWithReason>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SubmitReply {
    #[serde(flatten)]
    receipt: RequestReceipt,
    prompts: Vec<Prompt>,
    /// Present when no prompt was needed and the request completed at once.
    #[serde(skip_serializing_if = "Option::is_none")]
    results: Option<Vec<PermissionResult>>,
}

async fn submit_request(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    app: Result<Path<String>, PathRejection>,
    bytes: Bytes,
) -> Response {
    let outcome = async {
        let app = app_id(&path(app)?)?;
        let req: RequestBody = body(&bytes)?;
        if let Some(other) = &req.app_id {
            if other != &app {
                return Err(ApiError::malformed(format!(
                    "body appId {other} does not match path app {app}"
                )));
            }
        }
        let request = PermissionRequest {
            app_id: app,
            request_code: req.request_code,
            permissions: req.permissions,
            reasons: req.reasons,
        };
        let reply = on_broker(&state, move |b| {
            let receipt = b.request_permissions(request)?;
            let prompts = receipt
                .prompt_ids
                .iter()
                .filter_map(|id| b.prompt(id).cloned())
                .collect();
            let results = b.request(&receipt.request_id).and_then(|r| r.results.clone());
            Ok::<_, BrokerError>(SubmitReply {
                receipt,
                prompts,
                results,
            })
        })
        .await??;
        Reply::created(reply)
    };
    respond(&rid, outcome.await)
}

async fn get_request(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Path<(String, String)>, PathRejection>,
) -> Response {
    let outcome = async {
        let (app, request) = path(params)?;
        let app = app_id(&app)?;
        let request: RequestId = request.parse().map_err(ApiError::malformed)?;
        let found = on_broker(&state, move |b| {
            b.request(&request).filter(|r| r.app_id == app).cloned()
        })
        .await?;
        match found {
            Some(record) => Reply::ok(record),
            None => Err(ApiError::not_found("UNKNOWN_REQUEST", "unknown request for this app")),
        }
    };
    respond(&rid, outcome.await)
}

/// One row of an app's grant history, with the name the UI displays.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GrantRow {
    app_display_name: String,
    #[serde(flatten)]
    grant: GrantRecord,
}

async fn list_grants(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    app: Result<Path<String>, PathRejection>,
) -> Response {
    let outcome = async {
        let app = app_id(&path(app)?)?;
        let (name, grants) = on_broker(&state, move |b| {
            let grants = b.grants(&app)?;
            let name = b.app(&app).map(|a| a.display_name.clone()).unwrap_or_default();
            Ok::<_, BrokerError>((name, grants))
        })
        .await??;
        let rows: Vec<GrantRow> = grants
            .into_iter()
            .map(|grant| GrantRow {
                app_display_name: name.clone(),
                grant,
            })
            .collect();
        Reply::ok(json!({ "grants": rows }))
    };
    respond(&rid, outcome.await)
}

async fn check_grant(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Path<(String, String)>, PathRejection>,
) -> Response {
    let outcome = async {
        let (app, perm) = path(params)?;
        let (app, perm) = (app_id(&app)?, permission(&perm)?);
        let echo = (app.clone(), perm.clone());
        let status = on_broker(&state, move |b| b.check_grant(&app, &perm)).await??;
        Reply::ok(json!({ "appId": echo.0, "permission": echo.1, "status": status }))
    };
    respond(&rid, outcome.await)
}

async fn revoke(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Path<(String, String)>, PathRejection>,
) -> Response {
    let outcome = async {
        let (app, perm) = path(params)?;
        let (app, perm) = (app_id(&app)?, permission(&perm)?);
        let record = on_broker(&state, move |b| b.revoke(&app, &perm)).await??;
        Reply::ok(record)
    };
    respond(&rid, outcome.await)
}

async fn end_session(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    app: Result<Path<String>, PathRejection>,
) -> Response {
    let outcome = async {
        let app = app_id(&path(app)?)?;
        let (expired, session) = on_broker(&state, move |b| {
            let expired = b.end_session(&app)?;
            let session = b.app(&app).map_or(0, |a| a.session);
            Ok::<_, BrokerError>((expired, session))
        })
        .await??;
        Reply::ok(json!({ "expired": expired, "session": session }))
    };
    respond(&rid, outcome.await)
}

fn parse_state(raw: Option<&String>) -> Result<Option<PromptState>, ApiError> {
    match raw.map(String::as_str) {
        None | Some("pending") => Ok(Some(PromptState::Pending)),
        Some("decided") => Ok(Some(PromptState::Decided)),
        Some("expired") => Ok(Some(PromptState::Expired)),
        Some("all") => Ok(None),
        Some(other) => Err(ApiError::malformed(format!(
            "state must be pending, decided, expired or all, not {other:?}"
        ))),
    }
}

async fn list_prompts(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let outcome = async {
        let params = query(params)?;
        let wanted = parse_state(params.get("state"))?;
        let app = params.get("app").map(|a| app_id(a)).transpose()?;
        let prompts = on_broker(&state, move |b| {
            b.prompts()
                .iter()
                .filter(|p| wanted.is_none_or(|s| p.state == s))
                .filter(|p| app.as_ref().is_none_or(|a| &p.app_id == a))
                .cloned()
                .collect::<Vec<_>>()
        })
        .await?;
        Reply::ok(json!({ "prompts": prompts }))
    };
    respond(&rid, outcome.await)
}

async fn get_prompt(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    prompt: Result<Path<String>, PathRejection>,
) -> Response {
    let outcome = async {
        let id = prompt_id(&path(prompt)?)?;
        let found = on_broker(&state, move |b| {
            b.prompt(&id).cloned().ok_or(BrokerError::UnknownPrompt(id.to_string()))
        })
        .await??;
        Reply::ok(found)
    };
    respond(&rid, outcome.await)
}

async fn decide(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    prompt: Result<Path<String>, PathRejection>,
    bytes: Bytes,
) -> Response {
    let outcome = async {
        let id = prompt_id(&path(prompt)?)?;
        let decision: ConsentDecision = body(&bytes)?;
        let record = on_broker(&state, move |b| b.decide(&id, decision)).await??;
        Reply::ok(record)
    };
    respond(&rid, outcome.await)
}

const MAX_EVENT_PAGE: usize = 1000;

async fn list_events(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let outcome = async {
        let params = query(params)?;
        let number = |key: &str| -> Result<Option<u64>, ApiError> {
            params
                .get(key)
                .map(|v| v.parse::<u64>().map_err(|_| ApiError::malformed(format!("{key} must be a number"))))
                .transpose()
        };
        let since = number("since")?.unwrap_or(0);
        let limit = number("limit")?.map_or(MAX_EVENT_PAGE, |n| (n as usize).min(MAX_EVENT_PAGE));
        let (events, last_seq) = on_broker(&state, move |b| {
            let page: Vec<_> = b.events_since(since).iter().take(limit).cloned().collect();
            (page, b.last_seq())
        })
        .await?;
        Reply::ok(json!({ "events": events, "lastSeq": last_seq }))
    };
    respond(&rid, outcome.await)
}
