//! Server-sent prompt events.
//!
//! A connection first receives a `snapshot` event listing every pending
//! prompt, then live events named after the broker event kind, each with
//! `id` set to the broker sequence number. The snapshot and the live
//! subscription are taken in one step on the broker queue, so nothing falls
//! between them and nothing is sent twice. A client that falls too far
//! behind is sent a fresh snapshot.

use std::collections::{BTreeSet, HashMap};
use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use consentcore::broker::{EventRecord, Prompt};
use futures::stream::{self, Stream, StreamExt};
use serde_json::{json, Value};
use tokio::sync::{broadcast, watch};

use crate::envelope::{respond, ApiError, WIRE_VERSION};
use crate::routes::{on_broker, ReqId};
use crate::AppState;

pub const DEFAULT_KINDS: [&str; 3] = ["prompt-created", "prompt-decided", "prompt-expired"];

struct Feed {
    state: AppState,
    kinds: Option<BTreeSet<String>>,
    rx: broadcast::Receiver<Arc<EventRecord>>,
    shutdown: watch::Receiver<bool>,
}

async fn subscribe(state: &AppState) -> Result<(Event, broadcast::Receiver<Arc<EventRecord>>), ApiError> {
    let events = state.events.clone();
    let (pending, last_seq, rx) =
        on_broker(state, move |b| (b.pending_prompts(None), b.last_seq(), events.subscribe())).await?;
    Ok((snapshot_event(&pending, last_seq), rx))
}

fn snapshot_event(pending: &[Prompt], last_seq: u64) -> Event {
    let data = json!({ "v": WIRE_VERSION, "seq": last_seq, "prompts": pending });
    Event::default()
        .event("snapshot")
        .id(last_seq.to_string())
        .data(data.to_string())
}

fn record_event(rec: &EventRecord) -> Event {
    let mut data = serde_json::to_value(rec).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut data {
        map.insert("v".into(), json!(WIRE_VERSION));
    }
    Event::default()
        .event(rec.event.kind())
        .id(rec.seq.to_string())
        .data(data.to_string())
}

fn parse_kinds(raw: Option<&String>) -> Option<BTreeSet<String>> {
    match raw.map(String::as_str) {
        Some("all") => None,
        Some(list) => Some(list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
        None => Some(DEFAULT_KINDS.iter().map(|s| s.to_string()).collect()),
    }
}

async fn next_event(mut feed: Feed) -> Option<(Result<Event, Infallible>, Feed)> {
    loop {
        if *feed.shutdown.borrow() {
            return None;
        }
        let received = tokio::select! {
            _ = feed.shutdown.changed() => return None,
            r = feed.rx.recv() => r,
        };
        match received {
            Ok(rec) => {
                let wanted = feed.kinds.as_ref().is_none_or(|k| k.contains(rec.event.kind()));
                if wanted {
                    return Some((Ok(record_event(&rec)), feed));
                }
            }
            Err(broadcast::error::RecvError::Lagged(skipped)) => {
                log::warn!("event stream client lagged by {skipped} events; resending snapshot");
                let (snapshot, rx) = subscribe(&feed.state).await.ok()?;
                feed.rx = rx;
                return Some((Ok(snapshot), feed));
            }
            Err(broadcast::error::RecvError::Closed) => return None,
        }
    }
}

fn feed_stream(first: Event, feed: Feed) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::once(async move { Ok(first) }).chain(stream::unfold(feed, next_event))
}

/// `GET /v1/prompts/stream[?kinds=a,b|all]`
pub(crate) async fn stream_prompts(
    State(state): State<AppState>,
    ReqId(rid): ReqId,
    params: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let kinds = match params {
        Ok(Query(q)) => parse_kinds(q.get("kinds")),
        Err(e) => return respond(&rid, Err(ApiError::malformed(e.body_text()))),
    };
    let (snapshot, rx) = match subscribe(&state).await {
        Ok(v) => v,
        Err(e) => return respond(&rid, Err(e)),
    };
    let feed = Feed {
        shutdown: state.shutdown.clone(),
        state,
        kinds,
        rx,
    };
    Sse::new(feed_stream(snapshot, feed))
        .keep_alive(KeepAlive::default())
        .into_response()
}
