#![allow(dead_code)]

use std::net::SocketAddr;

use consentcore::broker::{Broker, LogicalClock};
use consentcore::model::IntentRegistry;
use consentcore_service::{serve, ServiceConfig, ServiceHandle};
use futures::StreamExt;
use serde_json::{json, Value};

pub async fn start() -> ServiceHandle {
    let broker = Broker::with_clock(IntentRegistry::seed(), LogicalClock::new());
    let config = ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
    };
    serve(config, broker).await.expect("service starts")
}

pub struct Client {
    pub http: reqwest::Client,
    pub base: String,
}

/// Status plus the decoded envelope.
pub struct Answer {
    pub status: u16,
    pub body: Value,
}

impl Answer {
    pub fn payload(&self) -> &Value {
        assert!(
            self.body.get("error").is_none(),
            "unexpected error {}: {}",
            self.status,
            self.body
        );
        &self.body["payload"]
    }

    pub fn error_code(&self) -> &str {
        self.body["error"]["code"].as_str().unwrap_or_else(|| panic!("no error in {}", self.body))
    }
}

impl Client {
    pub fn new(addr: SocketAddr) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: format!("http://{addr}"),
        }
    }

    async fn finish(resp: reqwest::Response) -> Answer {
        let status = resp.status().as_u16();
        let body: Value = resp.json().await.expect("JSON envelope");
        assert_eq!(body["v"], 1, "envelope version in {body}");
        assert!(body["requestId"].is_string(), "requestId in {body}");
        assert!(
            body.get("payload").is_some() != body.get("error").is_some(),
            "exactly one of payload/error in {body}"
        );
        Answer { status, body }
    }

    pub async fn get(&self, path: &str) -> Answer {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        Self::finish(resp).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> Answer {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        Self::finish(resp).await
    }

    pub async fn post_raw(&self, path: &str, body: &'static str) -> Answer {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        Self::finish(resp).await
    }

    pub async fn register(&self, app: &str, name: &str, permissions: &[&str]) -> Answer {
        let answer = self
            .post(
                "/v1/apps",
                &json!({ "appId": app, "displayName": name, "permissions": permissions }),
            )
            .await;
        assert_eq!(answer.status, 201, "{}", answer.body);
        answer
    }

    pub async fn legacy_request(&self, app: &str, code: i64, permissions: &[&str]) -> Answer {
        self.post(
            &format!("/v1/apps/{app}/requests"),
            &json!({ "requestCode": code, "permissions": permissions }),
        )
        .await
    }

    pub async fn decide(&self, prompt: &str, verdict: &str, mode: &str) -> Answer {
        self.post(
            &format!("/v1/prompts/{prompt}/decision"),
            &json!({ "verdict": verdict, "mode": mode }),
        )
        .await
    }

    /// Every event in the broker log, paging through `/v1/events`.
    pub async fn all_events(&self) -> Vec<Value> {
        let mut out: Vec<Value> = Vec::new();
        loop {
            let since = out.last().map_or(0, |e| e["seq"].as_u64().unwrap());
            let page = self.get(&format!("/v1/events?since={since}")).await;
            let events = page.payload()["events"].as_array().unwrap().clone();
            if events.is_empty() {
                return out;
            }
            out.extend(events);
        }
    }
}

/// One parsed server-sent event.
#[derive(Debug, Clone)]
pub struct SseEvent {
    pub event: String,
    pub id: Option<String>,
    pub data: Value,
}

/// Minimal `text/event-stream` reader.
pub struct SseReader {
    inner: futures::stream::BoxStream<'static, reqwest::Result<axum::body::Bytes>>,
    buf: String,
}

impl SseReader {
    pub async fn connect(base: &str, query: &str) -> Self {
        let resp = reqwest::Client::new()
            .get(format!("{base}/v1/prompts/stream{query}"))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        let ctype = resp.headers()["content-type"].to_str().unwrap().to_string();
        assert!(ctype.starts_with("text/event-stream"), "{ctype}");
        Self {
            inner: resp.bytes_stream().boxed(),
            buf: String::new(),
        }
    }

    /// Next data-carrying event; `None` once the server closes the stream.
    pub async fn next(&mut self) -> Option<SseEvent> {
        loop {
            while let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                if let Some(ev) = parse_block(&block) {
                    return Some(ev);
                }
            }
            match self.inner.next().await {
                Some(Ok(chunk)) => self.buf.push_str(&String::from_utf8_lossy(&chunk)),
                Some(Err(_)) | None => return None,
            }
        }
    }

    pub async fn next_timeout(&mut self, secs: u64) -> Option<SseEvent> {
        tokio::time::timeout(std::time::Duration::from_secs(secs), self.next())
            .await
            .expect("event arrives in time")
    }
}

fn parse_block(block: &str) -> Option<SseEvent> {
    let mut event = String::from("message");
    let mut id = None;
    let mut data = String::new();
    for line in block.lines() {
        if line.starts_with(':') || line.is_empty() {
            continue;
        }
        let (field, value) = line.split_once(':').unwrap_or((line, ""));
        let value = value.strip_prefix(' ').unwrap_or(value);
        match field {
            "event" => event = value.to_string(),
            "id" => id = Some(value.to_string()),
            "data" => {
                if !data.is_empty() {
                    data.push('\n');
                }
                data.push_str(value);
            }
            _ => {}
        }
    }
    if data.is_empty() {
        return None;
    }
    Some(SseEvent {
        event,
        id,
        data: serde_json::from_str(&data).expect("event data is JSON"),
    })
}
