mod common;

use std::collections::HashSet;

use common::{start, Client, SseReader};
use serde_json::json;

#[tokio::test]
async fn snapshot_then_live_events() {
    let svc = start().await;
    let c = Client::new(svc.addr());
    c.register("com.example.gps", "GPS", &["ACCESS_FINE_LOCATION", "CAMERA"]).await;
    c.legacy_request("com.example.gps", 1, &["ACCESS_FINE_LOCATION"]).await;

    let mut ui = SseReader::connect(&c.base, "").await;
    let snapshot = ui.next_timeout(5).await.unwrap();
    assert_eq!(snapshot.event, "snapshot");
    assert_eq!(snapshot.data["v"], 1);
    let pending = snapshot.data["prompts"].as_array().unwrap();
    assert_eq!(pending.len(), 1);
    assert_eq!(pending[0]["promptId"], "p-000001");
    let snapshot_seq: u64 = snapshot.id.unwrap().parse().unwrap();

    // a decision from a different client reaches the stream
    c.decide("p-000001", "ALLOW", "ALWAYS").await.payload();
    let decided = ui.next_timeout(5).await.unwrap();
    assert_eq!(decided.event, "prompt-decided");
    assert_eq!(decided.data["type"], "prompt-decided");
    assert_eq!(decided.data["promptId"], "p-000001");
    assert_eq!(decided.data["grant"]["verdict"], "ALLOW");
    assert_eq!(decided.data["v"], 1);
    let seq = decided.data["seq"].as_u64().unwrap();
    assert!(seq > snapshot_seq);
    assert_eq!(decided.id.as_deref(), Some(seq.to_string().as_str()));

    c.legacy_request("com.example.gps", 2, &["CAMERA"]).await;
    let created = ui.next_timeout(5).await.unwrap();
    assert_eq!(created.event, "prompt-created");
    assert_eq!(created.data["prompt"]["permission"], "CAMERA");

    c.post("/v1/apps/com.example.gps/session/end", &json!({})).await.payload();
    let expired = ui.next_timeout(5).await.unwrap();
    assert_eq!(expired.event, "prompt-expired");
    assert_eq!(expired.data["promptId"], created.data["prompt"]["promptId"]);

    svc.shutdown().await.unwrap();
    assert!(ui.next_timeout(5).await.is_none(), "stream ends on shutdown");
}

#[tokio::test]
async fn empty_snapshot_and_kind_filter() {
    let svc = start().await;
    let c = Client::new(svc.addr());
    let mut everything = SseReader::connect(&c.base, "?kinds=all").await;
    let mut apps_only = SseReader::connect(&c.base, "?kinds=app-registered").await;
    assert_eq!(everything.next_timeout(5).await.unwrap().data["prompts"], json!([]));
    assert_eq!(apps_only.next_timeout(5).await.unwrap().event, "snapshot");

    c.register("a.b", "AB", &["CAMERA"]).await;
    c.legacy_request("a.b", 1, &["CAMERA"]).await;
    c.register("c.d", "CD", &["CAMERA"]).await;

    let kinds: Vec<String> = {
        let mut out = Vec::new();
        for _ in 0..4 {
            out.push(everything.next_timeout(5).await.unwrap().event);
        }
        out
    };
    assert_eq!(kinds, ["app-registered", "request-submitted", "prompt-created", "app-registered"]);

    assert_eq!(apps_only.next_timeout(5).await.unwrap().data["app"]["appId"], "a.b");
    assert_eq!(apps_only.next_timeout(5).await.unwrap().data["app"]["appId"], "c.d");
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn reconnect_replays_pending_without_duplicates() {
    let svc = start().await;
    let c = Client::new(svc.addr());
    c.register("a.b", "AB", &["CAMERA", "READ_CONTACTS", "RECORD_AUDIO"]).await;
    c.legacy_request("a.b", 1, &["CAMERA", "READ_CONTACTS", "RECORD_AUDIO"]).await;

    let mut first = SseReader::connect(&c.base, "").await;
    assert_eq!(first.next_timeout(5).await.unwrap().data["prompts"].as_array().unwrap().len(), 3);
    c.decide("p-000002", "DENY", "ONCE").await.payload();
    assert_eq!(first.next_timeout(5).await.unwrap().data["promptId"], "p-000002");
    drop(first);

    let mut second = SseReader::connect(&c.base, "").await;
    let snapshot = second.next_timeout(5).await.unwrap();
    let ids: Vec<&str> = snapshot.data["prompts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["promptId"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["p-000001", "p-000003"]);
    c.decide("p-000003", "ALLOW", "ONCE").await.payload();
    let next = second.next_timeout(5).await.unwrap();
    assert_eq!(next.event, "prompt-decided");
    assert_eq!(next.data["promptId"], "p-000003");
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn rapid_prompts_arrive_in_creation_order() {
    const PROMPTS: usize = 100;
    let svc = start().await;
    let c = Client::new(svc.addr());
    let apps: Vec<String> = (0..10).map(|i| format!("app.n{i}")).collect();
    for app in &apps {
        c.register(app, app, &["CAMERA"]).await;
    }
    let mut ui = SseReader::connect(&c.base, "").await;
    assert_eq!(ui.next_timeout(5).await.unwrap().event, "snapshot");

    // ten concurrent requesters, ten legacy requests each
    let mut tasks = Vec::new();
    for app in apps.clone() {
        let c = Client::new(svc.addr());
        tasks.push(tokio::spawn(async move {
            for code in 0..(PROMPTS / 10) as i64 {
                let answer = c.legacy_request(&app, code, &["CAMERA"]).await;
                assert_eq!(answer.status, 201, "{}", answer.body);
            }
        }));
    }

    let mut seqs = Vec::new();
    let mut streamed = Vec::new();
    while streamed.len() < PROMPTS {
        let ev = ui.next_timeout(10).await.unwrap();
        assert_eq!(ev.event, "prompt-created");
        seqs.push(ev.data["seq"].as_u64().unwrap());
        streamed.push(ev.data["prompt"]["promptId"].as_str().unwrap().to_string());
    }
    for t in tasks {
        t.await.unwrap();
    }
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "sequence numbers strictly increase");

    // oracle: the broker's own creation order
    let all = c.get("/v1/prompts?state=all").await;
    let created: Vec<String> = all.payload()["prompts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["promptId"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(streamed, created);
    assert_eq!(streamed.iter().collect::<HashSet<_>>().len(), PROMPTS);

    let log_order: Vec<String> = c
        .all_events()
        .await
        .into_iter()
        .filter(|e| e["type"] == "prompt-created")
        .map(|e| e["prompt"]["promptId"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(streamed, log_order);
    svc.shutdown().await.unwrap();
}
