use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_consentcore"));
    for (key, _) in std::env::vars() {
        if key.starts_with("CONSENTCORE_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn sha256(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn simulate_bundled_scenarios() {
    let o = run(&["simulate", "--scenario", "sample-gps"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("NAVIGATION/ON_DEVICE"));
    assert!(stdout(&o).trim_end().ends_with("result PASS 9/9 expectations"));

    let all = run(&["simulate"]);
    assert_eq!(code(&all), 0, "{}", stderr(&all));
    for name in ["sample-gps", "phonograph", "legacy-app"] {
        assert!(stdout(&all).contains(&format!("scenario {name} ")), "{name}");
    }
}

#[test]
fn simulate_transcripts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let o = run(&["simulate", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(sha256(&a), sha256(&b));
}

#[test]
fn simulate_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = dir.path().join("wrong.json");
    fs::write(
        &wrong,
        r#"{"name":"wrong","description":"expects a grant that never happens","seed":1,
            "apps":[{"appId":"a.b","displayName":"AB","permissions":["CAMERA"]}],
            "steps":[{"step":"check_grant","app":"a.b","permission":"CAMERA","expect":"GRANTED"}]}"#,
    )
    .unwrap();
    let o = run(&["simulate", "--scenario", wrong.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("wrong: step 1"), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, r#"{"name":"broken","steps":[{"step":"fly"}]}"#).unwrap();
    let o = run(&["simulate", "--scenario", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("SCENARIO_MALFORMED"));

    let o = run(&["simulate", "--scenario", "no-such-scenario"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("UNKNOWN_SCENARIO"));
}

#[test]
fn ingest_seed_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("audit.jsonl");
    let o = run(&["ingest", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.iter().any(|r| r["appName"] == "TikTok"));
    assert!(stderr(&o).contains("ingested 3 document(s)"));
}

#[test]
fn ingest_empty_dir_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("audit.jsonl");
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    let o = run(&["ingest", "--corpus", corpus.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    assert_eq!(fs::read(&out).unwrap(), b"");
}

#[test]
fn ingest_unreadable_file_names_it() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.txt"), "App: Fine\n---\nWe collect logs.\n").unwrap();
    fs::write(dir.path().join("garbled.txt"), b"App: X\n---\n\xff\xfe\xfd\n").unwrap();
    let o = run(&["ingest", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("garbled.txt"), "{}", stderr(&o));
}

#[test]
fn missing_paths_are_config_errors() {
    let o = run(&["ingest", "--corpus", "/no/such/corpus"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/no/such/corpus"));
    assert_eq!(code(&run(&["simulate", "--registry", "/no/such/registry.json"])), 2);
    assert_eq!(code(&run(&["bench", "--reps", "5"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
}

#[test]
fn build_registry_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, extra) in [(&a, None), (&b, Some("--sequential"))] {
        let mut args = vec!["build-registry", "--out", out.to_str().unwrap()];
        args.extend(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(sha256(&a), sha256(&b));

    let reg: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    let has = |p: &str, u: &str, s: &str| {
        reg["entries"]
            .as_array()
            .unwrap()
            .iter()
            .any(|e| e["permission"] == p && e["purpose"] == u && e["scope"] == s)
    };
    assert!(has("USE_FINGERPRINT", "AUTHENTICATION", "ON_DEVICE"));
    assert!(has("ACCESS_FINE_LOCATION", "TRACKING", "OFF_DEVICE"));
    assert!(has("READ_CONTACTS", "USER_CONNECT", "OFF_DEVICE"));

    // the built file is itself a usable registry
    let o = run(&["simulate", "--scenario", "phonograph", "--registry", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn conflicting_corpus_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "App: A\n---\nWe use your audio files to play music.\n").unwrap();
    fs::write(dir.path().join("b.txt"), "App: B\n---\nWe transfer your audio files to play music.\n").unwrap();
    let out = dir.path().join("reg.json");
    let o = run(&["build-registry", "--corpus", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("SCOPE_CONFLICT"), "{err}");
    assert!(err.contains("PLAY_MUSIC"), "{err}");
    assert!(!out.exists());
}

#[test]
fn bench_prints_table_and_fit() {
    let o = run(&["bench", "--counts", "5,10", "--reps", "30", "--batch", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("permissions\treps\tmedian_us"));
    assert!(lines.next().unwrap().starts_with("5\t30\t"));
    assert!(lines.next().unwrap().starts_with("10\t30\t"));
    assert!(text.contains("fit: median_us = "));
    assert!(text.contains("R^2 = "));
}

#[test]
fn config_file_flags_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("registry.json");
    fs::write(&good, consentcore::data::SEED_REGISTRY).unwrap();
    let config = dir.path().join("consentcore.toml");
    fs::write(&config, "registry = \"/no/such/from-config.json\"\n").unwrap();
    let cfg = config.to_str().unwrap();

    // the config file alone points nowhere
    let o = run(&["simulate", "--scenario", "sample-gps", "--config", cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("from-config"));

    // a flag beats the file
    let o = run(&["simulate", "--scenario", "sample-gps", "--config", cfg, "--registry", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // the environment beats the flag
    let o = bin()
        .args(["simulate", "--scenario", "sample-gps", "--registry", good.to_str().unwrap()])
        .env("CONSENTCORE_REGISTRY", "/no/such/from-env.json")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("from-env"));

    let o = bin()
        .args(["simulate", "--scenario", "sample-gps"])
        .env("CONSENTCORE_CONFIG", cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn start(extra: &[&str]) -> Self {
        let mut child = bin()
            .args(["serve", "--port", "0"])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on http://")
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_string();
        Self { child, addr }
    }

    fn http(&self, method: &str, path: &str, body: &str) -> (u16, Value) {
        let mut s = TcpStream::connect(&self.addr).unwrap();
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut raw = String::new();
        s.read_to_string(&mut raw).unwrap();
        let status = raw[9..12].parse().unwrap();
        let body = &raw[raw.find("\r\n\r\n").unwrap() + 4..];
        (status, serde_json::from_str(body).unwrap())
    }

    fn stop(mut self) -> i32 {
        let pid = self.child.id().to_string();
        let killed = Command::new("kill").args(["-TERM", &pid]).status().unwrap();
        assert!(killed.success());
        self.child.wait().unwrap().code().expect("clean exit")
    }
}

#[cfg(unix)]
#[test]
fn serve_auto_port_and_journal_restart() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let journal_arg = ["--journal", journal.to_str().unwrap()];

    let server = Server::start(&journal_arg);
    assert!(!server.addr.ends_with(":0"));
    let (status, health) = server.http("GET", "/v1/healthz", "");
    assert_eq!(status, 200);
    assert_eq!(health["payload"]["status"], "ok");
    let (status, _) = server.http(
        "POST",
        "/v1/apps",
        r#"{"appId":"com.example.gps","displayName":"GPS","permissions":["ACCESS_FINE_LOCATION"]}"#,
    );
    assert_eq!(status, 201);
    assert_eq!(server.stop(), 0);

    let server = Server::start(&journal_arg);
    let (_, apps) = server.http("GET", "/v1/apps", "");
    assert_eq!(apps["payload"]["apps"][0]["appId"], "com.example.gps");
    assert_eq!(server.stop(), 0);
}

#[test]
fn serve_on_busy_port_fails() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = run(&["serve", "--listen", &addr]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("BIND_FAILED"), "{}", stderr(&o));
}
