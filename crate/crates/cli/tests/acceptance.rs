//! Acceptance checks. One PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use consentcore::broker::{
    AppId, AppManifest, Broker, ConsentDecision, GrantStatus, LogicalClock, PermissionRequest, PromptState,
    SdkGeneration,
};
use consentcore::data;
use consentcore::harness::{bench_prompt_assembly, run_scenario, BenchConfig, Scenario};
use consentcore::model::{IntentRegistry, PermissionName, PermissionWithReason, PurposeLabel, ScopeLimitation};
use consentcore::pipeline::{process, Lexicons};
use consentcore::ExecMode;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// The published intent label table: (permission, purpose, scope).
const LABEL_TABLE: [(&str, &str, &str); 11] = [
    ("USE_FINGERPRINT", "AUTHENTICATION", "ON_DEVICE"),
    ("USE_FINGERPRINT", "SECURITY", "ON_DEVICE"),
    ("ACCESS_FINE_LOCATION", "ADVERTISEMENT", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "APP_EXPERIENCE", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "APP_SERVICE", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "CONTENT_PERSONALIZATION", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "DIAGNOSTICS", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "ENHANCED_SERVICE", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "FRAUD_DETECTION", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "PERSONALIZED_OFFERS", "OFF_DEVICE"),
    ("ACCESS_FINE_LOCATION", "TRACKING", "OFF_DEVICE"),
];

const TABLE_RUNTIME_LIMIT: Duration = Duration::from_secs(1);
const BENCH_RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const BENCH_REPETITIONS: usize = 30;
const MIN_R_SQUARED: f64 = 0.9;
const LEGACY_REQUESTS: usize = 100;

fn perm(s: &str) -> PermissionName {
    PermissionName::new(s).unwrap()
}

fn label(s: &str) -> PurposeLabel {
    PurposeLabel::new(s).unwrap()
}

fn table_fidelity() -> Outcome {
    let start = Instant::now();
    let reg = IntentRegistry::seed();
    let mut got = BTreeSet::new();
    for p in ["USE_FINGERPRINT", "ACCESS_FINE_LOCATION"] {
        for il in reg.approved_purposes(&perm(p)).map_err(|e| e.to_string())? {
            got.insert((p.to_string(), il.purpose.to_string(), il.scope.to_string()));
        }
    }
    let elapsed = start.elapsed();
    for (p, u, s) in LABEL_TABLE {
        ensure!(got.contains(&(p.into(), u.into(), s.into())), "row ({p}, {u}, {s}) missing");
    }
    // no table pair may come back under another scope
    for (p, u, s) in &got {
        if let Some(row) = LABEL_TABLE.iter().find(|(tp, tu, _)| tp == p && tu == u) {
            ensure!(row.2 == s, "({p}, {u}) has scope {s}, table says {}", row.2);
        }
    }
    let fingerprint: BTreeSet<_> = got.iter().filter(|r| r.0 == "USE_FINGERPRINT").collect();
    ensure!(fingerprint.len() == 2, "USE_FINGERPRINT has {} rows", fingerprint.len());
    ensure!(elapsed < TABLE_RUNTIME_LIMIT, "took {elapsed:?}");
    Ok(format!(
        "11/11 rows exact in {:.3} ms ({} extra case-study row)",
        elapsed.as_secs_f64() * 1e3,
        got.len() - LABEL_TABLE.len()
    ))
}

fn tiktok_end_to_end() -> Outcome {
    let lex = Lexicons::builtin();
    let records = process(&data::seed_corpus(), &lex, ExecMode::default());
    let tiktok: Vec<_> = records.iter().filter(|r| r.app_name == "TikTok").collect();
    ensure!(tiktok.len() == 1, "{} TikTok records", tiktok.len());
    // compare the audit record as written, field by field
    let record: Value = serde_json::to_value(tiktok[0]).map_err(|e| e.to_string())?;
    let derivations = record["derivations"].as_array().ok_or("no derivations")?;
    let verbs: BTreeSet<&str> = derivations.iter().filter_map(|d| d["triple"]["verb"].as_str()).collect();
    ensure!(verbs == BTreeSet::from(["access", "collect"]), "verbs {verbs:?}");
    for d in derivations {
        ensure!(d["triple"]["object"] == "names and phone numbers", "object {}", d["triple"]["object"]);
        ensure!(
            d["reducedPurpose"] == "discovering other users on the platform",
            "reduced purpose {}",
            d["reducedPurpose"]
        );
        ensure!(d["canonicalPurpose"] == "USER_CONNECT", "canonical {}", d["canonicalPurpose"]);
        ensure!(d["scope"] == "OFF_DEVICE", "scope {}", d["scope"]);
        ensure!(d["permissions"] == serde_json::json!(["READ_CONTACTS"]), "permissions {}", d["permissions"]);
    }
    Ok("names and phone numbers / {access, collect} -> USER_CONNECT, OFF_DEVICE, READ_CONTACTS".into())
}

fn purpose_reduction() -> Outcome {
    let lex = Lexicons::builtin();
    let statement = "We use your location data to run or tailor our services, including with more relevant \
                     information such as local trends, articles, advertisements, and suggestions for people to follow.";
    let clause = "run or tailor our services, including with more relevant information such as local trends, \
                  articles, advertisements, and suggestions for people to follow";
    let reduced = lex.reductions.simplify(clause);
    ensure!(reduced == "personalizing content depending on localization", "reduced to {reduced:?}");
    let canonical = lex.synonyms.canonicalize(&reduced);
    ensure!(
        canonical.label() == Some(&label("CONTENT_PERSONALIZATION")),
        "canonicalized to {canonical:?}"
    );
    // and the same through the whole pipeline, from the seed corpus
    let records = process(&data::seed_corpus(), &lex, ExecMode::Sequential);
    let hit = records
        .iter()
        .find(|r| r.sentence == statement)
        .ok_or("local trends statement not found in the seed corpus")?;
    let through = hit.derivations.iter().any(|d| {
        d.reduced_purpose.as_deref() == Some("personalizing content depending on localization")
            && d.canonical_purpose.as_ref().and_then(|c| c.label()) == Some(&label("CONTENT_PERSONALIZATION"))
    });
    ensure!(through, "pipeline derivations differ: {:?}", hit.derivations);
    Ok("-> \"personalizing content depending on localization\" -> CONTENT_PERSONALIZATION".into())
}

/// Runs the bundled scenario, then repeats its core exchange directly
/// against a broker.
fn intent_case_study(
    scenario: &str,
    app: &str,
    permission: &str,
    purpose: &str,
    description: &str,
) -> Outcome {
    let reg = IntentRegistry::seed();
    let report = run_scenario(&Scenario::builtin(scenario).map_err(|e| e.to_string())?, &reg, None)
        .map_err(|e| e.to_string())?;
    ensure!(
        report.passed(),
        "scenario failures: {:?}",
        report.failures().map(|f| f.expectation.clone()).collect::<Vec<_>>()
    );

    let declared = PermissionWithReason::new(perm(permission), label(purpose), description, ScopeLimitation::OnDevice)
        .map_err(|e| e.to_string())?;
    ensure!(reg.validate_intent(&declared).is_ok(), "intent rejected: {:?}", reg.validate_intent(&declared));
    let mut broker = Broker::with_clock(reg, LogicalClock::new());
    let app_id = AppId::new(app).unwrap();
    broker
        .register_app(AppManifest {
            app_id: app_id.clone(),
            display_name: scenario.into(),
            sdk_generation: SdkGeneration::IntentAware,
            permissions: vec![perm(permission)],
            intents: vec![],
        })
        .map_err(|e| e.to_string())?;
    let receipt = broker
        .request_permissions(PermissionRequest::legacy(app_id.clone(), 1, vec![perm(permission)]).with_reasons(vec![declared]))
        .map_err(|e| e.to_string())?;
    ensure!(receipt.prompt_ids.len() == 1, "{} prompts", receipt.prompt_ids.len());
    let prompt = broker.prompt(&receipt.prompt_ids[0]).unwrap().clone();
    ensure!(prompt.permission.as_str() == permission, "prompt permission {}", prompt.permission);
    ensure!(prompt.intent.purpose.as_str() == purpose, "prompt purpose {}", prompt.intent.purpose);
    ensure!(prompt.intent.scope == ScopeLimitation::OnDevice, "prompt scope {}", prompt.intent.scope);
    ensure!(!prompt.description.trim().is_empty(), "empty description");
    broker.decide(&prompt.prompt_id, ConsentDecision::allow()).map_err(|e| e.to_string())?;
    let status = broker.check_grant(&app_id, &perm(permission)).map_err(|e| e.to_string())?;
    ensure!(status == GrantStatus::Granted, "status {status:?}");
    Ok(format!(
        "({permission}, {purpose}, ON_DEVICE) prompted, allowed -> GRANTED; scenario {}/{} expectations",
        report.expectations.iter().filter(|e| e.passed).count(),
        report.expectations.len()
    ))
}

fn legacy_compatibility() -> Outcome {
    let reg = IntentRegistry::seed();
    let catalog = reg.permissions().to_vec();
    let mut broker = Broker::with_clock(reg, LogicalClock::new());
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e9ac7);
    let mut prompts = 0;
    for i in 0..LEGACY_REQUESTS {
        let app_id = AppId::new(format!("legacy.app{i:03}")).unwrap();
        let declared_count = rng.random_range(1..=8.min(catalog.len()));
        let declared: Vec<PermissionName> = catalog.choose_multiple(&mut rng, declared_count).cloned().collect();
        broker
            .register_app(AppManifest {
                app_id: app_id.clone(),
                display_name: format!("Legacy {i}"),
                sdk_generation: SdkGeneration::Legacy,
                permissions: declared.clone(),
                intents: vec![],
            })
            .map_err(|e| e.to_string())?;
        let mut requested = declared.clone();
        requested.shuffle(&mut rng);
        requested.truncate(rng.random_range(1..=declared.len()));
        let receipt = broker
            .request_permissions(PermissionRequest::legacy(app_id.clone(), i as i64, requested))
            .map_err(|e| format!("request {i} errored: {e}"))?;
        for id in &receipt.prompt_ids {
            let p = broker.prompt(id).unwrap();
            ensure!(
                p.intent.purpose.as_str() == "NOT_PROVIDED" && p.intent.scope == ScopeLimitation::NotProvided,
                "request {i} prompt {id} shows {}",
                p.intent
            );
            prompts += 1;
        }
        if rng.random_bool(0.5) {
            for id in receipt.prompt_ids {
                let d = if rng.random_bool(0.5) { ConsentDecision::allow() } else { ConsentDecision::deny() };
                broker.decide(&id, d).map_err(|e| e.to_string())?;
            }
        }
    }
    let stray = broker.prompts().iter().filter(|p| !p.intent.is_legacy()).count();
    ensure!(stray == 0, "{stray} prompts with a declared intent");
    let pending = broker.prompts().iter().filter(|p| p.state == PromptState::Pending).count();
    Ok(format!("{LEGACY_REQUESTS} requests, {prompts} prompts all NOT_PROVIDED/NOT_PROVIDED, 0 errors ({pending} left pending)"))
}

/// Expected verdict by walking the registry file's entry list.
fn scan_registry_file(doc: &Value, permission: &str, purpose: &str, scope: &str) -> &'static str {
    let catalog = doc["permissions"].as_array().unwrap();
    if !catalog.iter().any(|p| p == permission) {
        return "UNKNOWN_PERMISSION";
    }
    if purpose == "NOT_PROVIDED" && scope == "NOT_PROVIDED" {
        return "OK";
    }
    let mut found = None;
    for e in doc["entries"].as_array().unwrap() {
        if e["permission"] == permission && e["purpose"] == purpose {
            found = e["scope"].as_str();
        }
    }
    match found {
        None => "PURPOSE_NOT_APPROVED",
        Some(s) if s == scope => "OK",
        Some(_) => "SCOPE_MISMATCH",
    }
}

fn validation_oracle() -> Outcome {
    let text = data::SEED_REGISTRY;
    let doc: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let reg = IntentRegistry::from_json(text).map_err(|e| e.to_string())?;
    let purposes: Vec<String> = doc["purposes"]
        .as_array()
        .ok_or("no purpose catalog")?
        .iter()
        .map(|p| p.as_str().unwrap().to_string())
        .collect();
    let mut declared = Vec::new();
    for p in ["USE_FINGERPRINT", "ACCESS_FINE_LOCATION"] {
        for u in &purposes {
            for s in [ScopeLimitation::OnDevice, ScopeLimitation::OffDevice] {
                let desc = if u == "NOT_PROVIDED" { "" } else { "declared purpose" };
                declared.push(PermissionWithReason::new(perm(p), label(u), desc, s).map_err(|e| e.to_string())?);
            }
        }
        declared.push(PermissionWithReason::legacy(perm(p)));
    }
    let mut checked = 0;
    for mode in ExecMode::available() {
        let verdicts = reg.validate_all(&declared, mode);
        for (d, v) in declared.iter().zip(&verdicts) {
            let want = scan_registry_file(&doc, d.permission_name.as_str(), d.purpose_title.as_str(), d.data_scope.as_str());
            ensure!(
                v.code() == want,
                "{} {} {}: {} vs file {want}",
                d.permission_name,
                d.purpose_title,
                d.data_scope,
                v.code()
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{} declarations x {} mode(s): {checked}/{checked} agree",
        declared.len(),
        ExecMode::available().len()
    ))
}

fn bench_trend() -> Outcome {
    let config = BenchConfig {
        repetitions: BENCH_REPETITIONS,
        ..BenchConfig::default()
    };
    ensure!(config.counts == [5, 10, 25, 50], "counts {:?}", config.counts);
    let start = Instant::now();
    let report = bench_prompt_assembly(&IntentRegistry::seed(), &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    for r in &report.results {
        ensure!(r.repetitions >= BENCH_REPETITIONS && r.samples.len() == r.repetitions, "{} samples", r.samples.len());
    }
    let medians = report.medians();
    let monotone = medians.windows(2).all(|w| w[0] <= w[1]);
    ensure!(monotone, "medians {medians:?}");
    // independent least-squares over the medians
    let xs: Vec<f64> = config.counts.iter().map(|&c| c as f64).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, medians.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&medians).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&medians).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let ss_tot: f64 = medians.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    ensure!((r2 - report.fit.r_squared).abs() < 1e-9, "reported R^2 {} vs {r2}", report.fit.r_squared);
    ensure!(r2 >= MIN_R_SQUARED, "R^2 {r2:.4}");
    ensure!(elapsed < BENCH_RUNTIME_LIMIT, "took {elapsed:?}");
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.1}")).collect();
    Ok(format!(
        "medians [{}] us non-decreasing, R^2 = {r2:.4}, {} reps, {:.1} s",
        shown.join(", "),
        BENCH_REPETITIONS,
        elapsed.as_secs_f64()
    ))
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("consentcore-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_consentcore");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        Ok(())
    };
    let mut hashes = Vec::new();
    for name in ["first.json", "second.json"] {
        let path = dir.join(name);
        run(&["build-registry", "--out", path.to_str().unwrap()])?;
        hashes.push(digest(&fs::read(&path).map_err(|e| e.to_string())?));
    }
    ensure!(hashes[0] == hashes[1], "registry hashes differ: {hashes:?}");

    let mut transcripts = Vec::new();
    for name in ["first.txt", "second.txt"] {
        let path = dir.join(name);
        run(&["simulate", "--seed", "42", "--out", path.to_str().unwrap()])?;
        transcripts.push(digest(&fs::read(&path).map_err(|e| e.to_string())?));
    }
    ensure!(transcripts[0] == transcripts[1], "transcript hashes differ");
    let _ = fs::remove_dir_all(&dir);
    Ok(format!("registry sha256 {}..., transcripts sha256 {}...", &hashes[0][..12], &transcripts[0][..12]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("label table fidelity", table_fidelity),
        ("policy statement end to end", tiktok_end_to_end),
        ("purpose reduction and synonymization", purpose_reduction),
        ("SampleGPSTesting scenario", || {
            intent_case_study(
                "sample-gps",
                "com.example.samplegps",
                "ACCESS_FINE_LOCATION",
                "NAVIGATION",
                "To access your location and show directions.",
            )
        }),
        ("Phonograph scenario", || {
            intent_case_study(
                "phonograph",
                "com.example.phonograph",
                "READ_EXTERNAL_STORAGE",
                "PLAY_MUSIC",
                "To read audio files stored on this device.",
            )
        }),
        ("legacy backward compatibility", legacy_compatibility),
        ("validation oracle equivalence", validation_oracle),
        ("prompt assembly scaling trend", bench_trend),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())))));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("{} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
