use std::fs;
use std::io::{self, Write};
use std::path::Path;

use consentcore::broker::{Broker, SystemClock};
use consentcore::data;
use consentcore::harness::{
    bench_prompt_assembly, run_scenario, run_stress, BenchConfig, Scenario, StressConfig, BUILTIN_SCENARIOS,
};
use consentcore::model::IntentRegistry;
use consentcore::pipeline::{self, load_corpus_dir, Lexicons, PolicyDocument};
use consentcore::ExecMode;
use consentcore_service::{serve as start_service, ServiceConfig};

use crate::config::CliConfig;
use crate::exit::Failure;

/// Minimum R² the `bench --check` trend must reach.
const MIN_R_SQUARED: f64 = 0.9;

pub struct Context {
    pub config: CliConfig,
    pub mode: ExecMode,
}

impl Context {
    pub fn new(config: CliConfig, sequential: bool) -> Self {
        let mode = if sequential { ExecMode::Sequential } else { ExecMode::default() };
        Self { config, mode }
    }

    fn lexicons(&self) -> Result<Lexicons, Failure> {
        match &self.config.lexicon_dir {
            Some(dir) => Ok(Lexicons::load_dir(dir)?),
            None => Ok(Lexicons::builtin()),
        }
    }

    fn corpus(&self) -> Result<Vec<PolicyDocument>, Failure> {
        match &self.config.corpus_dir {
            Some(dir) => {
                let docs = load_corpus_dir(dir)?;
                if docs.is_empty() {
                    eprintln!("warning: no policy documents (*.txt) in {}", dir.display());
                }
                Ok(docs)
            }
            None => {
                log::info!("using the bundled seed corpus");
                Ok(data::seed_corpus())
            }
        }
    }

    fn registry(&self) -> Result<IntentRegistry, Failure> {
        match &self.config.registry_path {
            Some(path) => Ok(IntentRegistry::load(path)?),
            None => Ok(IntentRegistry::seed()),
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::io(format!("stdout: {e}")))
        }
    }
}

pub fn ingest(ctx: &Context, out: Option<&Path>) -> Result<(), Failure> {
    let lex = ctx.lexicons()?;
    let docs = ctx.corpus()?;
    let records = pipeline::ingest(&docs, &lex, ctx.mode);
    let mut audit = Vec::new();
    pipeline::write_audit(&records, &mut audit).map_err(|e| Failure::io(e.to_string()))?;
    emit(out, &audit)?;
    let derivations: usize = records.iter().map(|r| r.derivations.len()).sum();
    eprintln!(
        "ingested {} document(s): {} candidate statement(s), {} derivation(s)",
        docs.len(),
        records.len(),
        derivations
    );
    Ok(())
}

pub fn build_registry(ctx: &Context, out: Option<&Path>) -> Result<(), Failure> {
    let lex = ctx.lexicons()?;
    let docs = ctx.corpus()?;
    let built = pipeline::build_registry(&docs, &lex, ctx.mode)?;
    emit(out, built.registry.to_canonical_json().as_bytes())?;
    let added = built.bindings.iter().filter(|b| b.added).count();
    eprintln!(
        "registry version {}: {} entries, {} derived binding(s), {} new",
        built.registry.version(),
        built.registry.len(),
        built.bindings.len(),
        added
    );
    Ok(())
}

pub fn serve(ctx: &Context, port: Option<u16>) -> Result<(), Failure> {
    let registry = ctx.registry()?;
    let broker = match &ctx.config.journal_path {
        Some(path) => Broker::open(path, registry, SystemClock)?,
        None => Broker::with_clock(registry, SystemClock),
    };
    let mut listen = ctx.config.listen;
    if let Some(port) = port {
        listen.set_port(port);
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::io(format!("tokio runtime: {e}")))?;
    runtime.block_on(async {
        let handle = start_service(ServiceConfig { listen }, broker).await?;
        println!("listening on http://{}", handle.addr());
        let _ = io::stdout().flush();
        wait_for_signal().await;
        eprintln!("shutting down");
        handle.shutdown().await?;
        Ok(())
    })
}

async fn wait_for_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

pub fn simulate(ctx: &Context, names: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let registry = ctx.registry()?;
    let names: Vec<String> = if names.is_empty() {
        BUILTIN_SCENARIOS.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    let mut transcripts = String::new();
    let mut failed = Vec::new();
    for name in &names {
        let scenario = Scenario::resolve(name)?;
        let report = run_scenario(&scenario, &registry, seed)?;
        print!("{}", report.transcript);
        transcripts.push_str(&report.transcript);
        if !report.passed() {
            for f in report.failures() {
                let detail = f.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default();
                eprintln!("{}: step {} {} failed{detail}", report.name, f.step, f.expectation);
            }
            failed.push(report.name.clone());
        }
    }
    let _ = io::stdout().flush();
    if let Some(path) = out {
        emit(Some(path), transcripts.as_bytes())?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::assertion(format!("scenario(s) failed: {}", failed.join(", "))))
    }
}

pub fn bench(
    ctx: &Context,
    counts: Vec<usize>,
    reps: usize,
    batch: usize,
    out: Option<&Path>,
    check: bool,
) -> Result<(), Failure> {
    let registry = ctx.registry()?;
    let config = BenchConfig {
        counts,
        repetitions: reps,
        batch,
        ..BenchConfig::default()
    };
    let report = bench_prompt_assembly(&registry, &config)?;
    let table = report.to_table();
    print!("{table}\n{}", report.summary_text());
    let _ = io::stdout().flush();
    if let Some(path) = out {
        emit(Some(path), table.as_bytes())?;
    }
    if check {
        if !report.medians_non_decreasing() {
            return Err(Failure::assertion("medians are not non-decreasing"));
        }
        if report.fit.r_squared < MIN_R_SQUARED {
            return Err(Failure::assertion(format!(
                "linear fit R^2 {:.4} is below {MIN_R_SQUARED}",
                report.fit.r_squared
            )));
        }
    }
    Ok(())
}

pub fn stress(ctx: &Context, apps: usize, requests: usize, seed: u64) -> Result<(), Failure> {
    let registry = ctx.registry()?;
    let config = StressConfig {
        apps,
        requests_per_app: requests,
        seed,
        mode: ctx.mode,
    };
    let report = run_stress(&registry, &config)?;
    print!("{}", report.digest());
    let _ = io::stdout().flush();
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::assertion(format!("{} violation(s): {}", report.violations.len(), report.violations.join("; "))))
    }
}
