//! Prompt-assembly benchmark: wall time from request submission until every
//! prompt of the request exists, as a function of the permission count.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stats::{linear_fit, LinearFit, Summary};
use super::HarnessError;
use crate::broker::{AppId, AppManifest, Broker, LogicalClock, PermissionRequest, SdkGeneration};
use crate::model::{EntryRow, IntentRegistry, PermissionName, PermissionWithReason, PurposeLabel, ScopeLimitation};

pub const DEFAULT_COUNTS: [usize; 4] = [5, 10, 25, 50];
pub const MIN_REPETITIONS: usize = 30;
const BENCH_APP: &str = "bench.requester";
const FALLBACK_PURPOSE: &str = "APP_SERVICE";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchConfig {
    pub counts: Vec<usize>,
    pub repetitions: usize,
    /// Requests timed together per sample; the sample is the per-request mean.
    pub batch: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            counts: DEFAULT_COUNTS.to_vec(),
            repetitions: MIN_REPETITIONS,
            batch: 16,
            warmup: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchResult {
    pub permission_count: usize,
    pub repetitions: usize,
    pub median_assembly_micros: f64,
    pub samples: Vec<f64>,
    pub summary: Summary,
    /// Same measurement with a request naming no permissions.
    pub baseline: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub config: BenchConfig,
    pub results: Vec<BenchResult>,
    pub fit: LinearFit,
}

impl BenchReport {
    pub fn medians(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.median_assembly_micros).collect()
    }

    pub fn medians_non_decreasing(&self) -> bool {
        self.medians().windows(2).all(|w| w[0] <= w[1])
    }

    /// Largest baseline median divided by the smallest.
    pub fn baseline_spread(&self) -> f64 {
        let b: Vec<f64> = self.results.iter().map(|r| r.baseline.median).collect();
        let max = b.iter().copied().fold(f64::MIN, f64::max);
        let min = b.iter().copied().fold(f64::MAX, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("permissions\treps\tmedian_us\tq1_us\tq3_us\tmin_us\tmax_us\tbaseline_median_us\n");
        for r in &self.results {
            let s = &r.summary;
            let _ = writeln!(
                out,
                "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
                r.permission_count, r.repetitions, s.median, s.q1, s.q3, s.min, s.max, r.baseline.median
            );
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "fit: median_us = {:.4} * permissions + {:.4} (R^2 = {:.4})",
            self.fit.slope, self.fit.intercept, self.fit.r_squared
        );
        let _ = writeln!(
            out,
            "medians {}",
            if self.medians_non_decreasing() { "non-decreasing" } else { "NOT non-decreasing" }
        );
        let _ = writeln!(out, "baseline spread: {:.2}x", self.baseline_spread());
        out
    }
}

/// The seed registry extended so every catalog permission has at least one
/// approved purpose: permissions without rows get APP_SERVICE/OFF_DEVICE.
pub fn bench_registry(base: &IntentRegistry) -> IntentRegistry {
    let mut doc = base.to_document();
    let fallback = PurposeLabel::new(FALLBACK_PURPOSE).expect("label syntax");
    if !doc.purposes.iter().any(|p| p == FALLBACK_PURPOSE) {
        doc.purposes.insert(0, FALLBACK_PURPOSE.to_string());
    }
    for p in base.permissions() {
        if base.approved_purposes(p).map(|a| a.is_empty()).unwrap_or(true) {
            doc.entries.push(EntryRow {
                permission: p.to_string(),
                purpose: fallback.to_string(),
                scope: ScopeLimitation::OffDevice,
                note: None,
            });
        }
    }
    IntentRegistry::from_document(doc).expect("extended registry stays valid")
}

/// One declared intent per permission, using its first approved purpose.
pub fn bench_reasons(registry: &IntentRegistry, count: usize) -> Vec<PermissionWithReason> {
    registry
        .permissions()
        .iter()
        .take(count)
        .map(|p| {
            let intent = registry.approved_purposes(p).expect("catalog permission")[0].clone();
            PermissionWithReason::new(p.clone(), intent.purpose, format!("Benchmark use of {p}."), intent.scope)
                .expect("valid reason")
        })
        .collect()
}

struct Workload {
    registry: IntentRegistry,
    manifest: AppManifest,
}

impl Workload {
    fn new(registry: IntentRegistry) -> Self {
        let manifest = AppManifest {
            app_id: AppId::new(BENCH_APP).expect("valid id"),
            display_name: "Benchmark requester".into(),
            sdk_generation: SdkGeneration::IntentAware,
            permissions: registry.permissions().to_vec(),
            intents: Vec::new(),
        };
        Self { registry, manifest }
    }

    fn requests(&self, count: usize, batch: usize) -> Vec<PermissionRequest> {
        let reasons = bench_reasons(&self.registry, count);
        let permissions: Vec<PermissionName> = reasons.iter().map(|r| r.permission_name.clone()).collect();
        (0..batch)
            .map(|i| PermissionRequest {
                app_id: self.manifest.app_id.clone(),
                request_code: i as i64,
                permissions: permissions.clone(),
                reasons: Some(reasons.clone()),
            })
            .collect()
    }

    /// Per-request mean, in microseconds. Broker and requests are prepared
    /// before the clock starts.
    fn sample(&self, count: usize, batch: usize) -> f64 {
        let mut broker = Broker::with_clock(self.registry.clone(), LogicalClock::new());
        broker.register_app(self.manifest.clone()).expect("bench app registers");
        let requests = self.requests(count, batch);
        let start = Instant::now();
        for req in requests {
            let receipt = broker.request_permissions(req).expect("bench request is valid");
            debug_assert_eq!(receipt.prompt_ids.len(), count);
            black_box(receipt);
        }
        let elapsed = start.elapsed();
        black_box(&broker);
        elapsed.as_secs_f64() * 1e6 / batch as f64
    }
}

pub fn bench_prompt_assembly(base: &IntentRegistry, config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    if config.repetitions < MIN_REPETITIONS {
        return Err(HarnessError::InvalidBench(format!(
            "repetitions must be at least {MIN_REPETITIONS}, got {}",
            config.repetitions
        )));
    }
    if config.counts.is_empty() {
        return Err(HarnessError::InvalidBench("no permission counts given".into()));
    }
    if config.batch == 0 {
        return Err(HarnessError::InvalidBench("batch must be positive".into()));
    }
    let workload = Workload::new(bench_registry(base));
    let catalog = workload.registry.permissions().len();
    if let Some(&bad) = config.counts.iter().find(|&&c| c == 0 || c > catalog) {
        return Err(HarnessError::InvalidBench(format!(
            "permission count {bad} outside 1..={catalog}"
        )));
    }
    if config.counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(HarnessError::InvalidBench("counts must be non-decreasing".into()));
    }

    for _ in 0..config.warmup {
        for &c in &config.counts {
            black_box(workload.sample(c, config.batch));
            black_box(workload.sample(0, config.batch));
        }
    }

    let mut samples = vec![Vec::with_capacity(config.repetitions); config.counts.len()];
    let mut baselines = samples.clone();
    for _ in 0..config.repetitions {
        for (i, &c) in config.counts.iter().enumerate() {
            samples[i].push(workload.sample(c, config.batch));
            baselines[i].push(workload.sample(0, config.batch));
        }
    }

    let results: Vec<BenchResult> = config
        .counts
        .iter()
        .zip(samples)
        .zip(baselines)
        .map(|((&count, samples), baseline)| {
            let summary = Summary::of(&samples);
            BenchResult {
                permission_count: count,
                repetitions: samples.len(),
                median_assembly_micros: summary.median,
                summary,
                baseline: Summary::of(&baseline),
                samples,
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.permission_count as f64, r.median_assembly_micros))
        .collect();
    Ok(BenchReport {
        config: config.clone(),
        fit: linear_fit(&points),
        results,
    })
}
