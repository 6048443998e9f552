//! Scripted apps, an automated user, scenario replay and the prompt-assembly
//! benchmark.

pub mod bench;
pub mod decider;
pub mod scenario;
pub mod stats;
pub mod stress;

pub use bench::{bench_prompt_assembly, bench_registry, BenchConfig, BenchReport, BenchResult};
pub use decider::{AutoDecider, DecisionPolicy, ScriptedDecision};
pub use scenario::{run_scenario, ExpectationResult, Scenario, ScenarioReport, Step, BUILTIN_SCENARIOS};
pub use stats::{linear_fit, quantile, LinearFit, Summary};
pub use stress::{run_stress, StressConfig, StressReport};

use thiserror::Error;

use crate::broker::BrokerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed scenario: {0}")]
    ScenarioMalformed(String),
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("invalid benchmark configuration: {0}")]
    InvalidBench(String),
    #[error("stress run failed: {0}")]
    Stress(String),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::ScenarioMalformed(_) => "SCENARIO_MALFORMED",
            Self::UnknownScenario(_) => "UNKNOWN_SCENARIO",
            Self::InvalidBench(_) => "INVALID_BENCH",
            Self::Stress(_) => "STRESS_FAILED",
            Self::Broker(e) => e.code(),
            Self::Io { .. } => "IO_ERROR",
        }
    }
}
