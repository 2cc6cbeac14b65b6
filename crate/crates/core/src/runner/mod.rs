//! Dataset ingestion, run configuration and the simulation modes: single-round
//! micro replication, multi-round macro forecasting and frozen-core
//! replication.

mod dataset;
mod hybrid;
mod micro;
mod output;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::{AbmError, BcParams, ModelParams, OpinionModel, SignConvention, UpdateSchedule};
use crate::agent::{DriverConfig, DriverError, ReflectionConfig, RetrievalWeights};
use crate::annotate::AnnotatorConfig;
use crate::calibration::{CalibrationError, ParameterGrid};
use crate::environment::{Clock, EnvError, FeedPolicy};
use crate::metrics::MetricError;

pub use dataset::{load_dataset, ContextTweet, Dataset, DatasetPaths, EdgeRecord, MicroContext, MicroPair, MicroTruth, TruthBehavior, UserRecord};
pub use hybrid::{
    read_core_recording, run_frozen_replicate, run_macro, run_macro_with, Components, CoreRecording, FrozenReport,
    MacroMetrics, MacroOutcome,
};
pub use micro::{run_micro, run_micro_with, BehaviorLabel, MicroPrediction, MicroReport};
pub use output::{read_trace_csv, write_trace_csv, RunManifest};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{file}:{line}: {message}")]
    Schema { file: String, line: usize, message: String },
    #[error("{file}:{line}: unknown user {id}")]
    UnknownUser { file: String, line: usize, id: u64 },
    #[error("{file}:{line}: {what} {value} outside [-1, 1]")]
    Range {
        file: String,
        line: usize,
        what: &'static str,
        value: f64,
    },
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no micro pairs in dataset")]
    NoMicroPairs,
    #[error("driver failures in round {round}: {failed} of {calls} calls exceeds the budget; partial outputs written")]
    FailureBudget { round: u32, failed: usize, calls: usize },
    #[error("recording mismatch: {0}")]
    Recording(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Abm(#[from] AbmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Micro,
    #[default]
    Macro,
    FrozenReplicate,
    Calibrate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    /// Defaults to a grid around the configured model.
    pub grid: Option<ParameterGrid>,
    pub replications: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            grid: None,
            replications: 10,
        }
    }
}

/// One structured document holding everything a run needs except secrets,
/// which are read from the environment variables named here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: RunMode,
    pub rounds: u32,
    pub seed: u64,
    /// Ordinary-agent model.
    pub model: ModelParams,
    pub signs: SignConvention,
    pub schedule: UpdateSchedule,
    pub clock: Clock,
    pub feed: FeedPolicy,
    /// Timeline depth shown to core agents.
    pub timeline_k: usize,
    /// Memory records shown in the prompt.
    pub memory_k: usize,
    pub reflection: ReflectionConfig,
    pub retrieval: RetrievalWeights,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Allowed fraction of failed action calls per round.
    pub failure_budget: f64,
    /// Frozen-replicate count.
    pub replicates: usize,
    pub output_dir: PathBuf,
    /// Also write one column per agent to `trace_agents.csv`.
    pub write_agent_trace: bool,
    pub driver: DriverConfig,
    pub annotators: AnnotatorConfig,
    pub calibration: CalibrationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::Macro,
            rounds: 14,
            seed: 0,
            model: ModelParams::Bc(BcParams {
                alpha: 0.1,
                epsilon: 0.3,
            }),
            signs: SignConvention::default(),
            schedule: UpdateSchedule::default(),
            clock: Clock::default(),
            feed: FeedPolicy::default(),
            timeline_k: 5,
            memory_k: 5,
            reflection: ReflectionConfig::default(),
            retrieval: RetrievalWeights::default(),
            workers: None,
            failure_budget: 0.05,
            replicates: 10,
            output_dir: PathBuf::from("out"),
            write_agent_trace: false,
            driver: DriverConfig::default(),
            annotators: AnnotatorConfig::default(),
            calibration: CalibrationSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, RunError> {
        toml::to_string_pretty(self).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.rounds < 1 {
            return Err(RunError::Config("rounds must be at least 1".into()));
        }
        if self.timeline_k == 0 {
            return Err(RunError::Config("timeline_k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return Err(RunError::Config("failure_budget must be in [0, 1]".into()));
        }
        if self.workers == Some(0) {
            return Err(RunError::Config("workers must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.feed.fraction) {
            return Err(RunError::Config("feed.fraction must be in [0, 1]".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    pub fn opinion_model(&self) -> OpinionModel {
        OpinionModel {
            params: self.model,
            signs: self.signs,
            schedule: self.schedule,
        }
    }
}

/// Runs `f` on a dedicated pool when `workers` is set.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::FeedMode;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig {
            feed: FeedPolicy::of(FeedMode::Opposite),
            workers: Some(4),
            ..RunConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = RunConfig::from_toml(
            "rounds = 3\nseed = 7\n[model]\nkind = \"hk\"\nepsilon = 0.2\n[driver]\nkind = \"heuristic\"\n",
        )
        .unwrap();
        assert_eq!(cfg.rounds, 3);
        assert_eq!(cfg.timeline_k, 5);
        assert_eq!(cfg.model.kind(), crate::abm::ModelKind::Hk);
    }

    #[test]
    fn zero_rounds_rejected() {
        assert!(matches!(RunConfig::from_toml("rounds = 0"), Err(RunError::Config(_))));
        assert!(RunConfig::from_toml("[model]\nkind = \"bc\"\nalpha = 2.0\nepsilon = 0.3").is_err());
    }
}
