//! Pipeline stages and the configuration the `auglang` binary runs them from.

mod aggregate;
mod assemble;
mod config;
mod generate;
mod stages;
mod subsample;

use std::path::PathBuf;

use crate::codec::CodecError;
use crate::conditioning::ConditioningError;
use crate::metrics::MetricsError;
use crate::mixoutlab::MixoutError;

pub use aggregate::{aggregate_runs, mean_std, FilterAggregate, MetricAggregate, PipelineReport, Stat};
pub use assemble::assemble_augmented_set;
pub use config::{PipelineConfig, PipelinePaths, ReportInputs};
pub use generate::{read_lines, run_generation, write_lines, EndpointConfig, GeneratorSource};
pub use stages::{
    load_schema, run_assemble, run_filter, run_generate, run_metrics, run_mixout_verify, run_prompts, run_report,
    run_subsample, StageOutcome,
};
pub use subsample::{per_intent_quota, subsample_per_intent};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing setting `{0}`")]
    MissingSetting(&'static str),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("example does not match the schema: {0}")]
    SchemaMismatch(#[source] CodecError),
    #[error("expected {expected} generations, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("request failed: {0}")]
    Http(String),
    #[error("malformed generator response: {0}")]
    MalformedResponse(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("runs cannot be aggregated: {0}")]
    InconsistentRuns(String),
    #[error("{failed} of {total} verification checks failed")]
    VerificationFailed { failed: usize, total: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Mixout(#[from] MixoutError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Stable machine-readable code for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::InvalidConfig(_) => "invalid_config",
            PipelineError::MissingSetting(_) => "missing_setting",
            PipelineError::EmptyCorpus => "empty_corpus",
            PipelineError::SchemaMismatch(_) => "schema_mismatch",
            PipelineError::LengthMismatch { .. } => "length_mismatch",
            PipelineError::File { .. } => "file",
            PipelineError::Http(_) => "http",
            PipelineError::MalformedResponse(_) => "malformed_response",
            PipelineError::RetriesExhausted { .. } => "retries_exhausted",
            PipelineError::InconsistentRuns(_) => "inconsistent_runs",
            PipelineError::VerificationFailed { .. } => "verification_failed",
            PipelineError::Codec(_) => "codec",
            PipelineError::Conditioning(_) => "conditioning",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::Mixout(_) => "mixout",
            PipelineError::Json(_) => "json",
            PipelineError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
