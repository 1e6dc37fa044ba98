//! Generation-quality metrics: n-gram overlap, perplexity, and
//! distribution distances over sentence embeddings.

mod bleu;
mod embedding;
mod frechet;
mod kendall;
mod kmeans;
mod perplexity;
mod prd;
mod report;

use std::path::PathBuf;

pub use bleu::{bleu4, corpus_bleu4, self_bleu4, BleuAveraging, Smoothing, MAX_ORDER};
pub use embedding::{EmbeddingMatrix, EMB1_MAGIC};
pub use frechet::{frechet_distance, frechet_from_moments, gaussian_moments, GaussianMoments};
pub use kendall::{kendall_tau, kendall_tau_naive};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use prd::{prd_curve, prd_from_histograms, ratio_grid, PrdConfig, PrdCurve};
pub use perplexity::{perplexity, read_logprobs, LogprobRecord};
pub use report::{metric_report, Direction, MetricInputs, MetricReport, MetricValue, MetricEntry};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("{what} needs at least {need} samples, got {got}")]
    TooFewSamples {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: one input is constant")]
    UndefinedCorrelation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
