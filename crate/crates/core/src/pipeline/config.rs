use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EndpointConfig, PipelineError};
use crate::conditioning::{ConditioningMode, MaskPolicy};
use crate::metrics::MetricInputs;
use crate::mixoutlab::VerifyConfig;

/// Files read and written by the stages. Relative paths in a config file are
/// taken relative to that file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePaths {
    /// Full training corpus (CoNLL or JSONL).
    pub train: Option<PathBuf>,
    /// Schema JSON; derived from `train` when absent.
    pub schema: Option<PathBuf>,
    /// Per-intent subsample of `train`. Once configured, later stages use it
    /// as the real data in place of `train`.
    pub subsampled: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    /// User-supplied generations, one per prompt line (file mode).
    pub generations_in: Option<PathBuf>,
    pub generations: Option<PathBuf>,
    pub filtered: Option<PathBuf>,
    pub filter_report: Option<PathBuf>,
    pub assembled: Option<PathBuf>,
    pub metrics_report: Option<PathBuf>,
    pub verify_report: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Per-run outputs combined by the `report` stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportInputs {
    pub filter_reports: Vec<PathBuf>,
    pub metric_reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sampling_ratio: f64,
    pub mode: ConditioningMode,
    pub count_per_intent: usize,
    pub mask_policy: MaskPolicy,
    /// Drop generations identical to an earlier accepted one.
    pub dedup_exact: bool,
    /// Drop generations identical to a real training example.
    pub dedup_training: bool,
    /// Endpoint mode for `generate`; file mode when absent.
    pub endpoint: Option<EndpointConfig>,
    pub paths: PipelinePaths,
    pub metrics: MetricInputs,
    pub verify: VerifyConfig,
    pub report: ReportInputs,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            sampling_ratio: 1.0,
            mode: ConditioningMode::Intent,
            count_per_intent: 10,
            mask_policy: MaskPolicy::default(),
            dedup_exact: true,
            dedup_training: false,
            endpoint: None,
            paths: PipelinePaths::default(),
            metrics: MetricInputs::default(),
            verify: VerifyConfig::default(),
            report: ReportInputs::default(),
        }
    }
}

fn rebase(path: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl PipelineConfig {
    /// Parse JSON for `.json` files and TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::File {
            path: path.to_owned(),
            source: e,
        })?;
        let mut cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase_paths(base);
        Ok(cfg)
    }

    fn rebase_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [
            &mut p.train,
            &mut p.schema,
            &mut p.subsampled,
            &mut p.prompts,
            &mut p.generations_in,
            &mut p.generations,
            &mut p.filtered,
            &mut p.filter_report,
            &mut p.assembled,
            &mut p.metrics_report,
            &mut p.verify_report,
            &mut p.report,
        ] {
            rebase(path, base);
        }
        let m = &mut self.metrics;
        for path in [
            &mut m.real_text,
            &mut m.fake_text,
            &mut m.real_embeddings,
            &mut m.fake_embeddings,
            &mut m.real_aug_embeddings,
            &mut m.fake_aug_embeddings,
            &mut m.real_ft_embeddings,
            &mut m.fake_ft_embeddings,
            &mut m.real_logprobs,
            &mut m.fake_logprobs,
        ] {
            rebase(path, base);
        }
        for list in [&mut self.report.filter_reports, &mut self.report.metric_reports] {
            for p in list.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "sampling_ratio must lie in (0, 1], got {}",
                self.sampling_ratio
            )));
        }
        Ok(())
    }
}

/// The configured path or a [`PipelineError::MissingSetting`] naming it.
pub(super) fn require<'a>(path: &'a Option<PathBuf>, name: &'static str) -> Result<&'a Path, PipelineError> {
    path.as_deref().ok_or(PipelineError::MissingSetting(name))
}
