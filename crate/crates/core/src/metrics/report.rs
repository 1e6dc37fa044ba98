//! One JSON table with every metric that the supplied inputs allow.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    bleu4, frechet_distance, perplexity, prd_curve, self_bleu4, BleuAveraging, EmbeddingMatrix, LogprobRecord,
    MetricsError, PrdConfig, Smoothing,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Higher is better.
    Up,
    /// Lower is better.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Scalar(f64),
    /// (precision, recall).
    Pair(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub direction: Direction,
    pub value: MetricValue,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, MetricEntry>,
}

impl MetricReport {
    pub fn insert(&mut self, name: &str, direction: Direction, value: MetricValue) {
        self.metrics.insert(name.to_owned(), MetricEntry { direction, value });
    }

    pub fn get(&self, name: &str) -> Option<&MetricEntry> {
        self.metrics.get(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::Format(e.to_string()))
    }
}

/// Input files for [`metric_report`]. Any subset may be given; each metric is
/// computed only when all of its files are present. Text files hold one
/// whitespace-tokenized sentence per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricInputs {
    pub real_text: Option<PathBuf>,
    pub fake_text: Option<PathBuf>,
    /// Plain-sentence embeddings (`fd`, `prd`).
    pub real_embeddings: Option<PathBuf>,
    pub fake_embeddings: Option<PathBuf>,
    /// Augmented-sentence embeddings (`fda`, `pra`).
    pub real_aug_embeddings: Option<PathBuf>,
    pub fake_aug_embeddings: Option<PathBuf>,
    /// Augmented-sentence embeddings from a fine-tuned encoder (`ft_fda`, `ft_pra`).
    pub real_ft_embeddings: Option<PathBuf>,
    pub fake_ft_embeddings: Option<PathBuf>,
    pub real_logprobs: Option<PathBuf>,
    pub fake_logprobs: Option<PathBuf>,
    pub smoothing: Smoothing,
    pub averaging: BleuAveraging,
    pub prd: PrdConfig,
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::File {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect())
}

fn pair<'a>(
    name: &'static str,
    a: &'a Option<PathBuf>,
    b: &'a Option<PathBuf>,
) -> Result<Option<(&'a Path, &'a Path)>, MetricsError> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(MetricsError::InvalidParameter(format!(
            "{name} needs both the real and the generated file"
        ))),
    }
}

pub fn metric_report(inputs: &MetricInputs) -> Result<MetricReport, MetricsError> {
    let mut report = MetricReport::default();

    let real = inputs.real_text.as_deref().map(read_sentences).transpose()?;
    let fake = inputs.fake_text.as_deref().map(read_sentences).transpose()?;
    if let (Some(real), Some(fake)) = (&real, &fake) {
        let score = bleu4(fake, real, inputs.smoothing, inputs.averaging)?;
        report.insert("bleu4", Direction::Up, MetricValue::Scalar(score));
    }
    if let Some(real) = &real {
        let s = self_bleu4(real, inputs.smoothing)?;
        report.insert("self_bleu4_real", Direction::Down, MetricValue::Scalar(s));
    }
    if let Some(fake) = &fake {
        let s = self_bleu4(fake, inputs.smoothing)?;
        report.insert("self_bleu4_fake", Direction::Down, MetricValue::Scalar(s));
    }

    for (name, path) in [
        ("perplexity_real", &inputs.real_logprobs),
        ("perplexity_fake", &inputs.fake_logprobs),
    ] {
        if let Some(path) = path {
            let ppl = perplexity(&LogprobRecord::load_all(path)?)?;
            report.insert(name, Direction::Down, MetricValue::Scalar(ppl));
        }
    }

    let embedding_sets = [
        ("fd", "prd", &inputs.real_embeddings, &inputs.fake_embeddings),
        ("fda", "pra", &inputs.real_aug_embeddings, &inputs.fake_aug_embeddings),
        ("ft_fda", "ft_pra", &inputs.real_ft_embeddings, &inputs.fake_ft_embeddings),
    ];
    for (fd_name, pr_name, real, fake) in embedding_sets {
        if let Some((real, fake)) = pair(fd_name, real, fake)? {
            let real = EmbeddingMatrix::load(real)?;
            let fake = EmbeddingMatrix::load(fake)?;
            let fd = frechet_distance(&real, &fake)?;
            report.insert(fd_name, Direction::Down, MetricValue::Scalar(fd));
            let (p, r) = prd_curve(&real, &fake, &inputs.prd)?.summary;
            report.insert(pr_name, Direction::Up, MetricValue::Pair(p, r));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = MetricReport::default();
        r.insert("fd", Direction::Down, MetricValue::Scalar(0.1 + 0.2));
        r.insert("prd", Direction::Up, MetricValue::Pair(0.854, 1.0 / 3.0));
        let json = r.to_json();
        assert_eq!(MetricReport::from_json(&json).unwrap(), r);
        assert!(json.contains("\"direction\": \"down\""));
    }

    #[test]
    fn missing_file_is_typed() {
        let inputs = MetricInputs {
            real_embeddings: Some("/nonexistent/real.emb".into()),
            fake_embeddings: Some("/nonexistent/fake.emb".into()),
            ..MetricInputs::default()
        };
        assert!(matches!(metric_report(&inputs), Err(MetricsError::File { .. })));
    }

    #[test]
    fn half_a_pair_is_rejected() {
        let inputs = MetricInputs {
            real_embeddings: Some("a.emb".into()),
            ..MetricInputs::default()
        };
        assert!(matches!(
            metric_report(&inputs),
            Err(MetricsError::InvalidParameter(_))
        ));
    }

    #[test]
    fn empty_inputs_give_empty_report() {
        assert!(metric_report(&MetricInputs::default()).unwrap().metrics.is_empty());
    }
}
