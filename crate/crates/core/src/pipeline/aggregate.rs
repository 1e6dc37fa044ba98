//! Mean and standard deviation of filter and metric outputs across runs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::genfilter::FilterSummary;
use crate::metrics::{Direction, MetricReport, MetricValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
}

/// Two-pass mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> Result<Stat, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::InvalidConfig("no runs to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Stat { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterAggregate {
    pub total: Stat,
    pub accepted: Stat,
    pub rejected: Stat,
    pub acceptance_rate: Stat,
    /// A reason absent from a run counts as 0 there.
    pub rejected_counts: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub direction: Direction,
    pub mean: MetricValue,
    pub std: MetricValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterAggregate>,
    pub metrics: BTreeMap<String, MetricAggregate>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn aggregate_filters(runs: &[FilterSummary]) -> Result<FilterAggregate, PipelineError> {
    let col = |f: fn(&FilterSummary) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    let reasons: BTreeSet<&String> = runs.iter().flat_map(|r| r.rejected_counts.keys()).collect();
    let mut rejected_counts = BTreeMap::new();
    for reason in reasons {
        let v: Vec<f64> = runs
            .iter()
            .map(|r| r.rejected_counts.get(reason).copied().unwrap_or(0) as f64)
            .collect();
        rejected_counts.insert(reason.clone(), mean_std(&v)?);
    }
    Ok(FilterAggregate {
        total: col(|r| r.total as f64)?,
        accepted: col(|r| r.accepted as f64)?,
        rejected: col(|r| r.rejected as f64)?,
        acceptance_rate: col(|r| if r.total == 0 { 0.0 } else { r.accepted as f64 / r.total as f64 })?,
        rejected_counts,
    })
}

fn aggregate_metric(name: &str, entries: &[(Direction, MetricValue)]) -> Result<MetricAggregate, PipelineError> {
    let inconsistent = || PipelineError::InconsistentRuns(format!("metric `{name}` differs in kind across runs"));
    let direction = entries[0].0;
    if entries.iter().any(|e| e.0 != direction) {
        return Err(inconsistent());
    }
    match entries[0].1 {
        MetricValue::Scalar(_) => {
            let v = entries
                .iter()
                .map(|e| match e.1 {
                    MetricValue::Scalar(x) => Ok(x),
                    MetricValue::Pair(..) => Err(inconsistent()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let s = mean_std(&v)?;
            Ok(MetricAggregate {
                direction,
                mean: MetricValue::Scalar(s.mean),
                std: MetricValue::Scalar(s.std),
            })
        }
        MetricValue::Pair(..) => {
            let (a, b): (Vec<f64>, Vec<f64>) = entries
                .iter()
                .map(|e| match e.1 {
                    MetricValue::Pair(p, r) => Ok((p, r)),
                    MetricValue::Scalar(_) => Err(inconsistent()),
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            let (sa, sb) = (mean_std(&a)?, mean_std(&b)?);
            Ok(MetricAggregate {
                direction,
                mean: MetricValue::Pair(sa.mean, sb.mean),
                std: MetricValue::Pair(sa.std, sb.std),
            })
        }
    }
}

/// Aggregate per-run outputs. Either list may be empty, but when both are
/// given they must describe the same number of runs, and every metric must
/// appear in every run.
pub fn aggregate_runs(filters: &[FilterSummary], metrics: &[MetricReport]) -> Result<PipelineReport, PipelineError> {
    if filters.is_empty() && metrics.is_empty() {
        return Err(PipelineError::InvalidConfig("no runs to aggregate".into()));
    }
    if !filters.is_empty() && !metrics.is_empty() && filters.len() != metrics.len() {
        return Err(PipelineError::InconsistentRuns(format!(
            "{} filter reports but {} metric reports",
            filters.len(),
            metrics.len()
        )));
    }
    let filter = if filters.is_empty() {
        None
    } else {
        Some(aggregate_filters(filters)?)
    };

    let mut out = BTreeMap::new();
    if let Some(first) = metrics.first() {
        for name in first.metrics.keys() {
            let entries = metrics
                .iter()
                .map(|m| {
                    m.get(name).map(|e| (e.direction, e.value)).ok_or_else(|| {
                        PipelineError::InconsistentRuns(format!("metric `{name}` missing from a run"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.insert(name.clone(), aggregate_metric(name, &entries)?);
        }
        if metrics.iter().any(|m| m.metrics.len() != first.metrics.len()) {
            return Err(PipelineError::InconsistentRuns("runs report different metric sets".into()));
        }
    }
    Ok(PipelineReport {
        runs: filters.len().max(metrics.len()),
        filter,
        metrics: out,
    })
}
