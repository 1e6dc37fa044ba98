//! One function per CLI subcommand. Each reads its inputs from the paths in
//! the config and writes its outputs there; nothing is kept between calls.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::require;
use super::{
    aggregate_runs, assemble_augmented_set, read_lines, run_generation, subsample_per_intent, write_lines,
    GeneratorSource, PipelineConfig, PipelineError,
};
use crate::codec::{read_examples, write_corpus, CorpusRecord, LabeledExample, SlotSchema};
use crate::conditioning::{build_requests, read_prompts, write_prompts};
use crate::genfilter::{filter_generations, FilterOptions, FilterSummary};
use crate::metrics::{metric_report, MetricReport};
use crate::mixoutlab::{verify_all, VerificationReport};
use crate::seed::derive_seed;

// stream indices for per-stage seeds
const SUBSAMPLE_STREAM: u64 = 0;
const PROMPTS_STREAM: u64 = 1;

/// What a stage did, printed as JSON on stdout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub records: usize,
    pub outputs: Vec<PathBuf>,
    /// Set instead of an output file when the stage's report path is unset.
    #[serde(skip)]
    pub stdout: Option<String>,
}

impl StageOutcome {
    fn new(stage: &'static str, records: usize, outputs: Vec<PathBuf>) -> Self {
        StageOutcome {
            stage,
            records,
            outputs,
            stdout: None,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::File {
        path: path.to_owned(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::File {
        path: path.to_owned(),
        source: e,
    })
}

fn plain_records(examples: Vec<LabeledExample>) -> Vec<CorpusRecord> {
    examples
        .into_iter()
        .map(|example| CorpusRecord { example, source: None })
        .collect()
}

/// The schema file if configured, otherwise the label sets of the full
/// training corpus.
pub fn load_schema(cfg: &PipelineConfig) -> Result<SlotSchema, PipelineError> {
    if let Some(path) = &cfg.paths.schema {
        return Ok(serde_json::from_str(&read_text(path)?)?);
    }
    let train = read_examples(require(&cfg.paths.train, "paths.train")?)?;
    Ok(SlotSchema::from_examples(&train)?)
}

/// The subsample when one is configured, the full training corpus otherwise.
fn real_examples(cfg: &PipelineConfig) -> Result<Vec<LabeledExample>, PipelineError> {
    let path = match &cfg.paths.subsampled {
        Some(p) => p.as_path(),
        None => require(&cfg.paths.train, "paths.train")?,
    };
    Ok(read_examples(path)?)
}

pub fn run_subsample(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let train = read_examples(require(&cfg.paths.train, "paths.train")?)?;
    let out = require(&cfg.paths.subsampled, "paths.subsampled")?;
    let sub = subsample_per_intent(&train, cfg.sampling_ratio, derive_seed(cfg.seed, SUBSAMPLE_STREAM))?;
    write_corpus(out, &plain_records(sub.clone()))?;
    Ok(StageOutcome::new("subsample", sub.len(), vec![out.to_owned()]))
}

pub fn run_prompts(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let schema = load_schema(cfg)?;
    let real = real_examples(cfg)?;
    let out = require(&cfg.paths.prompts, "paths.prompts")?;
    let prompts = build_requests(
        &real,
        &schema,
        cfg.mode,
        cfg.count_per_intent,
        &cfg.mask_policy,
        derive_seed(cfg.seed, PROMPTS_STREAM),
    )?;
    let mut buf = Vec::new();
    write_prompts(&mut buf, &prompts)?;
    std::fs::write(out, buf).map_err(|e| PipelineError::File {
        path: out.to_owned(),
        source: e,
    })?;
    Ok(StageOutcome::new("prompts", prompts.len(), vec![out.to_owned()]))
}

pub fn run_generate(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let prompts_path = require(&cfg.paths.prompts, "paths.prompts")?;
    let file = std::fs::File::open(prompts_path).map_err(|e| PipelineError::File {
        path: prompts_path.to_owned(),
        source: e,
    })?;
    let prompts = read_prompts(std::io::BufReader::new(file))?;
    let texts: Vec<&str> = prompts.iter().map(|p| p.text.as_str()).collect();
    let source = match &cfg.endpoint {
        Some(endpoint) => GeneratorSource::Endpoint(endpoint.clone()),
        None => GeneratorSource::File(require(&cfg.paths.generations_in, "paths.generations_in")?.to_owned()),
    };
    let out = require(&cfg.paths.generations, "paths.generations")?;
    let generations = run_generation(&texts, &source)?;
    write_lines(out, &generations)?;
    Ok(StageOutcome::new("generate", generations.len(), vec![out.to_owned()]))
}

pub fn run_filter(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let schema = load_schema(cfg)?;
    let lines = read_lines(require(&cfg.paths.generations, "paths.generations")?)?;
    let out = require(&cfg.paths.filtered, "paths.filtered")?;
    let audit = require(&cfg.paths.filter_report, "paths.filter_report")?;
    let training = if cfg.dedup_training {
        Some(real_examples(cfg)?)
    } else {
        None
    };
    let report = filter_generations(
        &lines,
        &schema,
        &FilterOptions {
            training: training.as_deref(),
            dedup_exact: cfg.dedup_exact,
        },
    );
    let summary = report.summary();
    write_corpus(out, &plain_records(report.accepted))?;
    write_text(audit, &format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
    Ok(StageOutcome::new(
        "filter",
        summary.accepted,
        vec![out.to_owned(), audit.to_owned()],
    ))
}

pub fn run_assemble(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let schema = load_schema(cfg)?;
    let real = real_examples(cfg)?;
    let synthetic = read_examples(require(&cfg.paths.filtered, "paths.filtered")?)?;
    let out = require(&cfg.paths.assembled, "paths.assembled")?;
    let records = assemble_augmented_set(&real, &synthetic, &schema)?;
    write_corpus(out, &records)?;
    Ok(StageOutcome::new("assemble", records.len(), vec![out.to_owned()]))
}

fn emit(stage: &'static str, records: usize, path: Option<&Path>, json: String) -> Result<StageOutcome, PipelineError> {
    let json = json + "\n";
    match path {
        Some(path) => {
            write_text(path, &json)?;
            Ok(StageOutcome::new(stage, records, vec![path.to_owned()]))
        }
        None => {
            let mut outcome = StageOutcome::new(stage, records, Vec::new());
            outcome.stdout = Some(json);
            Ok(outcome)
        }
    }
}

pub fn run_metrics(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let report = metric_report(&cfg.metrics)?;
    emit("metrics", report.metrics.len(), cfg.paths.metrics_report.as_deref(), report.to_json())
}

/// The stage outcome plus the report, so the caller can fail after it has
/// been written.
pub fn run_mixout_verify(cfg: &PipelineConfig) -> Result<(StageOutcome, VerificationReport), PipelineError> {
    let report = verify_all(&cfg.verify)?;
    let json = serde_json::to_string_pretty(&report)?;
    let outcome = emit("mixout-verify", report.checks.len(), cfg.paths.verify_report.as_deref(), json)?;
    Ok((outcome, report))
}

pub fn run_report(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let filters = cfg
        .report
        .filter_reports
        .iter()
        .map(|p| Ok(serde_json::from_str::<FilterSummary>(&read_text(p)?)?))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let metrics = cfg
        .report
        .metric_reports
        .iter()
        .map(|p| Ok(MetricReport::from_json(&read_text(p)?)?))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let report = aggregate_runs(&filters, &metrics)?;
    emit("report", report.runs, cfg.paths.report.as_deref(), report.to_json())
}
