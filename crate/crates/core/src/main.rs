use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use auglang::conditioning::ConditioningMode;
use auglang::pipeline::{self, EndpointConfig, PipelineConfig, PipelineError, StageOutcome};

#[derive(Parser)]
#[command(name = "auglang", version, about = "Augmented-language data augmentation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Keep the same fraction of every intent class.
    Subsample,
    /// Write generator prompts as JSONL.
    Prompts,
    /// Collect one generation per prompt from a file or an HTTP endpoint.
    Generate,
    /// Decode generations, drop invalid ones and write the audit.
    Filter,
    /// Concatenate real and synthetic examples with provenance.
    Assemble,
    /// Compute generation-quality metrics.
    Metrics,
    /// Run the numerical checks of the mixout / kernel-ridge theory.
    MixoutVerify,
    /// Mean and standard deviation of filter and metric reports across runs.
    Report,
}

/// Flags applied on top of the config file.
#[derive(Args)]
struct Overrides {
    /// TOML or JSON config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    sampling_ratio: Option<f64>,
    #[arg(long, global = true)]
    mode: Option<ConditioningMode>,
    #[arg(long, global = true)]
    count_per_intent: Option<usize>,
    #[arg(long, global = true)]
    dedup_exact: Option<bool>,
    #[arg(long, global = true)]
    dedup_training: Option<bool>,
    /// Use endpoint mode with this URL.
    #[arg(long, global = true)]
    endpoint_url: Option<String>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[arg(long, global = true)]
    subsampled: Option<PathBuf>,
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    #[arg(long, global = true)]
    generations_in: Option<PathBuf>,
    #[arg(long, global = true)]
    generations: Option<PathBuf>,
    #[arg(long, global = true)]
    filtered: Option<PathBuf>,
    #[arg(long, global = true)]
    filter_report: Option<PathBuf>,
    #[arg(long, global = true)]
    assembled: Option<PathBuf>,
    #[arg(long, global = true)]
    metrics_report: Option<PathBuf>,
    #[arg(long, global = true)]
    verify_report: Option<PathBuf>,
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Filter audits to aggregate (repeatable; replaces the configured list).
    #[arg(long = "filter-reports", global = true, num_args = 1..)]
    filter_reports: Vec<PathBuf>,
    /// Metric reports to aggregate (repeatable; replaces the configured list).
    #[arg(long = "metric-reports", global = true, num_args = 1..)]
    metric_reports: Vec<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

impl Overrides {
    fn apply(self, cfg: &mut PipelineConfig) {
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.sampling_ratio, self.sampling_ratio);
        set(&mut cfg.mode, self.mode);
        set(&mut cfg.count_per_intent, self.count_per_intent);
        set(&mut cfg.dedup_exact, self.dedup_exact);
        set(&mut cfg.dedup_training, self.dedup_training);
        if let Some(url) = self.endpoint_url {
            cfg.endpoint.get_or_insert_with(EndpointConfig::default).url = url;
        }
        let p = &mut cfg.paths;
        set_path(&mut p.train, self.train);
        set_path(&mut p.schema, self.schema);
        set_path(&mut p.subsampled, self.subsampled);
        set_path(&mut p.prompts, self.prompts);
        set_path(&mut p.generations_in, self.generations_in);
        set_path(&mut p.generations, self.generations);
        set_path(&mut p.filtered, self.filtered);
        set_path(&mut p.filter_report, self.filter_report);
        set_path(&mut p.assembled, self.assembled);
        set_path(&mut p.metrics_report, self.metrics_report);
        set_path(&mut p.verify_report, self.verify_report);
        set_path(&mut p.report, self.report);
        if !self.filter_reports.is_empty() {
            cfg.report.filter_reports = self.filter_reports;
        }
        if !self.metric_reports.is_empty() {
            cfg.report.metric_reports = self.metric_reports;
        }
    }
}

fn run(cli: Cli) -> Result<StageOutcome, PipelineError> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    match cli.command {
        Command::Subsample => pipeline::run_subsample(&cfg),
        Command::Prompts => pipeline::run_prompts(&cfg),
        Command::Generate => pipeline::run_generate(&cfg),
        Command::Filter => pipeline::run_filter(&cfg),
        Command::Assemble => pipeline::run_assemble(&cfg),
        Command::Metrics => pipeline::run_metrics(&cfg),
        Command::MixoutVerify => {
            let (outcome, report) = pipeline::run_mixout_verify(&cfg)?;
            if !report.passed {
                // show the report before failing when it has no file
                if let Some(text) = &outcome.stdout {
                    print!("{text}");
                }
                let failed = report.checks.iter().filter(|c| !c.passed).count();
                return Err(PipelineError::VerificationFailed {
                    failed,
                    total: report.checks.len(),
                });
            }
            Ok(outcome)
        }
        Command::Report => pipeline::run_report(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            match &outcome.stdout {
                Some(text) => print!("{text}"),
                None => println!("{}", serde_json::to_string(&outcome).expect("outcome serializes")),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
