#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn auglang(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auglang"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Run `auglang <stage> --config pipeline.toml` in `dir`, panicking with the
/// error JSON on failure.
pub fn stage(dir: &Path, stage: &str) {
    let out = auglang(dir, &[stage, "--config", "pipeline.toml"]);
    assert!(
        out.status.success(),
        "{stage} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A complete file-mode configuration over the checked-in fixtures. Outputs
/// land in `dir`.
pub fn write_pipeline_config(dir: &Path, seed: u64) {
    std::fs::write(
        dir.join("real.txt"),
        "play some muse\nwhat is the weather in paris\nbook a table for four\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("fake.txt"),
        "play coldplay now\nis it sunny in lima\ntable for three\n",
    )
    .unwrap();
    let config = format!(
        r#"seed = {seed}
sampling_ratio = 0.5
mode = "span"
count_per_intent = 4

[paths]
train = "{train}"
subsampled = "sub.conll"
prompts = "prompts.jsonl"
generations_in = "{generations}"
generations = "generations.txt"
filtered = "filtered.conll"
filter_report = "filter_report.json"
assembled = "assembled.conll"
metrics_report = "metrics.json"
report = "report.json"

[metrics]
real_text = "real.txt"
fake_text = "fake.txt"
real_embeddings = "{real_emb}"
fake_embeddings = "{fake_emb}"

[metrics.prd]
num_clusters = 5
num_angles = 101
num_runs = 2

[report]
filter_reports = ["filter_report.json"]
metric_reports = ["metrics.json"]
"#,
        train = fixture("train.conll").display(),
        generations = fixture("generations.txt").display(),
        real_emb = fixture("gauss_500x16.emb1").display(),
        fake_emb = fixture("gauss_shift_500x16.emb1").display(),
    );
    std::fs::write(dir.join("pipeline.toml"), config).unwrap();
}

pub fn run_full_pipeline(dir: &Path, seed: u64) {
    write_pipeline_config(dir, seed);
    for s in ["subsample", "prompts", "generate", "filter", "assemble", "metrics", "report"] {
        stage(dir, s);
    }
}
