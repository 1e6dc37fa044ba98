mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use auglang::codec::{read_corpus, Provenance};
use auglang::genfilter::FilterSummary;
use auglang::pipeline::{mean_std, run_generation, EndpointConfig, GeneratorSource, PipelineError, PipelineReport};
use serde_json::Value;

#[test]
fn full_pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    common::run_full_pipeline(dir.path(), 1);
    let d = dir.path();

    // 0.5 of 8 / 7 / 6 examples per intent
    let sub = read_corpus(&d.join("sub.conll")).unwrap();
    assert_eq!(sub.len(), 4 + 4 + 3);

    let prompts = std::fs::read_to_string(d.join("prompts.jsonl")).unwrap();
    assert_eq!(prompts.lines().count(), 12);
    assert!(prompts.lines().all(|l| l.contains("<mask>")));

    let summary: FilterSummary =
        serde_json::from_str(&std::fs::read_to_string(d.join("filter_report.json")).unwrap()).unwrap();
    assert_eq!((summary.total, summary.accepted, summary.rejected), (12, 7, 5));
    for reason in [
        "unbalanced_markers",
        "unknown_slot_type",
        "exact_duplicate",
        "unknown_intent",
        "missing_intent_header",
    ] {
        assert_eq!(summary.rejected_counts[reason], 1, "{reason}");
    }

    let assembled = read_corpus(&d.join("assembled.conll")).unwrap();
    assert_eq!(assembled.len(), 11 + 7);
    let synthetic = assembled.iter().filter(|r| r.source == Some(Provenance::Synthetic)).count();
    assert_eq!(synthetic, 7);

    let report: PipelineReport = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.runs, 1);
    assert_eq!(report.filter.unwrap().accepted.std, 0.0);
    for key in ["bleu4", "self_bleu4_real", "self_bleu4_fake", "fd", "prd"] {
        assert!(report.metrics.contains_key(key), "{key}");
    }

    // inputs are never rewritten
    assert_eq!(
        std::fs::read(common::fixture("generations.txt")).unwrap(),
        std::fs::read(d.join("generations.txt")).unwrap()
    );
}

#[test]
fn report_over_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut filter_reports = Vec::new();
    let mut metric_reports = Vec::new();
    for seed in 0..3 {
        let run = dir.path().join(format!("run{seed}"));
        std::fs::create_dir(&run).unwrap();
        common::run_full_pipeline(&run, seed);
        filter_reports.push(run.join("filter_report.json"));
        metric_reports.push(run.join("metrics.json"));
    }
    let mut args = vec!["report".to_owned(), "--report".into(), "all.json".into(), "--filter-reports".into()];
    args.extend(filter_reports.iter().map(|p| p.display().to_string()));
    args.push("--metric-reports".into());
    args.extend(metric_reports.iter().map(|p| p.display().to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = common::auglang(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: PipelineReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("all.json")).unwrap()).unwrap();
    assert_eq!(report.runs, 3);
    // embeddings are the same fixtures in every run
    let fd = &report.metrics["fd"];
    assert_eq!(serde_json::to_value(fd.std).unwrap(), serde_json::json!(0.0));
}

#[test]
fn mean_std_matches_streaming_moments() {
    let mut r = auglang::seed::rng(2);
    for n in [1usize, 2, 5, 40] {
        let values: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, -50.0..50.0)).collect();
        // Welford
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (v - mean);
        }
        let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
        let s = mean_std(&values).unwrap();
        assert!((s.mean - mean).abs() <= 1e-12, "n={n}");
        assert!((s.std - std).abs() <= 1e-12, "n={n}");
    }
}

fn error_json(out: &std::process::Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = common::auglang(dir.path(), &["prompts", "--config", "missing.toml"]);
    assert_eq!(error_json(&out)["error"], "file");

    let out = common::auglang(dir.path(), &["subsample"]);
    assert_eq!(error_json(&out)["error"], "missing_setting");

    let train = common::fixture("train.conll");
    let out = common::auglang(
        dir.path(),
        &["subsample", "--train", train.to_str().unwrap(), "--subsampled", "s.conll", "--sampling-ratio", "1.5"],
    );
    assert_eq!(error_json(&out)["error"], "invalid_config");

    // prompt file with 12 lines against a 3-line generations file
    common::write_pipeline_config(dir.path(), 0);
    common::stage(dir.path(), "subsample");
    common::stage(dir.path(), "prompts");
    std::fs::write(dir.path().join("short.txt"), "a\nb\nc\n").unwrap();
    let out = common::auglang(dir.path(), &["generate", "--config", "pipeline.toml", "--generations-in", "short.txt"]);
    let err = error_json(&out);
    assert_eq!(err["error"], "length_mismatch");
    assert!(err["message"].as_str().unwrap().contains("12"));
}

/// Minimal HTTP/1.1 server: each connection carries one JSON request and is
/// answered by `respond(request_index, prompts)` as (status, body).
fn serve<F>(respond: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, Vec<String>) -> (u16, String) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&count);
    let respond = Arc::new(respond);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let i = seen.fetch_add(1, Ordering::SeqCst);
            let respond = Arc::clone(&respond);
            std::thread::spawn(move || handle(stream, i, &*respond));
        }
    });
    (url, count)
}

fn handle(mut stream: TcpStream, i: usize, respond: &dyn Fn(usize, Vec<String>) -> (u16, String)) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    let request: Value = serde_json::from_slice(&body).unwrap();
    let prompts = request["prompts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_str().unwrap().to_owned())
        .collect();
    let (status, body) = respond(i, prompts);
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
}

fn generations(v: Vec<String>) -> String {
    serde_json::json!({ "generations": v }).to_string()
}

#[test]
fn endpoint_echo_round_trip() {
    let (url, _) = serve(|_, prompts| (200, generations(prompts)));
    let dir = tempfile::tempdir().unwrap();
    common::write_pipeline_config(dir.path(), 4);
    common::stage(dir.path(), "subsample");
    common::stage(dir.path(), "prompts");
    let out = common::auglang(dir.path(), &["generate", "--config", "pipeline.toml", "--endpoint-url", &url]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let prompts: Vec<String> = std::fs::read_to_string(dir.path().join("prompts.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["text"].as_str().unwrap().to_owned())
        .collect();
    let expected: String = prompts.iter().map(|p| format!("{p}\n")).collect();
    assert_eq!(std::fs::read_to_string(dir.path().join("generations.txt")).unwrap(), expected);
}

fn endpoint(url: String) -> GeneratorSource {
    GeneratorSource::Endpoint(EndpointConfig {
        url,
        batch_size: 3,
        max_parallel: 2,
        timeout_secs: 10.0,
        retries: 2,
        backoff_ms: 10,
    })
}

#[test]
fn endpoint_batches_keep_prompt_order() {
    let (url, count) = serve(|_, prompts| (200, generations(prompts.iter().map(|p| p.to_uppercase()).collect())));
    let prompts: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
    let refs: Vec<&str> = prompts.iter().map(String::as_str).collect();
    let out = run_generation(&refs, &endpoint(url)).unwrap();
    assert_eq!(out, prompts.iter().map(|p| p.to_uppercase()).collect::<Vec<_>>());
    assert_eq!(count.load(Ordering::SeqCst), 4);
}

#[test]
fn endpoint_short_response_is_a_length_mismatch() {
    let (url, _) = serve(|_, mut prompts| {
        prompts.pop();
        (200, generations(prompts))
    });
    let err = run_generation(&["a", "b", "c"], &endpoint(url)).unwrap_err();
    assert!(matches!(err, PipelineError::LengthMismatch { expected: 3, got: 2 }), "{err}");
}

#[test]
fn endpoint_retries_transient_failures() {
    let (url, count) = serve(|i, prompts| if i == 0 { (503, "busy".into()) } else { (200, generations(prompts)) });
    let out = run_generation(&["x\ny", "z"], &endpoint(url)).unwrap();
    // generations are stored one per line
    assert_eq!(out, ["x y", "z"]);
    assert_eq!(count.load(Ordering::SeqCst), 2);

    let (url, count) = serve(|_, _| (500, "down".into()));
    let err = run_generation(&["a"], &endpoint(url)).unwrap_err();
    assert!(matches!(err, PipelineError::RetriesExhausted { attempts: 3, .. }), "{err}");
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn endpoint_malformed_and_client_errors_are_not_retried() {
    let (url, count) = serve(|_, _| (200, "{\"text\": 1}".into()));
    let err = run_generation(&["a"], &endpoint(url)).unwrap_err();
    assert!(matches!(err, PipelineError::MalformedResponse(_)), "{err}");
    assert_eq!(count.load(Ordering::SeqCst), 1);

    let (url, _) = serve(|_, _| (404, "{}".into()));
    let err = run_generation(&["a"], &endpoint(url)).unwrap_err();
    assert!(matches!(err, PipelineError::Http(_)), "{err}");
}

#[test]
fn mixout_verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    // a reduced battery; the full one runs in the acceptance suite
    std::fs::write(
        dir.path().join("verify.toml"),
        r#"[paths]
verify_report = "verify.json"

[verify]
configs = 10
mc_samples = 20000

[verify.theorem2]
width = 256
n_test = 10

[verify.probe]
width = 128
"#,
    )
    .unwrap();
    let out = common::auglang(dir.path(), &["mixout-verify", "--config", "verify.toml"]);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 11);
    assert!(checks.iter().all(|c| c["name"].is_string() && c["tolerance"].is_number()));
    assert_eq!(out.status.success(), report["passed"].as_bool().unwrap());
}
