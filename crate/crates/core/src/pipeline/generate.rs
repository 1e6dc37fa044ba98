//! Getting raw generations for a prompt file, either from a file produced
//! elsewhere or from an HTTP endpoint.
//!
//! The endpoint receives `{"prompts": [...]}` and must answer
//! `{"generations": [...]}` with one string per prompt.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub url: String,
    pub batch_size: usize,
    pub max_parallel: usize,
    pub timeout_secs: f64,
    /// Retries after the first attempt for transient failures.
    pub retries: u32,
    /// Delay before the first retry; doubled for each further one.
    pub backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: String::new(),
            batch_size: 32,
            max_parallel: 4,
            timeout_secs: 60.0,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSource {
    File(PathBuf),
    Endpoint(EndpointConfig),
}

#[derive(Serialize)]
struct Request<'a> {
    prompts: &'a [&'a str],
}

#[derive(Deserialize)]
struct Response {
    generations: Vec<String>,
}

fn check_len(expected: usize, got: usize) -> Result<(), PipelineError> {
    if expected != got {
        return Err(PipelineError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// One generation per prompt, in prompt order.
pub fn run_generation(prompts: &[&str], source: &GeneratorSource) -> Result<Vec<String>, PipelineError> {
    match source {
        GeneratorSource::File(path) => {
            let lines = read_lines(path)?;
            check_len(prompts.len(), lines.len())?;
            Ok(lines)
        }
        GeneratorSource::Endpoint(cfg) => generate_from_endpoint(prompts, cfg),
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<String>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::File {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Lines joined with `\n`, each terminated.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| PipelineError::File {
        path: path.to_owned(),
        source: e,
    })
}

enum Failure {
    Transient(String),
    Fatal(PipelineError),
}

fn post_batch(agent: &ureq::Agent, url: &str, prompts: &[&str]) -> Result<Vec<String>, Failure> {
    let mut resp = agent
        .post(url)
        .send_json(Request { prompts })
        .map_err(|e| match e {
            ureq::Error::BadUri(_) | ureq::Error::Json(_) => Failure::Fatal(PipelineError::Http(e.to_string())),
            other => Failure::Transient(other.to_string()),
        })?;
    let status = resp.status().as_u16();
    if status == 429 || status >= 500 {
        return Err(Failure::Transient(format!("HTTP {status}")));
    }
    if status >= 400 {
        return Err(Failure::Fatal(PipelineError::Http(format!("HTTP {status}"))));
    }
    let body: Response = resp
        .body_mut()
        .read_json()
        .map_err(|e| Failure::Fatal(PipelineError::MalformedResponse(e.to_string())))?;
    check_len(prompts.len(), body.generations.len()).map_err(Failure::Fatal)?;
    // one generation per line downstream
    Ok(body
        .generations
        .into_iter()
        .map(|g| g.replace(['\r', '\n'], " "))
        .collect())
}

fn post_with_retry(agent: &ureq::Agent, cfg: &EndpointConfig, prompts: &[&str]) -> Result<Vec<String>, PipelineError> {
    let mut delay = Duration::from_millis(cfg.backoff_ms);
    let mut attempt = 0;
    loop {
        match post_batch(agent, &cfg.url, prompts) {
            Ok(g) => return Ok(g),
            Err(Failure::Fatal(e)) => return Err(e),
            Err(Failure::Transient(msg)) => {
                if attempt >= cfg.retries {
                    return Err(PipelineError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: msg,
                    });
                }
                std::thread::sleep(delay);
                delay *= 2;
                attempt += 1;
            }
        }
    }
}

type BatchResult = Result<Vec<String>, PipelineError>;

fn generate_from_endpoint(prompts: &[&str], cfg: &EndpointConfig) -> Result<Vec<String>, PipelineError> {
    if cfg.url.is_empty() {
        return Err(PipelineError::InvalidConfig("endpoint url is empty".into()));
    }
    let timeout_ok = cfg.timeout_secs.is_finite() && cfg.timeout_secs > 0.0;
    if cfg.batch_size == 0 || cfg.max_parallel == 0 || !timeout_ok {
        return Err(PipelineError::InvalidConfig(
            "batch_size, max_parallel and timeout_secs must be positive".into(),
        ));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();

    let batches: Vec<&[&str]> = prompts.chunks(cfg.batch_size).collect();
    let results: Mutex<Vec<Option<BatchResult>>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..cfg.max_parallel.min(batches.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(i) else { break };
                let r = post_with_retry(&agent, cfg, batch);
                let failed = r.is_err();
                results.lock().expect("no worker panics")[i] = Some(r);
                if failed {
                    // stop handing out work
                    next.store(batches.len(), Ordering::Relaxed);
                }
            });
        }
    });

    let mut out = Vec::with_capacity(prompts.len());
    for r in results.into_inner().expect("no worker panics").into_iter().flatten() {
        out.extend(r?);
    }
    check_len(prompts.len(), out.len())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_mode_checks_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.txt");
        write_lines(&path, &["a b".into(), "c".into()]).unwrap();
        let src = GeneratorSource::File(path.clone());
        assert_eq!(run_generation(&["p", "q"], &src).unwrap(), vec!["a b", "c"]);
        assert!(matches!(
            run_generation(&["p", "q", "r"], &src),
            Err(PipelineError::LengthMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(
            run_generation(&["p"], &GeneratorSource::File(dir.path().join("missing"))),
            Err(PipelineError::File { .. })
        ));
    }

    #[test]
    fn endpoint_config_validation() {
        let cfg = EndpointConfig::default();
        assert!(matches!(
            run_generation(&["p"], &GeneratorSource::Endpoint(cfg)),
            Err(PipelineError::InvalidConfig(_))
        ));
    }
}
