//! Corpus-level perplexity from per-token natural-log probabilities.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// One line of a logprob file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobRecord {
    pub logprobs: Vec<f64>,
}

/// `exp(-Σ logp / N)` over every token of every record.
pub fn perplexity(records: &[LogprobRecord]) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for lp in records.iter().flat_map(|r| &r.logprobs) {
        if !lp.is_finite() {
            return Err(MetricsError::NonFinite("log-probability"));
        }
        sum += lp;
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::Empty("logprob records"));
    }
    Ok((-sum / count as f64).exp())
}

pub fn read_logprobs<R: BufRead>(reader: R) -> Result<Vec<LogprobRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogprobRecord = serde_json::from_str(&line)
            .map_err(|e| MetricsError::Format(format!("logprob line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

impl LogprobRecord {
    pub fn load_all(path: &Path) -> Result<Vec<LogprobRecord>, MetricsError> {
        let file = std::fs::File::open(path).map_err(|e| MetricsError::File {
            path: path.to_owned(),
            source: e,
        })?;
        read_logprobs(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: &[f64]) -> LogprobRecord {
        LogprobRecord { logprobs: v.to_vec() }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(perplexity(&[rec(&[0.0, 0.0]), rec(&[0.0])]).unwrap(), 1.0);
        let ln2 = std::f64::consts::LN_2;
        let p = perplexity(&[rec(&[-ln2; 3]), rec(&[-ln2])]).unwrap();
        assert!((p - 2.0).abs() < 1e-14);
    }

    #[test]
    fn token_weighted_not_sentence_weighted() {
        // 1 token at -3 and 3 tokens at -1: mean is -1.5 per token
        let p = perplexity(&[rec(&[-3.0]), rec(&[-1.0, -1.0, -1.0])]).unwrap();
        assert!((p - 1.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(perplexity(&[]), Err(MetricsError::Empty(_))));
        assert!(matches!(perplexity(&[rec(&[])]), Err(MetricsError::Empty(_))));
        assert!(matches!(
            perplexity(&[rec(&[f64::NEG_INFINITY])]),
            Err(MetricsError::NonFinite(_))
        ));
    }

    #[test]
    fn reads_jsonl() {
        let text = "{\"logprobs\": [-0.5, -1.5]}\n\n{\"logprobs\": []}\n";
        let recs = read_logprobs(text.as_bytes()).unwrap();
        assert_eq!(recs, vec![rec(&[-0.5, -1.5]), rec(&[])]);
        assert!(read_logprobs("{\"lp\": 1}".as_bytes()).is_err());
    }
}
