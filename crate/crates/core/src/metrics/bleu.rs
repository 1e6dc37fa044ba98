//! BLEU-4 and Self-BLEU-4.
//!
//! Every candidate is scored against the whole reference set at once: an
//! n-gram's clipped count is its candidate count capped by its largest count
//! in any single reference, and the brevity penalty uses, per candidate, the
//! reference length closest to the candidate length (shorter wins ties).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// A zero precision makes the score zero.
    None,
    /// A zero matched count is replaced by this value.
    Epsilon(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Epsilon(1e-9)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuAveraging {
    /// Pool n-gram statistics over all candidates.
    #[default]
    Corpus,
    /// Mean of per-candidate scores.
    Sentence,
}

type Counts<'a> = HashMap<&'a [String], usize>;

fn ngram_counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_insert(0) += 1;
        }
    }
    out
}

fn closest_length(cand: usize, lengths: impl Iterator<Item = usize>) -> usize {
    lengths
        .min_by_key(|&r| (r.abs_diff(cand), r))
        .expect("at least one reference")
}

#[derive(Debug, Default, Clone, Copy)]
struct Stats {
    matched: [usize; MAX_ORDER],
    total: [usize; MAX_ORDER],
    cand_len: usize,
    ref_len: usize,
}

impl Stats {
    fn add(&mut self, other: &Stats) {
        for n in 0..MAX_ORDER {
            self.matched[n] += other.matched[n];
            self.total[n] += other.total[n];
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    fn score(&self, smoothing: Smoothing) -> f64 {
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let p = if self.matched[n] > 0 {
                self.matched[n] as f64 / self.total[n] as f64
            } else {
                match smoothing {
                    Smoothing::None => return 0.0,
                    Smoothing::Epsilon(eps) => eps / self.total[n].max(1) as f64,
                }
            };
            log_sum += p.ln();
        }
        if self.cand_len == 0 {
            return 0.0;
        }
        let bp = if self.cand_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        };
        bp * (log_sum / MAX_ORDER as f64).exp()
    }
}

fn candidate_stats<'a>(
    cand: &'a [String],
    max_ref: impl Fn(usize, &'a [String]) -> usize,
    ref_len: usize,
) -> Stats {
    let mut s = Stats {
        cand_len: cand.len(),
        ref_len,
        ..Stats::default()
    };
    for n in 1..=MAX_ORDER {
        let counts = ngram_counts(cand, n);
        s.total[n - 1] = cand.len().saturating_sub(n - 1);
        s.matched[n - 1] = counts.iter().map(|(g, &c)| c.min(max_ref(n, g))).sum();
    }
    s
}

fn max_reference_counts(references: &[Vec<String>]) -> Vec<Counts<'_>> {
    (1..=MAX_ORDER)
        .map(|n| {
            let mut best: Counts<'_> = HashMap::new();
            for r in references {
                for (g, c) in ngram_counts(r, n) {
                    let e = best.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            best
        })
        .collect()
}

/// BLEU-4 of `candidates` against the shared reference set `references`.
pub fn corpus_bleu4(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    smoothing: Smoothing,
) -> Result<f64, MetricsError> {
    bleu4(candidates, references, smoothing, BleuAveraging::Corpus)
}

pub fn bleu4(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    smoothing: Smoothing,
    averaging: BleuAveraging,
) -> Result<f64, MetricsError> {
    if candidates.is_empty() {
        return Err(MetricsError::Empty("candidate set"));
    }
    if references.is_empty() {
        return Err(MetricsError::Empty("reference set"));
    }
    let max_ref = max_reference_counts(references);
    let lookup = |n: usize, g: &[String]| max_ref[n - 1].get(g).copied().unwrap_or(0);
    let per_candidate = candidates.iter().map(|c| {
        let r = closest_length(c.len(), references.iter().map(Vec::len));
        candidate_stats(c, lookup, r)
    });
    Ok(match averaging {
        BleuAveraging::Corpus => {
            let mut total = Stats::default();
            for s in per_candidate {
                total.add(&s);
            }
            total.score(smoothing)
        }
        BleuAveraging::Sentence => {
            per_candidate.map(|s| s.score(smoothing)).sum::<f64>() / candidates.len() as f64
        }
    })
}

/// Best and runner-up count of an n-gram over the corpus, with the sentence
/// holding the best one, so "max over all sentences but i" is O(1).
#[derive(Debug, Clone, Copy)]
struct TopTwo {
    best: usize,
    owner: usize,
    second: usize,
}

/// Mean BLEU-4 of each sentence against all other sentences.
pub fn self_bleu4(corpus: &[Vec<String>], smoothing: Smoothing) -> Result<f64, MetricsError> {
    if corpus.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            what: "self-BLEU corpus",
            need: 2,
            got: corpus.len(),
        });
    }
    let mut tops: Vec<HashMap<&[String], TopTwo>> = vec![HashMap::new(); MAX_ORDER];
    for (i, sent) in corpus.iter().enumerate() {
        for n in 1..=MAX_ORDER {
            for (g, c) in ngram_counts(sent, n) {
                let t = tops[n - 1].entry(g).or_insert(TopTwo {
                    best: 0,
                    owner: usize::MAX,
                    second: 0,
                });
                if c > t.best {
                    t.second = t.best;
                    t.best = c;
                    t.owner = i;
                } else if c > t.second {
                    t.second = c;
                }
            }
        }
    }

    let mut sum = 0.0;
    for (i, sent) in corpus.iter().enumerate() {
        let lookup = |n: usize, g: &[String]| {
            tops[n - 1]
                .get(g)
                .map_or(0, |t| if t.owner == i { t.second } else { t.best })
        };
        let others = corpus
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.len());
        let r = closest_length(sent.len(), others);
        sum += candidate_stats(sent, lookup, r).score(smoothing);
    }
    Ok(sum / corpus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| toks(l)).collect()
    }

    #[test]
    fn perfect_match_is_one() {
        let c = corpus(&["the cat sat on the mat"]);
        let s = corpus_bleu4(&c, &c, Smoothing::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_vocabulary_hits_the_floor() {
        let c = corpus(&["a b c d e"]);
        let r = corpus(&["v w x y z"]);
        let s = corpus_bleu4(&c, &r, Smoothing::Epsilon(1e-9)).unwrap();
        assert!(s <= 1e-9, "{s}");
        assert_eq!(corpus_bleu4(&c, &r, Smoothing::None).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_uses_closest_reference() {
        // candidate of 4 tokens, references of 6 and 9 tokens -> r = 6
        let c = corpus(&["a b c d"]);
        let r = corpus(&["a b c d e f", "a b c d e f g h i"]);
        let s = corpus_bleu4(&c, &r, Smoothing::None).unwrap();
        assert!((s - (1.0f64 - 6.0 / 4.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let c = corpus(&["a b c d e", "x a b c y", "b c d e f g"]);
        let r = corpus(&["a b c d e f", "x y a b c"]);
        let mut rev = c.clone();
        rev.reverse();
        let a = corpus_bleu4(&c, &r, Smoothing::default()).unwrap();
        let b = corpus_bleu4(&rev, &r, Smoothing::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_corpus_self_bleu_is_one() {
        let c = corpus(&["play the new song now"; 5]);
        assert!((self_bleu4(&c, Smoothing::default()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_bleu_matches_leave_one_out_composition() {
        let c = corpus(&[
            "play the new song by muse",
            "play a song by the beatles now",
            "add this song to my playlist",
            "play the song on spotify",
        ]);
        let direct: f64 = (0..c.len())
            .map(|i| {
                let others: Vec<Vec<String>> =
                    c.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s.clone()).collect();
                corpus_bleu4(&c[i..=i], &others, Smoothing::default()).unwrap()
            })
            .sum::<f64>()
            / c.len() as f64;
        let fast = self_bleu4(&c, Smoothing::default()).unwrap();
        assert!((fast - direct).abs() < 1e-12, "{fast} vs {direct}");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            corpus_bleu4(&[], &corpus(&["a"]), Smoothing::default()),
            Err(MetricsError::Empty(_))
        ));
        assert!(matches!(
            self_bleu4(&corpus(&["a b c d"]), Smoothing::default()),
            Err(MetricsError::TooFewSamples { .. })
        ));
    }
}
