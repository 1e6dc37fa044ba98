//! Decode raw generator output and drop what does not decode.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::codec::{decode_str, LabeledExample, SlotSchema};

pub const DUPLICATE_OF_TRAINING: &str = "duplicate_of_training";
pub const EXACT_DUPLICATE: &str = "exact_duplicate";

#[derive(Debug, Clone, Default)]
pub struct FilterOptions<'a> {
    /// Reject generations identical to one of these training examples.
    pub training: Option<&'a [LabeledExample]>,
    /// Reject generations identical to an earlier accepted generation.
    pub dedup_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub accepted: Vec<LabeledExample>,
    pub rejected_counts: BTreeMap<String, usize>,
    pub total: usize,
}

/// The JSON audit written next to the accepted corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejected_counts: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn rejected(&self) -> usize {
        self.rejected_counts.values().sum()
    }

    pub fn summary(&self) -> FilterSummary {
        FilterSummary {
            total: self.total,
            accepted: self.accepted.len(),
            rejected: self.rejected(),
            rejected_counts: self.rejected_counts.clone(),
        }
    }
}

/// Decode every line against `schema`, keeping valid generations in input
/// order and counting rejections by reason.
pub fn filter_generations<S: AsRef<str>>(
    lines: &[S],
    schema: &SlotSchema,
    options: &FilterOptions<'_>,
) -> FilterReport {
    let training: HashSet<&LabeledExample> = options.training.unwrap_or(&[]).iter().collect();
    let mut seen: HashSet<LabeledExample> = HashSet::new();
    let mut accepted = Vec::new();
    let mut rejected_counts: BTreeMap<String, usize> = BTreeMap::new();

    for line in lines {
        let reason = match decode_str(line.as_ref(), schema) {
            Err(e) => Some(e.code()),
            Ok(ex) => {
                if training.contains(&ex) {
                    Some(DUPLICATE_OF_TRAINING)
                } else if options.dedup_exact && !seen.insert(ex.clone()) {
                    Some(EXACT_DUPLICATE)
                } else {
                    accepted.push(ex);
                    None
                }
            }
        };
        if let Some(code) = reason {
            *rejected_counts.entry(code.to_owned()).or_default() += 1;
        }
    }

    FilterReport {
        accepted,
        rejected_counts,
        total: lines.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode;

    fn schema() -> SlotSchema {
        SlotSchema::new(
            vec!["artist".into(), "service".into()],
            vec!["PlayMusic".into()],
        )
        .unwrap()
    }

    #[test]
    fn valid_and_malformed_lines() {
        let r = filter_generations(
            &["intent : play music ; play [ muse : artist ]"],
            &schema(),
            &FilterOptions::default(),
        );
        assert_eq!(r.accepted.len(), 1);
        assert!(r.rejected_counts.is_empty());

        let r = filter_generations(
            &["intent : play music ; play [ muse artist ]"],
            &schema(),
            &FilterOptions::default(),
        );
        assert!(r.accepted.is_empty());
        assert_eq!(r.rejected_counts, BTreeMap::from([("malformed_span".to_owned(), 1)]));
        assert_eq!(r.total, 1);
    }

    #[test]
    fn dedup_flags() {
        let train = vec![LabeledExample::new(["play", "muse"], ["O", "B-artist"], "PlayMusic")];
        let line = encode(&train[0], &schema()).unwrap().text;
        let other = "intent : play music ; play [ spotify : service ]".to_owned();
        let lines = vec![line.clone(), other.clone(), other.clone(), line];

        let off = filter_generations(&lines, &schema(), &FilterOptions::default());
        assert_eq!(off.accepted.len(), 4);

        let on = filter_generations(
            &lines,
            &schema(),
            &FilterOptions {
                training: Some(&train),
                dedup_exact: true,
            },
        );
        assert_eq!(on.accepted.len(), 1);
        assert_eq!(on.rejected_counts[DUPLICATE_OF_TRAINING], 2);
        assert_eq!(on.rejected_counts[EXACT_DUPLICATE], 1);
        assert_eq!(on.accepted.len() + on.rejected(), on.total);
    }

    #[test]
    fn refiltering_accepted_rejects_nothing() {
        let lines = [
            "intent : play music ; play [ muse : artist ]",
            "garbage",
            "intent : play music ; \\[odd] [ x y : service ]",
        ];
        let r = filter_generations(&lines, &schema(), &FilterOptions::default());
        let again: Vec<String> = r
            .accepted
            .iter()
            .map(|e| encode(e, &schema()).unwrap().text)
            .collect();
        let r2 = filter_generations(&again, &schema(), &FilterOptions::default());
        assert_eq!(r2.accepted, r.accepted);
        assert!(r2.rejected_counts.is_empty());
    }

    #[test]
    fn summary_json() {
        let r = filter_generations(&["x", "y"], &schema(), &FilterOptions::default());
        let json = serde_json::to_string(&r.summary()).unwrap();
        assert_eq!(
            json,
            r#"{"total":2,"accepted":0,"rejected":2,"rejected_counts":{"missing_intent_header":2}}"#
        );
    }
}
