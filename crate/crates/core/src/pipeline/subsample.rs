use std::collections::BTreeMap;

use rand::seq::index::sample;

use super::PipelineError;
use crate::codec::LabeledExample;

/// Number of examples kept from an intent with `n` examples.
pub fn per_intent_quota(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n)
}

/// Keep `max(1, round(ratio · n))` examples of every intent, drawn uniformly
/// without replacement. The result keeps the corpus order.
pub fn subsample_per_intent(
    corpus: &[LabeledExample],
    ratio: f64,
    rng_seed: u64,
) -> Result<Vec<LabeledExample>, PipelineError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(PipelineError::InvalidConfig(format!(
            "sampling ratio must lie in (0, 1], got {ratio}"
        )));
    }
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let mut by_intent: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ex) in corpus.iter().enumerate() {
        by_intent.entry(ex.intent.as_str()).or_default().push(i);
    }
    let mut rng = crate::seed::rng(rng_seed);
    let mut keep = Vec::new();
    for members in by_intent.values() {
        let quota = per_intent_quota(members.len(), ratio);
        keep.extend(sample(&mut rng, members.len(), quota).into_iter().map(|j| members[j]));
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| corpus[i].clone()).collect())
}
