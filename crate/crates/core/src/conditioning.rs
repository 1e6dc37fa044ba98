//! Generator conditioning inputs.
//!
//! Four prompt kinds are supported: a bare intent header, and augmented
//! sentences with random words, one random span, or several random spans
//! replaced by a sentinel. Masks only ever touch utterance tokens; the
//! intent header, slot-type words and span markers are always kept.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::codec::{
    encode, AugmentedSentence, CodecError, DecodeError, LabeledExample, SlotSchema, Surface,
};
use crate::seed::{self, derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningMode {
    Intent,
    Words,
    Span,
    MultiSpans,
}

impl ConditioningMode {
    pub fn is_masked(self) -> bool {
        !matches!(self, ConditioningMode::Intent)
    }
}

impl std::str::FromStr for ConditioningMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intent" => Ok(ConditioningMode::Intent),
            "words" => Ok(ConditioningMode::Words),
            "span" => Ok(ConditioningMode::Span),
            "multi_spans" => Ok(ConditioningMode::MultiSpans),
            other => Err(format!(
                "unknown conditioning mode `{other}` (expected intent, words, span or multi_spans)"
            )),
        }
    }
}

/// One generator prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningInput {
    pub mode: ConditioningMode,
    pub text: String,
    pub source_index: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskPolicy {
    pub word_mask_rate: f64,
    pub span_len_min: usize,
    pub span_len_max: usize,
    pub num_spans_min: usize,
    pub num_spans_max: usize,
    pub sentinel: String,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy {
            word_mask_rate: 0.15,
            span_len_min: 1,
            span_len_max: 5,
            num_spans_min: 2,
            num_spans_max: 4,
            sentinel: "<mask>".to_owned(),
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<(), ConditioningError> {
        let bad = |m: &str| Err(ConditioningError::InvalidPolicy(m.to_owned()));
        if !(self.word_mask_rate > 0.0 && self.word_mask_rate <= 1.0) {
            return bad("word_mask_rate must lie in (0, 1]");
        }
        if self.span_len_min == 0 || self.span_len_min > self.span_len_max {
            return bad("span lengths need 1 <= span_len_min <= span_len_max");
        }
        if self.num_spans_min == 0 || self.num_spans_min > self.num_spans_max {
            return bad("span counts need 1 <= num_spans_min <= num_spans_max");
        }
        let s = &self.sentinel;
        if s.is_empty()
            || s.chars().any(char::is_whitespace)
            || s.contains(['[', ']', ':', ';'])
            || s.starts_with('\\')
        {
            return bad("sentinel must be a single token free of markers and escapes");
        }
        Ok(())
    }

    /// The sentinel may not collide with any corpus token.
    pub fn check_corpus<'a, I>(&self, examples: I) -> Result<(), ConditioningError>
    where
        I: IntoIterator<Item = &'a LabeledExample>,
    {
        for ex in examples {
            if ex.tokens.contains(&self.sentinel) {
                return Err(ConditioningError::SentinelInCorpus(self.sentinel.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConditioningError {
    #[error("empty intent label")]
    EmptyLabel,
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("invalid mask policy: {0}")]
    InvalidPolicy(String),
    #[error("sentinel `{0}` occurs as a corpus token")]
    SentinelInCorpus(String),
    #[error("augmented sentence has no utterance tokens to mask")]
    NoMaskablePositions,
    #[error("intent `{0}` has no examples to mask")]
    NoExamplesForIntent(String),
    #[error("augmented sentence does not parse: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("prompt file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `intent : <intent> ;` for a normalized intent name.
pub fn intent_condition(intent: &str, schema: &SlotSchema) -> Result<ConditioningInput, ConditioningError> {
    if intent.trim().is_empty() {
        return Err(ConditioningError::EmptyLabel);
    }
    if !schema.normalized_intents().iter().any(|i| i == intent) {
        return Err(ConditioningError::UnknownIntent(intent.to_owned()));
    }
    Ok(ConditioningInput {
        mode: ConditioningMode::Intent,
        text: format!("intent : {intent} ;"),
        source_index: None,
        seed: 0,
    })
}

/// Draw `count` intent prompts with intents uniform over the schema.
pub fn sample_intent_conditions(schema: &SlotSchema, count: usize, rng_seed: u64) -> Vec<ConditioningInput> {
    let mut rng = seed::rng(rng_seed);
    let intents = schema.normalized_intents();
    (0..count)
        .map(|_| {
            let intent = &intents[rng.random_range(0..intents.len())];
            ConditioningInput {
                mode: ConditioningMode::Intent,
                text: format!("intent : {intent} ;"),
                source_index: None,
                seed: rng_seed,
            }
        })
        .collect()
}

fn parse_masked(aug: &AugmentedSentence) -> Result<Surface<'_>, ConditioningError> {
    match Surface::parse(&aug.text) {
        Ok(s) => Ok(s),
        Err(DecodeError::EmptyUtterance) => Err(ConditioningError::NoMaskablePositions),
        Err(e) => Err(e.into()),
    }
}

/// Independent Bernoulli(rate) mask over `n` positions, conditioned on at
/// least one position being masked.
///
/// The first masked index is drawn from its exact conditional law, the rest
/// independently, which matches resampling until a mask appears without an
/// unbounded loop for tiny rates.
fn conditional_bernoulli_mask(n: usize, rate: f64, rng: &mut Rng) -> Vec<bool> {
    debug_assert!(n > 0);
    if rate >= 1.0 {
        return vec![true; n];
    }
    let log_keep = (-rate).ln_1p();
    let hit_by = |k: usize| -(k as f64 * log_keep).exp_m1(); // 1 - (1-rate)^k
    let u = rng.random::<f64>() * hit_by(n);
    let first = (0..n).find(|&j| hit_by(j + 1) >= u).unwrap_or(n - 1);

    let mut mask = vec![false; n];
    mask[first] = true;
    for m in mask.iter_mut().skip(first + 1) {
        *m = rng.random::<f64>() < rate;
    }
    mask
}

/// Replace each utterance token by the sentinel with probability
/// `word_mask_rate`, masking at least one.
pub fn mask_words(
    aug: &AugmentedSentence,
    policy: &MaskPolicy,
    rng_seed: u64,
) -> Result<ConditioningInput, ConditioningError> {
    policy.validate()?;
    let surface = parse_masked(aug)?;
    let positions = surface.utterance_positions();
    let mut rng = seed::rng(rng_seed);
    let mask = conditional_bernoulli_mask(positions.len(), policy.word_mask_rate, &mut rng);

    let mut toks: Vec<&str> = surface.toks.clone();
    for (&pos, &hit) in positions.iter().zip(&mask) {
        if hit {
            toks[pos] = &policy.sentinel;
        }
    }
    Ok(ConditioningInput {
        mode: ConditioningMode::Words,
        text: toks.join(" "),
        source_index: None,
        seed: rng_seed,
    })
}

/// Maximal runs of utterance positions that are adjacent in the surface
/// token list, i.e. not separated by any marker or label word.
fn segments(positions: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=positions.len() {
        if i == positions.len() || positions[i] != positions[i - 1] + 1 {
            out.push(positions[start]..positions[i - 1] + 1);
            start = i;
        }
    }
    out
}

/// Span placement over segments. Spans never overlap and never touch.
struct SpanPlacer {
    // per segment, whether each position is still free for a new span
    free: Vec<Vec<bool>>,
    offsets: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct FreeRun {
    seg: usize,
    start: usize,
    len: usize,
}

fn span_capacity(len: usize) -> usize {
    len.div_ceil(2)
}

impl SpanPlacer {
    fn new(segs: &[std::ops::Range<usize>]) -> Self {
        SpanPlacer {
            free: segs.iter().map(|r| vec![true; r.len()]).collect(),
            offsets: segs.iter().map(|r| r.start).collect(),
        }
    }

    fn runs(&self) -> Vec<FreeRun> {
        let mut out = Vec::new();
        for (seg, free) in self.free.iter().enumerate() {
            let mut i = 0;
            while i < free.len() {
                if free[i] {
                    let start = i;
                    while i < free.len() && free[i] {
                        i += 1;
                    }
                    out.push(FreeRun { seg, start, len: i - start });
                } else {
                    i += 1;
                }
            }
        }
        out
    }

    /// Largest number of single-token spans that still fit.
    fn capacity(&self) -> usize {
        self.runs().iter().map(|r| span_capacity(r.len)).sum()
    }

    /// Place one span of (up to) `desired` tokens, keeping room for
    /// `remaining_after` further spans. Returns the surface token range.
    fn place(&mut self, desired: usize, remaining_after: usize, rng: &mut Rng) -> Option<std::ops::Range<usize>> {
        let runs = self.runs();
        let longest = runs.iter().map(|r| r.len).max()?;
        let total = runs.iter().map(|r| span_capacity(r.len)).sum::<usize>();

        for len in (1..=desired.min(longest)).rev() {
            let mut cands: Vec<(usize, usize)> = Vec::new();
            for r in &runs {
                if r.len < len {
                    continue;
                }
                for s in r.start..=r.start + r.len - len {
                    let left = (s - r.start).saturating_sub(1);
                    let right = (r.start + r.len).saturating_sub(s + len + 1);
                    let after = total - span_capacity(r.len) + span_capacity(left) + span_capacity(right);
                    if after >= remaining_after {
                        cands.push((r.seg, s));
                    }
                }
            }
            if cands.is_empty() {
                continue;
            }
            let (seg, s) = cands[rng.random_range(0..cands.len())];
            let free = &mut self.free[seg];
            let lo = s.saturating_sub(1);
            let hi = (s + len + 1).min(free.len());
            for f in &mut free[lo..hi] {
                *f = false;
            }
            let off = self.offsets[seg];
            return Some(off + s..off + s + len);
        }
        None
    }
}

fn render_spans(toks: &[&str], spans: &mut [std::ops::Range<usize>], sentinel: &str) -> String {
    spans.sort_by_key(|r| r.start);
    let mut out: Vec<&str> = Vec::with_capacity(toks.len());
    let mut next = spans.iter().peekable();
    let mut i = 0;
    while i < toks.len() {
        match next.peek() {
            Some(r) if r.start == i => {
                out.push(sentinel);
                i = r.end;
                next.next();
            }
            _ => {
                out.push(toks[i]);
                i += 1;
            }
        }
    }
    out.join(" ")
}

fn mask_spans_with(
    aug: &AugmentedSentence,
    policy: &MaskPolicy,
    rng_seed: u64,
    draw_count: bool,
) -> Result<String, ConditioningError> {
    policy.validate()?;
    let surface = parse_masked(aug)?;
    let positions = surface.utterance_positions();
    let segs = segments(&positions);
    let mut placer = SpanPlacer::new(&segs);
    let mut rng = seed::rng(rng_seed);

    let requested = if !draw_count {
        1
    } else if policy.num_spans_min == policy.num_spans_max {
        policy.num_spans_min
    } else {
        rng.random_range(policy.num_spans_min..=policy.num_spans_max)
    };
    let k = requested.min(placer.capacity()).max(1);

    let mut spans = Vec::with_capacity(k);
    for i in 0..k {
        let desired = if policy.span_len_min == policy.span_len_max {
            policy.span_len_min
        } else {
            rng.random_range(policy.span_len_min..=policy.span_len_max)
        };
        let span = placer
            .place(desired, k - i - 1, &mut rng)
            .expect("capacity bound guarantees a feasible placement");
        spans.push(span);
    }
    Ok(render_spans(&surface.toks, &mut spans, &policy.sentinel))
}

/// Replace one random run of utterance tokens by a single sentinel.
///
/// The run length is uniform in `[span_len_min, span_len_max]`, clipped to
/// the longest marker-free segment, and the start is uniform over every
/// position where a run of that length fits.
pub fn mask_span(
    aug: &AugmentedSentence,
    policy: &MaskPolicy,
    rng_seed: u64,
) -> Result<ConditioningInput, ConditioningError> {
    Ok(ConditioningInput {
        mode: ConditioningMode::Span,
        text: mask_spans_with(aug, policy, rng_seed, false)?,
        source_index: None,
        seed: rng_seed,
    })
}

/// Replace `k ~ U[num_spans_min, num_spans_max]` non-overlapping,
/// non-adjacent runs by one sentinel each. When fewer spans fit, `k` drops
/// to the largest feasible count.
pub fn mask_multi_spans(
    aug: &AugmentedSentence,
    policy: &MaskPolicy,
    rng_seed: u64,
) -> Result<ConditioningInput, ConditioningError> {
    Ok(ConditioningInput {
        mode: ConditioningMode::MultiSpans,
        text: mask_spans_with(aug, policy, rng_seed, true)?,
        source_index: None,
        seed: rng_seed,
    })
}

pub fn mask(
    mode: ConditioningMode,
    aug: &AugmentedSentence,
    policy: &MaskPolicy,
    rng_seed: u64,
) -> Result<ConditioningInput, ConditioningError> {
    match mode {
        ConditioningMode::Words => mask_words(aug, policy, rng_seed),
        ConditioningMode::Span => mask_span(aug, policy, rng_seed),
        ConditioningMode::MultiSpans => mask_multi_spans(aug, policy, rng_seed),
        ConditioningMode::Intent => unreachable!("intent mode has no mask"),
    }
}

/// Build `count_per_intent` prompts for every schema intent.
///
/// Masked modes sample source examples uniformly with replacement within
/// each intent; each prompt gets its own seed derived from `(rng_seed, i)`.
pub fn build_requests(
    corpus: &[LabeledExample],
    schema: &SlotSchema,
    mode: ConditioningMode,
    count_per_intent: usize,
    policy: &MaskPolicy,
    rng_seed: u64,
) -> Result<Vec<ConditioningInput>, ConditioningError> {
    let mut out = Vec::with_capacity(count_per_intent * schema.intents().len());
    if !mode.is_masked() {
        for intent in schema.normalized_intents() {
            let mut prompt = intent_condition(intent, schema)?;
            prompt.seed = rng_seed;
            out.extend(std::iter::repeat_n(prompt, count_per_intent));
        }
        return Ok(out);
    }

    policy.validate()?;
    policy.check_corpus(corpus)?;
    let mut by_intent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in corpus.iter().enumerate() {
        let idx = schema
            .intent_index(&ex.intent)
            .ok_or_else(|| CodecError::UnknownIntent(ex.intent.clone()))?;
        by_intent.entry(idx).or_default().push(i);
    }
    if count_per_intent == 0 {
        return Ok(out);
    }

    let mut encoded: Vec<Option<AugmentedSentence>> = vec![None; corpus.len()];
    let mut pick = seed::rng(rng_seed);
    for (intent_idx, intent) in schema.intents().iter().enumerate() {
        let members = by_intent
            .get(&intent_idx)
            .ok_or_else(|| ConditioningError::NoExamplesForIntent(intent.clone()))?;
        for _ in 0..count_per_intent {
            let src = members[pick.random_range(0..members.len())];
            if encoded[src].is_none() {
                encoded[src] = Some(encode(&corpus[src], schema)?);
            }
            let aug = encoded[src].as_ref().expect("just encoded");
            let prompt_seed = derive_seed(rng_seed, out.len() as u64);
            let mut prompt = mask(mode, aug, policy, prompt_seed)?;
            prompt.source_index = Some(src);
            out.push(prompt);
        }
    }
    Ok(out)
}

pub fn write_prompts<W: Write>(mut writer: W, prompts: &[ConditioningInput]) -> Result<(), ConditioningError> {
    for p in prompts {
        serde_json::to_writer(&mut writer, p).map_err(std::io::Error::from)?;
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_prompts<R: BufRead>(reader: R) -> Result<Vec<ConditioningInput>, ConditioningError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ConditioningError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
