//! The augmented-language string format.
//!
//! ```text
//! intent : play music ; play [ muse : artist ] on [ spotify : service ]
//! ```
//!
//! The string is whitespace tokenized. The header `intent : <words> ;`
//! carries the normalized intent, each slot span is written as
//! `[ <tokens> : <normalized slot type> ]`, and every other token is a plain
//! utterance token. Utterance tokens that contain one of `[ ] : ;` or start
//! with `\` are written with one extra leading `\`.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{CodecError, LabeledExample, SlotSchema, Tag};

pub const INTENT_KEYWORD: &str = "intent";
pub const OPEN: &str = "[";
pub const CLOSE: &str = "]";
pub const COLON: &str = ":";
pub const SEMI: &str = ";";
pub const ESCAPE: char = '\\';

const RESERVED: [char; 4] = ['[', ']', ':', ';'];

/// A single string in the augmented format.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AugmentedSentence {
    pub text: String,
}

impl AugmentedSentence {
    pub fn new(text: impl Into<String>) -> Self {
        AugmentedSentence { text: text.into() }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for AugmentedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Why a string failed to decode. Each variant has a stable [`code`](Self::code).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("missing or unterminated intent header")]
    MissingIntentHeader,
    #[error("intent header repeated at token {0}")]
    DuplicateIntentHeader(usize),
    #[error("unbalanced span markers at token {0}")]
    UnbalancedMarkers(usize),
    #[error("malformed span at token {0}")]
    MalformedSpan(usize),
    #[error("span without utterance tokens at token {0}")]
    EmptySpan(usize),
    #[error("lone escape character at token {0}")]
    InvalidEscape(usize),
    #[error("no utterance tokens")]
    EmptyUtterance,
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("unknown slot type `{0}`")]
    UnknownSlotType(String),
}

impl DecodeError {
    /// Machine-readable rejection reason.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::MissingIntentHeader => "missing_intent_header",
            DecodeError::DuplicateIntentHeader(_) => "duplicate_intent_header",
            DecodeError::UnbalancedMarkers(_) => "unbalanced_markers",
            DecodeError::MalformedSpan(_) => "malformed_span",
            DecodeError::EmptySpan(_) => "empty_span",
            DecodeError::InvalidEscape(_) => "invalid_escape",
            DecodeError::EmptyUtterance => "empty_utterance",
            DecodeError::UnknownIntent(_) => "unknown_intent",
            DecodeError::UnknownSlotType(_) => "unknown_slot_type",
        }
    }

    /// Every code [`code`](Self::code) can return.
    pub const ALL_CODES: [&'static str; 9] = [
        "missing_intent_header",
        "duplicate_intent_header",
        "unbalanced_markers",
        "malformed_span",
        "empty_span",
        "invalid_escape",
        "empty_utterance",
        "unknown_intent",
        "unknown_slot_type",
    ];
}

/// One body element of a structurally valid augmented sentence, as indices
/// into the whitespace token list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Item {
    Word(usize),
    Span {
        tokens: Range<usize>,
        label: Range<usize>,
    },
}

/// Structural parse of an augmented sentence (no schema lookups).
#[derive(Debug, Clone)]
pub(crate) struct Surface<'a> {
    pub toks: Vec<&'a str>,
    pub intent: Range<usize>,
    pub items: Vec<Item>,
}

impl<'a> Surface<'a> {
    pub fn parse(text: &'a str) -> Result<Self, DecodeError> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() < 2 || toks[0] != INTENT_KEYWORD || toks[1] != COLON {
            return Err(DecodeError::MissingIntentHeader);
        }
        let semi = toks
            .iter()
            .position(|&t| t == SEMI)
            .ok_or(DecodeError::MissingIntentHeader)?;
        let intent = 2..semi;
        if intent.is_empty() || toks[intent.clone()].iter().any(|t| is_marker(t)) {
            return Err(DecodeError::MissingIntentHeader);
        }

        let mut items = Vec::new();
        // (open index, colon index)
        let mut open: Option<(usize, Option<usize>)> = None;
        let mut utterance_len = 0usize;
        for i in semi + 1..toks.len() {
            let t = toks[i];
            match t {
                OPEN => {
                    if open.is_some() {
                        return Err(DecodeError::UnbalancedMarkers(i));
                    }
                    open = Some((i, None));
                }
                CLOSE => {
                    let (start, colon) = open.take().ok_or(DecodeError::UnbalancedMarkers(i))?;
                    let colon = colon.ok_or(DecodeError::MalformedSpan(start))?;
                    if colon + 1 == i {
                        return Err(DecodeError::MalformedSpan(start));
                    }
                    if start + 1 == colon {
                        return Err(DecodeError::EmptySpan(start));
                    }
                    utterance_len += colon - start - 1;
                    items.push(Item::Span {
                        tokens: start + 1..colon,
                        label: colon + 1..i,
                    });
                }
                COLON => match open.as_mut() {
                    Some((start, colon)) => {
                        if colon.is_some() {
                            return Err(DecodeError::MalformedSpan(*start));
                        }
                        *colon = Some(i);
                    }
                    None => {
                        if i > semi + 1 && toks[i - 1] == INTENT_KEYWORD {
                            return Err(DecodeError::DuplicateIntentHeader(i - 1));
                        }
                        return Err(DecodeError::MalformedSpan(i));
                    }
                },
                SEMI => match open {
                    Some((start, _)) => return Err(DecodeError::MalformedSpan(start)),
                    None => return Err(DecodeError::DuplicateIntentHeader(i)),
                },
                _ => {
                    let in_label = matches!(open, Some((_, Some(_))));
                    if !in_label && t.len() == ESCAPE.len_utf8() && t.starts_with(ESCAPE) {
                        return Err(DecodeError::InvalidEscape(i));
                    }
                    if open.is_none() {
                        utterance_len += 1;
                        items.push(Item::Word(i));
                    }
                }
            }
        }
        if let Some((start, _)) = open {
            return Err(DecodeError::UnbalancedMarkers(start));
        }
        if utterance_len == 0 {
            return Err(DecodeError::EmptyUtterance);
        }
        Ok(Surface {
            toks,
            intent,
            items,
        })
    }

    /// Indices of utterance tokens (the only positions a mask may touch).
    pub fn utterance_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                Item::Word(i) => out.push(*i),
                Item::Span { tokens, .. } => out.extend(tokens.clone()),
            }
        }
        out
    }
}

fn is_marker(t: &str) -> bool {
    matches!(t, OPEN | CLOSE | COLON | SEMI)
}

fn escape_token(token: &str, out: &mut String) {
    if token.starts_with(ESCAPE) || token.contains(RESERVED) {
        out.push(ESCAPE);
    }
    out.push_str(token);
}

fn unescape_token(token: &str) -> &str {
    token.strip_prefix(ESCAPE).unwrap_or(token)
}

/// Serialize a labeled example into the augmented format.
pub fn encode(example: &LabeledExample, schema: &SlotSchema) -> Result<AugmentedSentence, CodecError> {
    example.validate(schema)?;
    let intent = schema
        .normalized_intent(&example.intent)
        .ok_or_else(|| CodecError::UnknownIntent(example.intent.clone()))?;

    let mut out = String::with_capacity(16 + example.tokens.iter().map(|t| t.len() + 1).sum::<usize>());
    out.push_str(INTENT_KEYWORD);
    out.push_str(" : ");
    out.push_str(intent);
    out.push_str(" ;");

    let mut open: Option<&str> = None;
    let close = |out: &mut String, ty: &str| {
        out.push_str(" : ");
        // validated above, the lookup cannot fail
        out.push_str(schema.normalized_slot(ty).unwrap_or(ty));
        out.push_str(" ]");
    };
    for (token, tag) in example.tokens.iter().zip(&example.tags) {
        let tag = Tag::parse(tag).expect("validated");
        match tag {
            Tag::Inside(_) => {}
            Tag::Outside | Tag::Begin(_) => {
                if let Some(ty) = open.take() {
                    close(&mut out, ty);
                }
                if let Tag::Begin(ty) = tag {
                    out.push_str(" [");
                    open = Some(ty);
                }
            }
        }
        out.push(' ');
        escape_token(token, &mut out);
    }
    if let Some(ty) = open {
        close(&mut out, ty);
    }
    Ok(AugmentedSentence { text: out })
}

/// Parse an augmented-format string back into a labeled example.
///
/// Accepts any input; every failure is a typed [`DecodeError`].
pub fn decode(aug: &AugmentedSentence, schema: &SlotSchema) -> Result<LabeledExample, DecodeError> {
    decode_str(&aug.text, schema)
}

pub fn decode_str(text: &str, schema: &SlotSchema) -> Result<LabeledExample, DecodeError> {
    let surface = Surface::parse(text)?;
    let toks = &surface.toks;

    let intent_words = toks[surface.intent.clone()].join(" ");
    let intent = schema
        .raw_intent(&intent_words)
        .ok_or(DecodeError::UnknownIntent(intent_words))?;

    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for item in &surface.items {
        match item {
            Item::Word(i) => {
                tokens.push(unescape_token(toks[*i]).to_owned());
                tags.push("O".to_owned());
            }
            Item::Span { tokens: span, label } => {
                let label_words = toks[label.clone()].join(" ");
                let ty = schema
                    .raw_slot(&label_words)
                    .ok_or(DecodeError::UnknownSlotType(label_words))?;
                for (k, i) in span.clone().enumerate() {
                    tokens.push(unescape_token(toks[i]).to_owned());
                    tags.push(if k == 0 { format!("B-{ty}") } else { format!("I-{ty}") });
                }
            }
        }
    }
    Ok(LabeledExample {
        tokens,
        tags,
        intent: intent.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> SlotSchema {
        SlotSchema::new(
            vec![
                "artist".into(),
                "service".into(),
                "object type".into(),
                "rating".into(),
            ],
            vec!["PlayMusic".into(), "greeting".into(), "RateBook".into()],
        )
        .unwrap()
    }

    #[test]
    fn encodes_spans_and_header() {
        let ex = LabeledExample::new(
            ["play", "muse", "on", "spotify"],
            ["O", "B-artist", "O", "B-service"],
            "PlayMusic",
        );
        let aug = encode(&ex, &schema()).unwrap();
        assert_eq!(
            aug.text,
            "intent : play music ; play [ muse : artist ] on [ spotify : service ]"
        );
        assert_eq!(decode(&aug, &schema()).unwrap(), ex);
    }

    #[test]
    fn no_slot_case() {
        let ex = LabeledExample::new(["hello"], ["O"], "greeting");
        assert_eq!(encode(&ex, &schema()).unwrap().text, "intent : greeting ; hello");
    }

    #[test]
    fn multi_token_span_and_adjacent_spans() {
        let ex = LabeledExample::new(
            ["rate", "this", "book", "5", "stars"],
            ["O", "B-object type", "I-object type", "B-rating", "O"],
            "RateBook",
        );
        let aug = encode(&ex, &schema()).unwrap();
        assert_eq!(
            aug.text,
            "intent : rate book ; rate [ this book : object type ] [ 5 : rating ] stars"
        );
        assert_eq!(decode(&aug, &schema()).unwrap(), ex);

        let ex = LabeledExample::new(["a", "b"], ["B-artist", "B-artist"], "PlayMusic");
        let aug = encode(&ex, &schema()).unwrap();
        assert_eq!(aug.text, "intent : play music ; [ a : artist ] [ b : artist ]");
        assert_eq!(decode(&aug, &schema()).unwrap(), ex);
    }

    #[test]
    fn reserved_tokens_are_escaped() {
        let ex = LabeledExample::new(
            [":", "[x]", "\\", "\\:", "a;b", "ok"],
            ["O", "B-artist", "I-artist", "O", "O", "O"],
            "PlayMusic",
        );
        let aug = encode(&ex, &schema()).unwrap();
        assert_eq!(
            aug.text,
            "intent : play music ; \\: [ \\[x] \\\\ : artist ] \\\\: \\a;b ok"
        );
        assert_eq!(decode(&aug, &schema()).unwrap(), ex);
    }

    #[test]
    fn encode_rejects_bad_bio() {
        let ex = LabeledExample::new(["a", "b"], ["O", "I-artist"], "PlayMusic");
        assert!(matches!(
            encode(&ex, &schema()),
            Err(CodecError::OrphanInside { index: 1, .. })
        ));
    }

    #[test]
    fn decode_error_codes() {
        let s = schema();
        let code = |t: &str| decode_str(t, &s).unwrap_err().code();
        assert_eq!(code("intent : play music ; play [ muse artist ]"), "malformed_span");
        assert_eq!(code("intent : fly me ; book [ paris : artist ]"), "unknown_intent");
        assert_eq!(code("intent : play music ; [ x : city ]"), "unknown_slot_type");
        assert_eq!(code("play music"), "missing_intent_header");
        assert_eq!(code(""), "missing_intent_header");
        assert_eq!(code("intent : play music play"), "missing_intent_header");
        assert_eq!(code("intent : ; play"), "missing_intent_header");
        assert_eq!(code("intent : play music ; a intent : greeting ; b"), "duplicate_intent_header");
        assert_eq!(code("intent : play music ; a ; b"), "duplicate_intent_header");
        assert_eq!(code("intent : play music ; a ] b"), "unbalanced_markers");
        assert_eq!(code("intent : play music ; [ a [ b : artist ]"), "unbalanced_markers");
        assert_eq!(code("intent : play music ; [ a : artist"), "unbalanced_markers");
        assert_eq!(code("intent : play music ; [ : artist ]"), "empty_span");
        assert_eq!(code("intent : play music ; [ a : ]"), "malformed_span");
        assert_eq!(code("intent : play music ; [ a : b : artist ]"), "malformed_span");
        assert_eq!(code("intent : play music ; a : b"), "malformed_span");
        assert_eq!(code("intent : play music ;"), "empty_utterance");
        assert_eq!(code("intent : play music ; \\ x"), "invalid_escape");
        for t in ["", "x", "intent : play music ; ["] {
            assert!(DecodeError::ALL_CODES.contains(&code(t)));
        }
    }

    #[test]
    fn decode_tolerates_extra_whitespace() {
        let ex = decode_str(
            "  intent :  play   music ;\tplay [ muse :\nartist ]  ",
            &schema(),
        )
        .unwrap();
        assert_eq!(ex.tokens, ["play", "muse"]);
        assert_eq!(ex.tags, ["O", "B-artist"]);
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = decode_str(&text, &schema());
        }

        #[test]
        fn decode_never_panics_on_grammar_soup(
            parts in proptest::collection::vec(
                prop_oneof![
                    Just("intent"), Just(":"), Just(";"), Just("["), Just("]"),
                    Just("\\"), Just("artist"), Just("play"), Just("music"), Just("\\:"),
                ],
                0..20,
            )
        ) {
            let text = parts.join(" ");
            if let Ok(ex) = decode_str(&text, &schema()) {
                // canonical form is a fixed point of decode . encode
                let canon = encode(&ex, &schema()).unwrap();
                let again = decode(&canon, &schema()).unwrap();
                prop_assert_eq!(&again, &ex);
                prop_assert_eq!(encode(&again, &schema()).unwrap(), canon);
            }
        }
    }
}
