//! Lossless conversion between BIO-tagged examples and augmented-language
//! strings, plus label normalization and corpus file I/O.

mod augmented;
mod corpus;
mod example;
mod label;
mod schema;

use std::path::PathBuf;

pub use augmented::{decode, decode_str, encode, AugmentedSentence, DecodeError};
pub(crate) use augmented::Surface;
pub use corpus::{
    read_conll, read_corpus, read_examples, read_jsonl, write_conll, write_corpus, write_jsonl,
    CorpusFormat, CorpusRecord, Provenance,
};
pub use example::{LabeledExample, Tag};
pub use label::normalize_label;
pub use schema::SlotSchema;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("{kind} `{label}` collides with another name after normalization (`{normalized}`)")]
    DuplicateLabel {
        kind: &'static str,
        label: String,
        normalized: String,
    },
    #[error("schema has no intents")]
    EmptyIntentSet,
    #[error("example has no tokens")]
    EmptyUtterance,
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("invalid token {token:?} at index {index}")]
    InvalidToken { index: usize, token: String },
    #[error("invalid BIO tag `{tag}` at index {index}")]
    InvalidTag { index: usize, tag: String },
    #[error("`{tag}` at index {index} does not continue a span of the same type")]
    OrphanInside { index: usize, tag: String },
    #[error("unknown slot type `{slot_type}` at index {index}")]
    UnknownSlotType { index: usize, slot_type: String },
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
