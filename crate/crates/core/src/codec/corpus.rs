//! Corpus files: a CoNLL-style block format and JSON lines.
//!
//! CoNLL blocks look like
//!
//! ```text
//! # intent = PlayMusic
//! play	O
//! muse	B-artist
//!
//! ```
//!
//! An optional `# source = real|synthetic` line may follow the intent line.
//! JSONL records carry `tokens`, `tags`, `intent` and optionally `source`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CodecError, LabeledExample};

const INTENT_PREFIX: &str = "# intent = ";
const SOURCE_PREFIX: &str = "# source = ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Real => "real",
            Provenance::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Provenance::Real),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

/// A corpus entry, optionally tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(flatten)]
    pub example: LabeledExample,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Provenance>,
}

impl From<LabeledExample> for CorpusRecord {
    fn from(example: LabeledExample) -> Self {
        CorpusRecord {
            example,
            source: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Conll,
    Jsonl,
}

impl CorpusFormat {
    /// `.jsonl`/`.json` select JSONL, anything else CoNLL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Conll,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> CodecError {
    CodecError::Parse {
        line,
        message: msg.into(),
    }
}

pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, CodecError> {
    let mut out = Vec::new();
    let mut current: Option<CorpusRecord> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');

        if line.trim().is_empty() {
            if let Some(rec) = current.take() {
                out.push(rec);
            }
            continue;
        }
        if let Some(intent) = line.strip_prefix(INTENT_PREFIX) {
            if let Some(rec) = current.take() {
                out.push(rec);
            }
            current = Some(CorpusRecord {
                example: LabeledExample {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                    intent: intent.to_owned(),
                },
                source: None,
            });
            continue;
        }
        let rec = current
            .as_mut()
            .ok_or_else(|| parse_err(lineno, "token line before `# intent =` header"))?;
        if let Some(source) = line.strip_prefix(SOURCE_PREFIX) {
            rec.source = Some(source.parse().map_err(|m: String| parse_err(lineno, m))?);
            continue;
        }
        let Some((token, tag)) = line.split_once('\t') else {
            if line.starts_with('#') {
                continue;
            }
            return Err(parse_err(lineno, "expected `token<TAB>tag`"));
        };
        if tag.contains('\t') {
            return Err(parse_err(lineno, "more than two columns"));
        }
        rec.example.tokens.push(token.to_owned());
        rec.example.tags.push(tag.to_owned());
    }
    if let Some(rec) = current {
        out.push(rec);
    }
    Ok(out)
}

pub fn write_conll<W: Write>(mut writer: W, records: &[CorpusRecord]) -> Result<(), CodecError> {
    for rec in records {
        writeln!(writer, "{INTENT_PREFIX}{}", rec.example.intent)?;
        if let Some(source) = rec.source {
            writeln!(writer, "{SOURCE_PREFIX}{source}")?;
        }
        for (token, tag) in rec.example.tokens.iter().zip(&rec.example.tags) {
            writeln!(writer, "{token}\t{tag}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, CodecError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[CorpusRecord]) -> Result<(), CodecError> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec).map_err(|e| parse_err(0, e.to_string()))?;
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, CodecError> {
    let file = std::fs::File::open(path).map_err(|e| CodecError::File {
        path: path.to_owned(),
        source: e,
    })?;
    let reader = std::io::BufReader::new(file);
    match CorpusFormat::from_path(path) {
        CorpusFormat::Conll => read_conll(reader),
        CorpusFormat::Jsonl => read_jsonl(reader),
    }
}

/// Read a corpus and drop provenance.
pub fn read_examples(path: &Path) -> Result<Vec<LabeledExample>, CodecError> {
    Ok(read_corpus(path)?.into_iter().map(|r| r.example).collect())
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<(), CodecError> {
    let mut buf = Vec::new();
    match CorpusFormat::from_path(path) {
        CorpusFormat::Conll => write_conll(&mut buf, records)?,
        CorpusFormat::Jsonl => write_jsonl(&mut buf, records)?,
    }
    std::fs::write(path, buf).map_err(|e| CodecError::File {
        path: path.to_owned(),
        source: e,
    })
}
