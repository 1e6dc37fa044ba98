use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{normalize_label, CodecError, LabeledExample, Tag};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSchema {
    slot_types: Vec<String>,
    intents: Vec<String>,
}

/// Label vocabularies of a corpus: slot types and intents, both in raw form.
///
/// Lookups go in both directions: raw name to normalized words (for
/// encoding) and normalized words back to the raw name (for decoding).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct SlotSchema {
    slot_types: Vec<String>,
    intents: Vec<String>,
    slot_norm: Vec<String>,
    intent_norm: Vec<String>,
    slot_by_raw: HashMap<String, usize>,
    slot_by_norm: HashMap<String, usize>,
    intent_by_raw: HashMap<String, usize>,
    intent_by_norm: HashMap<String, usize>,
}

impl PartialEq for SlotSchema {
    fn eq(&self, other: &Self) -> bool {
        self.slot_types == other.slot_types && self.intents == other.intents
    }
}

impl Eq for SlotSchema {}

impl TryFrom<RawSchema> for SlotSchema {
    type Error = CodecError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        SlotSchema::new(raw.slot_types, raw.intents)
    }
}

impl From<SlotSchema> for RawSchema {
    fn from(schema: SlotSchema) -> Self {
        RawSchema {
            slot_types: schema.slot_types,
            intents: schema.intents,
        }
    }
}

fn index_names(
    names: &[String],
    kind: &'static str,
) -> Result<(Vec<String>, HashMap<String, usize>, HashMap<String, usize>), CodecError> {
    let mut norm = Vec::with_capacity(names.len());
    let mut by_raw = HashMap::with_capacity(names.len());
    let mut by_norm = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let n = normalize_label(name)?;
        if by_norm.insert(n.clone(), i).is_some() {
            return Err(CodecError::DuplicateLabel {
                kind,
                label: name.clone(),
                normalized: n,
            });
        }
        by_raw.insert(name.clone(), i);
        norm.push(n);
    }
    Ok((norm, by_raw, by_norm))
}

impl SlotSchema {
    pub fn new(slot_types: Vec<String>, intents: Vec<String>) -> Result<Self, CodecError> {
        if intents.is_empty() {
            return Err(CodecError::EmptyIntentSet);
        }
        let (slot_norm, slot_by_raw, slot_by_norm) = index_names(&slot_types, "slot type")?;
        let (intent_norm, intent_by_raw, intent_by_norm) = index_names(&intents, "intent")?;
        Ok(SlotSchema {
            slot_types,
            intents,
            slot_norm,
            intent_norm,
            slot_by_raw,
            slot_by_norm,
            intent_by_raw,
            intent_by_norm,
        })
    }

    /// Collect the schema of a corpus, names ordered by first appearance.
    ///
    /// Tags are parsed leniently here; validity is checked later against the
    /// resulting schema.
    pub fn from_examples<'a, I>(examples: I) -> Result<Self, CodecError>
    where
        I: IntoIterator<Item = &'a LabeledExample>,
    {
        let mut slot_types: Vec<String> = Vec::new();
        let mut intents: Vec<String> = Vec::new();
        let mut seen_slots = std::collections::HashSet::new();
        let mut seen_intents = std::collections::HashSet::new();
        for ex in examples {
            if seen_intents.insert(ex.intent.clone()) {
                intents.push(ex.intent.clone());
            }
            for (i, tag) in ex.tags.iter().enumerate() {
                match Tag::parse(tag).map_err(|_| CodecError::InvalidTag {
                    index: i,
                    tag: tag.clone(),
                })? {
                    Tag::Outside => {}
                    Tag::Begin(t) | Tag::Inside(t) => {
                        if seen_slots.insert(t.to_owned()) {
                            slot_types.push(t.to_owned());
                        }
                    }
                }
            }
        }
        SlotSchema::new(slot_types, intents)
    }

    pub fn slot_types(&self) -> &[String] {
        &self.slot_types
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    /// Normalized intent names, in schema order.
    pub fn normalized_intents(&self) -> &[String] {
        &self.intent_norm
    }

    pub fn has_slot_type(&self, raw: &str) -> bool {
        self.slot_by_raw.contains_key(raw)
    }

    pub fn has_intent(&self, raw: &str) -> bool {
        self.intent_by_raw.contains_key(raw)
    }

    pub fn normalized_slot(&self, raw: &str) -> Option<&str> {
        self.slot_by_raw.get(raw).map(|&i| self.slot_norm[i].as_str())
    }

    pub fn normalized_intent(&self, raw: &str) -> Option<&str> {
        self.intent_by_raw.get(raw).map(|&i| self.intent_norm[i].as_str())
    }

    pub fn raw_slot(&self, normalized: &str) -> Option<&str> {
        self.slot_by_norm
            .get(normalized)
            .map(|&i| self.slot_types[i].as_str())
    }

    pub fn raw_intent(&self, normalized: &str) -> Option<&str> {
        self.intent_by_norm
            .get(normalized)
            .map(|&i| self.intents[i].as_str())
    }

    pub fn intent_index(&self, raw: &str) -> Option<usize> {
        self.intent_by_raw.get(raw).copied()
    }
}
