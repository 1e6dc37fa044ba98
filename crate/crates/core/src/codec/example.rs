use serde::{Deserialize, Serialize};

use super::{CodecError, SlotSchema};

/// One utterance with per-token BIO slot tags and an intent label.
///
/// Tags and intent hold raw (unnormalized) schema names, e.g. `B-object_type`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub intent: String,
}

/// A parsed BIO tag borrowing its slot type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(tag: &'a str) -> Result<Self, ()> {
        if tag == "O" {
            return Ok(Tag::Outside);
        }
        let (prefix, ty) = tag.split_once('-').ok_or(())?;
        if ty.is_empty() {
            return Err(());
        }
        match prefix {
            "B" => Ok(Tag::Begin(ty)),
            "I" => Ok(Tag::Inside(ty)),
            _ => Err(()),
        }
    }

    pub fn slot_type(&self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }
}

impl LabeledExample {
    pub fn new<T, G>(tokens: T, tags: G, intent: impl Into<String>) -> Self
    where
        T: IntoIterator,
        T::Item: Into<String>,
        G: IntoIterator,
        G::Item: Into<String>,
    {
        LabeledExample {
            tokens: tokens.into_iter().map(Into::into).collect(),
            tags: tags.into_iter().map(Into::into).collect(),
            intent: intent.into(),
        }
    }

    /// Check every structural invariant against `schema`.
    pub fn validate(&self, schema: &SlotSchema) -> Result<(), CodecError> {
        if self.tokens.is_empty() {
            return Err(CodecError::EmptyUtterance);
        }
        if self.tokens.len() != self.tags.len() {
            return Err(CodecError::LengthMismatch {
                tokens: self.tokens.len(),
                tags: self.tags.len(),
            });
        }
        if !schema.has_intent(&self.intent) {
            return Err(CodecError::UnknownIntent(self.intent.clone()));
        }
        for (index, token) in self.tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(CodecError::InvalidToken {
                    index,
                    token: token.clone(),
                });
            }
        }

        let mut open: Option<&str> = None;
        for (index, raw) in self.tags.iter().enumerate() {
            let tag = Tag::parse(raw).map_err(|_| CodecError::InvalidTag {
                index,
                tag: raw.clone(),
            })?;
            if let Some(ty) = tag.slot_type() {
                if !schema.has_slot_type(ty) {
                    return Err(CodecError::UnknownSlotType {
                        index,
                        slot_type: ty.to_owned(),
                    });
                }
            }
            open = match tag {
                Tag::Outside => None,
                Tag::Begin(ty) => Some(ty),
                Tag::Inside(ty) => {
                    if open != Some(ty) {
                        return Err(CodecError::OrphanInside {
                            index,
                            tag: raw.clone(),
                        });
                    }
                    Some(ty)
                }
            };
        }
        Ok(())
    }

    /// Promote every `I-x` that does not continue an `x` span to `B-x`.
    ///
    /// Returns the number of tags rewritten. Unparseable tags are left alone
    /// and still fail [`validate`](Self::validate).
    pub fn repair_bio(&mut self) -> usize {
        let mut repaired = 0;
        let mut open: Option<String> = None;
        for tag in self.tags.iter_mut() {
            let next = match Tag::parse(tag) {
                Ok(Tag::Outside) | Err(()) => None,
                Ok(Tag::Begin(ty)) => Some(ty.to_owned()),
                Ok(Tag::Inside(ty)) => {
                    let ty = ty.to_owned();
                    if open.as_deref() != Some(ty.as_str()) {
                        *tag = format!("B-{ty}");
                        repaired += 1;
                    }
                    Some(ty)
                }
            };
            open = next;
        }
        repaired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SlotSchema {
        SlotSchema::new(
            vec!["artist".into(), "service".into()],
            vec!["PlayMusic".into()],
        )
        .unwrap()
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(Tag::parse("O"), Ok(Tag::Outside));
        assert_eq!(Tag::parse("B-object type"), Ok(Tag::Begin("object type")));
        assert_eq!(Tag::parse("I-a-b"), Ok(Tag::Inside("a-b")));
        assert!(Tag::parse("B-").is_err());
        assert!(Tag::parse("X-artist").is_err());
        assert!(Tag::parse("o").is_err());
    }

    #[test]
    fn orphan_inside_names_its_index() {
        let ex = LabeledExample::new(["play", "muse"], ["O", "I-artist"], "PlayMusic");
        match ex.validate(&schema()) {
            Err(CodecError::OrphanInside { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let ex = LabeledExample::new(["a", "b"], ["B-artist", "I-service"], "PlayMusic");
        assert!(matches!(
            ex.validate(&schema()),
            Err(CodecError::OrphanInside { index: 1, .. })
        ));
    }

    #[test]
    fn repair_promotes_stray_inside() {
        let mut ex = LabeledExample::new(
            ["a", "b", "c", "d"],
            ["I-artist", "I-artist", "O", "I-service"],
            "PlayMusic",
        );
        assert_eq!(ex.repair_bio(), 2);
        assert_eq!(ex.tags, ["B-artist", "I-artist", "O", "B-service"]);
        ex.validate(&schema()).unwrap();
    }

    #[test]
    fn other_invariants() {
        let s = schema();
        let ex = LabeledExample::new(Vec::<String>::new(), Vec::<String>::new(), "PlayMusic");
        assert!(matches!(ex.validate(&s), Err(CodecError::EmptyUtterance)));
        let ex = LabeledExample::new(["a"], ["O", "O"], "PlayMusic");
        assert!(matches!(ex.validate(&s), Err(CodecError::LengthMismatch { .. })));
        let ex = LabeledExample::new(["a"], ["O"], "Nope");
        assert!(matches!(ex.validate(&s), Err(CodecError::UnknownIntent(_))));
        let ex = LabeledExample::new(["a b"], ["O"], "PlayMusic");
        assert!(matches!(ex.validate(&s), Err(CodecError::InvalidToken { .. })));
        let ex = LabeledExample::new(["a"], ["B-city"], "PlayMusic");
        assert!(matches!(ex.validate(&s), Err(CodecError::UnknownSlotType { .. })));
    }
}
