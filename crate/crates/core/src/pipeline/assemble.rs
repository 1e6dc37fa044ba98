use super::PipelineError;
use crate::codec::{CorpusRecord, LabeledExample, Provenance, SlotSchema};

/// Real examples followed by synthetic ones, each tagged with its source.
/// Every example must validate against `schema`.
pub fn assemble_augmented_set(
    real: &[LabeledExample],
    synthetic: &[LabeledExample],
    schema: &SlotSchema,
) -> Result<Vec<CorpusRecord>, PipelineError> {
    let tag = |source| {
        move |ex: &LabeledExample| -> Result<CorpusRecord, PipelineError> {
            ex.validate(schema).map_err(PipelineError::SchemaMismatch)?;
            Ok(CorpusRecord {
                example: ex.clone(),
                source: Some(source),
            })
        }
    };
    real.iter()
        .map(tag(Provenance::Real))
        .chain(synthetic.iter().map(tag(Provenance::Synthetic)))
        .collect()
}
