//! Data augmentation toolkit for joint slot filling and intent detection.
//!
//! * [`codec`] converts BIO-labeled examples to and from the augmented
//!   language, where intent and slot spans live inline in the sentence.
//! * [`conditioning`] builds generator prompts: intent headers and masked
//!   augmented sentences.
//! * [`genfilter`] decodes generator output and drops invalid generations.
//! * [`metrics`] scores generations (BLEU, Self-BLEU, perplexity, Fréchet
//!   distance, precision/recall for distributions, Kendall tau).
//! * [`mixoutlab`] checks the mixout / neural-tangent-kernel ridge theory
//!   numerically on small networks.
//! * [`pipeline`] ties the stages together behind the `auglang` binary.

pub mod codec;
pub mod conditioning;
pub mod genfilter;
pub mod metrics;
pub mod mixoutlab;
pub mod pipeline;
pub mod seed;
