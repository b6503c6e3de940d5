//! Coarse-to-fine story generation.
//!
//! The pipeline decomposes prompt-to-story generation into three stages:
//! a predicate-argument action plan, an entity-anonymized story with
//! placeholder tokens (`ent0`, `ent1`, ...), and context-sensitive filling
//! of those placeholders with names and references. Each stage is a small
//! convolutional seq2seq model trained on pairs derived deterministically
//! from annotated stories.
//!
//! Modules follow the data flow:
//!
//! - [`corpus`]: dataset ingestion, tokenization, subword vocabularies
//! - [`annotate`]: SRL frames, entity mentions, coreference clusters
//!   (imported from files or produced by heuristic fallbacks)
//! - [`decompose`]: plans, anonymized stories, and their inverses
//! - [`nn`]: dense tensors with reverse-mode gradients and grad checking
//! - [`model`]: the seq2seq models, verb attention, pointer-copy mechanism
//! - [`generate`]: top-k sampling, length rules, the end-to-end pipeline
//! - [`evaluate`]: stage NLLs, verb diversity, LCS, entity metrics

pub mod annotate;
pub mod corpus;
pub mod decompose;
pub mod evaluate;
pub mod generate;
pub mod model;
pub mod nn;
pub mod seeds;
