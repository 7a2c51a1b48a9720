//! Attribute value extraction with value-knowledge query expansion.
//!
//! The library covers the full experimental loop for QA-style attribute
//! value extraction over product titles:
//!
//! - [`corpus`]: raw tuple parsing, cleaning, deduplication, seeded splits.
//! - [`tokenize`]: deterministic tokenizer and the special-token vocabulary.
//! - [`spanlabel`]: conversion of tuples into begin/end position labels.
//! - [`knowledge`]: the attribute-to-values store and knowledge dropout.
//! - [`querybuild`]: model input assembly with value expansion and
//!   `[SEEN]`/`[UNSEEN]` token mixing.
//! - [`model`]: the [`model::SpanExtractor`] contract and a trainable
//!   pointer model with analytically checked gradients.
//! - [`baseline`]: the dictionary-matching reference extractor.
//! - [`eval`]: exact-match scoring, micro/macro aggregation and stratified
//!   analyses (frequency-by-ambiguity buckets, value-type categories,
//!   knowledge-base comparison).
//! - [`synth`]: synthetic corpus generation with a long-tailed attribute
//!   distribution and controllable name ambiguity.
//! - [`experiment`]: multi-trial orchestration with manifests and resume.
//!
//! Numeric code (the pointer model, the n-gram embedder, cosine) is generic
//! over the [`Scalar`] trait; concrete `f32`/`f64` aliases live at the
//! crate root.

pub mod baseline;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod files;
pub mod knowledge;
pub mod manifest;
pub mod model;
pub mod querybuild;
pub mod rng;
pub mod scalar;
pub mod spanlabel;
pub mod synth;
pub mod tokenize;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Pointer model over `f32` parameters.
pub type PointerModel32 = model::PointerModel<f32>;
/// Pointer model over `f64` parameters; the pipeline default.
pub type PointerModel64 = model::PointerModel<f64>;
