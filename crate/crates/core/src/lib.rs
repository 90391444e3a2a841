//! Literature-based idea discovery pipeline.
//!
//! The pipeline summarizes a paper corpus into structured records, builds two
//! typed knowledge graphs (a paper graph over domains/problems/papers/methods
//! and a citation graph over papers/methods), retrieves existing and
//! inspirational methods for a user-specified research brief, generates and
//! iteratively refines candidate ideas through a pluggable LLM gateway, and
//! scores ideas for novelty and practicality under a time-split protocol.

pub mod corpus;
pub mod digest;
pub mod error;
pub mod evaluation;
pub mod gateway;
pub mod graphs;
pub mod ideation;
pub mod summarizer;
pub mod jsonl;
pub mod retrieval;

pub use error::{PipelineError, Result};
