//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate paper id `{0}` in corpus")]
    DuplicatePaperId(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("structured output for schema `{schema_id}` still invalid after {attempts} attempt(s): {detail}")]
    StructuredOutput {
        schema_id: String,
        attempts: u32,
        detail: String,
        /// Raw text of the last backend response, kept for diagnosis.
        last_response: String,
    },

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("no mock fixture for prompt kind `{kind}`: {detail}")]
    MockFixtureMissing { kind: String, detail: String },

    #[error("post-dataset read during generation phase (call site `{tag}`)")]
    GuardViolation { tag: String },

    #[error("evaluation protocol violated: {0}")]
    Protocol(String),

    #[error("retrieval failed: {0}")]
    Retrieval(String),

    #[error("idea generation failed: {0}")]
    Generation(String),

    #[error("refinement failed: {0}")]
    Refinement(String),

    #[error("corpus too small: need at least {needed} papers, have {actual}")]
    CorpusTooSmall { needed: usize, actual: usize },

    #[error("dangling link target `{target}` (link from `{src}`)")]
    DanglingLink { src: String, target: String },

    #[error("stage `{stage}` requires outputs of `{requires}`; run `{requires}` first")]
    MissingStage { stage: String, requires: String },

    #[error("ablation keys unmatched: {0}")]
    KeyMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}
