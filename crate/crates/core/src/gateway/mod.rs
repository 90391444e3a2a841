//! Single choke point for all chat-completion and embedding calls.
//!
//! Every LLM-shaped operation in the pipeline builds a [`ChatRequest`] and
//! goes through [`Gateway::complete`], which enforces the in-flight bound,
//! validates structured outputs against registered schemas, repairs schema
//! violations with bounded re-prompts, and appends to a transcript log.
//!
//! Two backends exist: a deterministic mock ([`mock::MockBackend`]) used by
//! every test, and an HTTP backend ([`live::LiveBackend`]) speaking a
//! vendor-neutral chat-completion protocol. Mock transcripts are
//! byte-identical across runs for a fixed seed; latency and token counts are
//! live-only transcript fields.

pub mod live;
pub mod mock;
pub mod schema;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{PipelineError, Result};

pub use schema::SchemaRegistry;

/// Kinds of prompts the pipeline issues. Each maps to a prompt template in
/// its calling module and to a responder in the mock backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    DomainLabel,
    DomainMerge,
    Summarize,
    RefMethod,
    Report,
    MapScore,
    ReduceSynthesize,
    Candidates,
    Suggest,
    Refine,
    Maturity,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::DomainLabel => "domain_label",
            PromptKind::DomainMerge => "domain_merge",
            PromptKind::Summarize => "summarize",
            PromptKind::RefMethod => "ref_method",
            PromptKind::Report => "report",
            PromptKind::MapScore => "map_score",
            PromptKind::ReduceSynthesize => "reduce_synthesize",
            PromptKind::Candidates => "candidates",
            PromptKind::Suggest => "suggest",
            PromptKind::Refine => "refine",
            PromptKind::Maturity => "maturity",
        }
    }
}

/// One chat-completion request. `salient` carries the structured fields the
/// prompt was built from; the mock backend keys its fixtures on them and live
/// backends only see `prompt_text`.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub prompt_kind: PromptKind,
    pub prompt_text: String,
    pub schema_id: String,
    pub temperature: f64,
    pub seed: u64,
    pub salient: BTreeMap<String, serde_json::Value>,
}

impl ChatRequest {
    pub fn new(kind: PromptKind, schema_id: &str, prompt_text: impl Into<String>) -> Self {
        ChatRequest {
            prompt_kind: kind,
            prompt_text: prompt_text.into(),
            schema_id: schema_id.to_string(),
            temperature: 0.0,
            seed: 0,
            salient: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_salient(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.salient.insert(key.to_string(), value.into());
        self
    }

    pub fn salient_str(&self, key: &str) -> Option<&str> {
        self.salient.get(key).and_then(|v| v.as_str())
    }

    pub fn salient_u64(&self, key: &str) -> Option<u64> {
        self.salient.get(key).and_then(|v| v.as_u64())
    }

    pub fn salient_str_list(&self, key: &str) -> Vec<String> {
        self.salient
            .get(key)
            .and_then(|v| v.as_array())
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_str().map(str::to_string))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Digest of prompt kind, seed and the canonical salient serialization;
    /// the key under which mock fixtures and transcript entries identify a
    /// request.
    pub fn salient_digest(&self) -> String {
        let salient = serde_json::to_string(&self.salient).unwrap_or_default();
        let material = format!("{}\x1f{}\x1f{}", self.prompt_kind.as_str(), self.seed, salient);
        sha256_hex(material.as_bytes())
    }
}

/// A schema-validated structured response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub schema_id: String,
    pub value: serde_json::Value,
}

impl StructuredRecord {
    pub fn deserialize<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.value.clone()).map_err(|e| {
            PipelineError::Validation(format!(
                "response for schema `{}` did not deserialize: {e}",
                self.schema_id
            ))
        })
    }
}

/// Fixed-length real vector with a positive Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    dim: usize,
    source_text_hash: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, source_text_hash: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(PipelineError::Validation("empty embedding vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::Validation(
                "embedding vector contains non-finite values".into(),
            ));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(PipelineError::Validation(
                "embedding vector has zero norm".into(),
            ));
        }
        let dim = values.len();
        Ok(EmbeddingVector {
            values,
            dim,
            source_text_hash: source_text_hash.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn source_text_hash(&self) -> &str {
        &self.source_text_hash
    }

    /// Scale every component by a positive constant (cosine-invariant).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        EmbeddingVector::new(
            self.values.iter().map(|v| v * factor).collect(),
            self.source_text_hash.clone(),
        )
    }
}

/// cos(a, b) = dot(a, b) / (‖a‖·‖b‖).
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim != b.dim {
        return Err(PipelineError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (a.norm() * b.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Mock,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Live => write!(f, "live"),
            BackendKind::Mock => write!(f, "mock"),
        }
    }
}

fn default_auth_token_env() -> String {
    "IDEAFORGE_API_TOKEN".to_string()
}

fn default_max_in_flight() -> usize {
    8
}

fn default_max_retries() -> u32 {
    2
}

fn default_embed_dim() -> usize {
    32
}

/// Backend selection and limits. Secrets come through the environment
/// variable named by `auth_token_env`, never through this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub base_url: String,
    #[serde(default = "default_auth_token_env")]
    pub auth_token_env: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chat_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_model: Option<String>,
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            base_url: String::new(),
            auth_token_env: default_auth_token_env(),
            max_in_flight: default_max_in_flight(),
            max_retries: default_max_retries(),
            embed_dim: default_embed_dim(),
            chat_model: None,
            embed_model: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::Live && self.base_url.trim().is_empty() {
            return Err(PipelineError::Config(
                "live backend requires a non-empty base_url".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(PipelineError::Config("max_in_flight must be positive".into()));
        }
        if self.embed_dim == 0 {
            return Err(PipelineError::Config("embed_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Raw backend response before schema validation.
#[derive(Debug, Clone)]
pub struct RawResponse {
    pub text: String,
    pub tokens_in: Option<u64>,
    pub tokens_out: Option<u64>,
    pub latency_ms: Option<u64>,
}

impl RawResponse {
    pub fn mock(text: String) -> Self {
        RawResponse {
            text,
            tokens_in: None,
            tokens_out: None,
            latency_ms: None,
        }
    }
}

/// A chat + embedding backend. Implementations must be safe for concurrent
/// use; the gateway gives them at most `max_in_flight` outstanding calls.
pub trait ChatBackend: Send + Sync {
    fn backend_kind(&self) -> BackendKind;
    fn complete_raw(&self, request: &ChatRequest, attempt: u32) -> Result<RawResponse>;
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// One transcript line. Sequence numbers are assigned at submission in
/// program order, so sorting by `seq` yields a run-deterministic log even
/// when calls complete out of order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub prompt_kind: String,
    pub schema_id: String,
    pub salient_digest: String,
    pub seed: u64,
    pub retries: u32,
    pub response_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_out: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

struct SemaphorePermit<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphorePermit<'_> {
        let mut available = self.permits.lock().unwrap();
        while *available == 0 {
            available = self.cv.wait(available).unwrap();
        }
        *available -= 1;
        SemaphorePermit { sem: self }
    }
}

impl Drop for SemaphorePermit<'_> {
    fn drop(&mut self) {
        let mut available = self.sem.permits.lock().unwrap();
        *available += 1;
        self.sem.cv.notify_one();
    }
}

/// The gateway itself. Construct once per run and share by reference.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    schemas: SchemaRegistry,
    limiter: Semaphore,
    max_retries: u32,
    embed_dim: usize,
    seq: AtomicU64,
    in_flight: AtomicUsize,
    max_in_flight_seen: AtomicUsize,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl Gateway {
    pub fn new(config: &BackendConfig, backend: Box<dyn ChatBackend>) -> Result<Self> {
        config.validate()?;
        Ok(Gateway {
            backend,
            schemas: SchemaRegistry::builtin(),
            limiter: Semaphore::new(config.max_in_flight),
            max_retries: config.max_retries,
            embed_dim: config.embed_dim,
            seq: AtomicU64::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight_seen: AtomicUsize::new(0),
            transcript: Mutex::new(Vec::new()),
        })
    }

    /// Build a gateway from config alone: the standard toy-profile mock for
    /// `kind = mock`, the HTTP backend for `kind = live`.
    pub fn from_config(config: &BackendConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let backend: Box<dyn ChatBackend> = match config.kind {
            BackendKind::Mock => Box::new(mock::MockBackend::with_toy_profile(seed, config.embed_dim)),
            BackendKind::Live => Box::new(live::LiveBackend::new(config)?),
        };
        Gateway::new(config, backend)
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.backend_kind()
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    /// Largest number of concurrently outstanding backend calls observed.
    pub fn max_in_flight_seen(&self) -> usize {
        self.max_in_flight_seen.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<StructuredRecord> {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        self.complete_with_seq(seq, request)
    }

    /// Fan a batch out across a bounded worker pool. Results come back in
    /// input order; sequence numbers are assigned by input index so the
    /// transcript is deterministic regardless of completion interleaving.
    pub fn complete_batch(&self, requests: &[ChatRequest]) -> Vec<Result<StructuredRecord>> {
        if requests.is_empty() {
            return Vec::new();
        }
        let base = self.seq.fetch_add(requests.len() as u64, Ordering::SeqCst);
        let results: Vec<Mutex<Option<Result<StructuredRecord>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        // more workers than permits, so the semaphore is the binding limit
        let workers = requests.len().min(self.max_in_flight_permits() * 2).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= requests.len() {
                        break;
                    }
                    let outcome = self.complete_with_seq(base + idx as u64, &requests[idx]);
                    *results[idx].lock().unwrap() = Some(outcome);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
            .collect()
    }

    fn max_in_flight_permits(&self) -> usize {
        *self.limiter.permits.lock().unwrap() + self.in_flight.load(Ordering::SeqCst)
    }

    fn complete_with_seq(&self, seq: u64, request: &ChatRequest) -> Result<StructuredRecord> {
        if request.prompt_text.trim().is_empty() {
            return Err(PipelineError::Precondition("empty prompt_text".into()));
        }
        if !self.schemas.contains(&request.schema_id) {
            return Err(PipelineError::Validation(format!(
                "unregistered schema `{}`",
                request.schema_id
            )));
        }

        let _permit = self.limiter.acquire();
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight_seen.fetch_max(current, Ordering::SeqCst);
        let outcome = self.attempt_loop(seq, request);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        outcome
    }

    fn attempt_loop(&self, seq: u64, request: &ChatRequest) -> Result<StructuredRecord> {
        let mut prompt = request.prompt_text.clone();
        let mut last_raw = String::new();
        let mut last_detail = String::new();
        let mut transport_failure = false;

        for attempt in 0..=self.max_retries {
            let attempt_request = ChatRequest {
                prompt_text: prompt.clone(),
                ..request.clone()
            };
            match self.backend.complete_raw(&attempt_request, attempt) {
                Ok(raw) => {
                    transport_failure = false;
                    last_raw = raw.text.clone();
                    match self.parse_and_validate(&request.schema_id, &raw.text) {
                        Ok(value) => {
                            self.log_completion(seq, request, attempt, &raw);
                            return Ok(StructuredRecord {
                                schema_id: request.schema_id.clone(),
                                value,
                            });
                        }
                        Err(detail) => {
                            last_detail = detail.clone();
                            prompt = format!(
                                "{}\n\nREPAIR: the previous response was invalid ({detail}). \
                                 Respond with only a JSON object conforming to schema `{}`.",
                                request.prompt_text, request.schema_id
                            );
                        }
                    }
                }
                Err(PipelineError::MockFixtureMissing { kind, detail }) => {
                    // a missing fixture is a test-setup bug, never retried
                    return Err(PipelineError::MockFixtureMissing { kind, detail });
                }
                Err(e) => {
                    transport_failure = true;
                    last_detail = e.to_string();
                }
            }
        }

        if transport_failure {
            Err(PipelineError::Backend(format!(
                "transport failed after {} attempt(s): {last_detail}",
                self.max_retries + 1
            )))
        } else {
            Err(PipelineError::StructuredOutput {
                schema_id: request.schema_id.clone(),
                attempts: self.max_retries + 1,
                detail: last_detail,
                last_response: last_raw,
            })
        }
    }

    fn parse_and_validate(
        &self,
        schema_id: &str,
        text: &str,
    ) -> std::result::Result<serde_json::Value, String> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
        self.schemas.validate(schema_id, &value)?;
        Ok(value)
    }

    fn log_completion(&self, seq: u64, request: &ChatRequest, retries: u32, raw: &RawResponse) {
        let entry = TranscriptEntry {
            seq,
            prompt_kind: request.prompt_kind.as_str().to_string(),
            schema_id: request.schema_id.clone(),
            salient_digest: request.salient_digest(),
            seed: request.seed,
            retries,
            response_digest: sha256_hex(raw.text.as_bytes()),
            tokens_in: raw.tokens_in,
            tokens_out: raw.tokens_out,
            latency_ms: raw.latency_ms,
        };
        self.transcript.lock().unwrap().push(entry);
    }

    /// Embed a batch of texts, one unit-capable vector per text in input
    /// order. Identical texts produce identical vectors within a run.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        for (idx, text) in texts.iter().enumerate() {
            if text.trim().is_empty() {
                return Err(PipelineError::Precondition(format!(
                    "empty text at index {idx} in embedding batch"
                )));
            }
        }
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);

        let _permit = self.limiter.acquire();
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight_seen.fetch_max(current, Ordering::SeqCst);
        let raw = self.backend.embed_raw(texts);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let raw = raw?;

        if raw.len() != texts.len() {
            return Err(PipelineError::Backend(format!(
                "embedding backend returned {} vectors for {} texts",
                raw.len(),
                texts.len()
            )));
        }
        let mut vectors = Vec::with_capacity(raw.len());
        for (text, values) in texts.iter().zip(raw) {
            let vector = EmbeddingVector::new(values, sha256_hex(text.as_bytes()))?;
            if vector.dim() != self.embed_dim && self.backend.backend_kind() == BackendKind::Mock {
                return Err(PipelineError::Backend(format!(
                    "mock embedding dim {} does not match configured {}",
                    vector.dim(),
                    self.embed_dim
                )));
            }
            vectors.push(vector);
        }
        if let Some(first) = vectors.first() {
            for v in &vectors {
                if v.dim() != first.dim() {
                    return Err(PipelineError::DimensionMismatch {
                        left: first.dim(),
                        right: v.dim(),
                    });
                }
            }
        }

        let mut material = String::new();
        for t in texts {
            material.push_str(t);
            material.push('\x1f');
        }
        self.transcript.lock().unwrap().push(TranscriptEntry {
            seq,
            prompt_kind: "embed_batch".to_string(),
            schema_id: String::new(),
            salient_digest: sha256_hex(material.as_bytes()),
            seed: 0,
            retries: 0,
            response_digest: sha256_hex(
                format!("{}x{}", vectors.len(), vectors.first().map_or(0, |v| v.dim())).as_bytes(),
            ),
            tokens_in: None,
            tokens_out: None,
            latency_ms: None,
        });
        Ok(vectors)
    }

    /// Transcript entries sorted by submission sequence.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let mut entries = self.transcript.lock().unwrap().clone();
        entries.sort_by_key(|e| e.seq);
        entries
    }

    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in self.transcript() {
            out.push_str(&serde_json::to_string(&entry).expect("transcript serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "test").unwrap()
    }

    #[test]
    fn cosine_identity_orthogonal_and_half_angle() {
        let v = vector(&[0.3, -0.7, 0.1, 2.0]);
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);

        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; 8];
        e2[1] = 1.0;
        assert_eq!(cosine_similarity(&vector(&e1), &vector(&e2)).unwrap(), 0.0);

        let a = vector(&[1.0, 0.0]);
        let b = vector(&[1.0, 1.0]);
        assert!((cosine_similarity(&a, &b).unwrap() - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let a = vector(&[1.0, 0.0]);
        let b = vector(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine_similarity(&a, &b),
            Err(PipelineError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_vectors_rejected_at_construction() {
        assert!(EmbeddingVector::new(vec![0.0, 0.0], "z").is_err());
        assert!(EmbeddingVector::new(vec![], "z").is_err());
        assert!(EmbeddingVector::new(vec![f64::NAN, 1.0], "z").is_err());
    }

    #[test]
    fn live_config_requires_base_url() {
        let mut cfg = BackendConfig::mock();
        cfg.kind = BackendKind::Live;
        assert!(cfg.validate().is_err());
        cfg.base_url = "http://localhost:9999/v1".into();
        assert!(cfg.validate().is_ok());
    }

    proptest! {
        /// cosine is symmetric and bounded for arbitrary nonzero vectors.
        #[test]
        fn cosine_symmetric_and_bounded(
            a in proptest::collection::vec(-100.0f64..100.0, 4),
            b in proptest::collection::vec(-100.0f64..100.0, 4),
        ) {
            prop_assume!(a.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            prop_assume!(b.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            let va = vector(&a);
            let vb = vector(&b);
            let ab = cosine_similarity(&va, &vb).unwrap();
            let ba = cosine_similarity(&vb, &va).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab.abs() <= 1.0 + 1e-12);
        }

        /// scaling either argument by a positive constant leaves cosine unchanged.
        #[test]
        fn cosine_scale_invariant(
            a in proptest::collection::vec(-100.0f64..100.0, 6),
            b in proptest::collection::vec(-100.0f64..100.0, 6),
            factor in 0.001f64..1000.0,
        ) {
            prop_assume!(a.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            prop_assume!(b.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            let va = vector(&a);
            let vb = vector(&b);
            let plain = cosine_similarity(&va, &vb).unwrap();
            let scaled = cosine_similarity(&va.scaled(factor).unwrap(), &vb).unwrap();
            prop_assert!((plain - scaled).abs() < 1e-9);
        }
    }
}
