//! Deterministic mock backend.
//!
//! Completions are served from a fixture profile: pattern-rule tables for
//! text-derived outputs (domain labels, entity extraction, reference method
//! summaries), per-paper summary entries, and pure structural responders for
//! the pipeline-internal kinds (reports, map/reduce search, candidates,
//! suggestions, refinement, maturity). Everything is a pure function of the
//! backend seed and the request's salient fields, so two runs with the same
//! seed produce byte-identical outputs. Unknown papers or rule misses fail
//! loudly instead of returning generic text.
//!
//! Tests can rig raw responses (including malformed ones) per prompt kind,
//! or replace a responder outright for scripted sequences.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::digest::derive_seed;
use crate::error::{PipelineError, Result};

use super::{BackendKind, ChatBackend, ChatRequest, PromptKind, RawResponse};

#[derive(Debug, Clone, Deserialize)]
pub struct LabelRule {
    pub pattern: String,
    pub label: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MergeGroup {
    pub members: Vec<String>,
    pub unified: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SummaryFixture {
    pub background: String,
    pub problem: String,
    pub design: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProblemRule {
    pub pattern: String,
    pub problem: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MethodRule {
    pub pattern: String,
    pub method: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OrientationRule {
    pub pattern: String,
    pub orientation: String,
}

/// Fixture tables backing the content-derived prompt kinds.
#[derive(Debug, Clone, Deserialize)]
pub struct MockProfile {
    pub domain_label_rules: Vec<LabelRule>,
    pub merge_groups: Vec<MergeGroup>,
    pub summaries: BTreeMap<String, SummaryFixture>,
    pub problem_rules: Vec<ProblemRule>,
    pub method_rules: Vec<MethodRule>,
    pub ref_method_rules: Vec<MethodRule>,
    pub orientation_rules: Vec<OrientationRule>,
}

impl MockProfile {
    /// The profile matching the bundled toy corpus.
    pub fn toy() -> Self {
        serde_json::from_str(include_str!("toy_profile.json"))
            .expect("bundled toy profile parses")
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            PipelineError::Config(format!("mock profile {} invalid: {e}", path.display()))
        })
    }
}

type Responder = Box<dyn Fn(&ChatRequest) -> Result<Value> + Send + Sync>;

pub struct MockBackend {
    seed: u64,
    embed_dim: usize,
    profile: Option<MockProfile>,
    rigged: Mutex<BTreeMap<&'static str, VecDeque<String>>>,
    responders: Mutex<BTreeMap<&'static str, Responder>>,
    latency: Option<Duration>,
}

impl MockBackend {
    /// A bare mock: embeddings work, completions only via rigged responses or
    /// custom responders (plus the structural kinds, which need no profile).
    pub fn new(seed: u64, embed_dim: usize) -> Self {
        MockBackend {
            seed,
            embed_dim,
            profile: None,
            rigged: Mutex::new(BTreeMap::new()),
            responders: Mutex::new(BTreeMap::new()),
            latency: None,
        }
    }

    pub fn with_profile(seed: u64, embed_dim: usize, profile: MockProfile) -> Self {
        let mut backend = MockBackend::new(seed, embed_dim);
        backend.profile = Some(profile);
        backend
    }

    pub fn with_toy_profile(seed: u64, embed_dim: usize) -> Self {
        MockBackend::with_profile(seed, embed_dim, MockProfile::toy())
    }

    /// Sleep this long inside every backend call (used to exercise the
    /// in-flight bound under real concurrency).
    pub fn set_latency(&mut self, latency: Duration) {
        self.latency = Some(latency);
    }

    /// Queue a raw response (possibly malformed) consumed ahead of the
    /// normal responder for `kind`, FIFO.
    pub fn rig_raw(&self, kind: PromptKind, raw: impl Into<String>) {
        self.rigged
            .lock()
            .unwrap()
            .entry(kind.as_str())
            .or_default()
            .push_back(raw.into());
    }

    /// Replace the responder for `kind` entirely.
    pub fn set_responder<F>(&self, kind: PromptKind, responder: F)
    where
        F: Fn(&ChatRequest) -> Result<Value> + Send + Sync + 'static,
    {
        self.responders
            .lock()
            .unwrap()
            .insert(kind.as_str(), Box::new(responder));
    }

    fn profile(&self, kind: PromptKind) -> Result<&MockProfile> {
        self.profile.as_ref().ok_or_else(|| PipelineError::MockFixtureMissing {
            kind: kind.as_str().to_string(),
            detail: "no fixture profile installed".into(),
        })
    }

    fn respond(&self, request: &ChatRequest) -> Result<Value> {
        match request.prompt_kind {
            PromptKind::DomainLabel => self.respond_domain_label(request),
            PromptKind::DomainMerge => self.respond_domain_merge(request),
            PromptKind::Summarize => self.respond_summarize(request),
            PromptKind::RefMethod => self.respond_ref_method(request),
            PromptKind::Report => Ok(respond_report(request)),
            PromptKind::MapScore => Ok(respond_map_score(request)),
            PromptKind::ReduceSynthesize => self.respond_reduce(request),
            PromptKind::Candidates => self.respond_candidates(request),
            PromptKind::Suggest => Ok(respond_suggest(request)),
            PromptKind::Refine => Ok(respond_refine(request)),
            PromptKind::Maturity => Ok(respond_maturity(request)),
        }
    }

    fn respond_domain_label(&self, request: &ChatRequest) -> Result<Value> {
        let profile = self.profile(request.prompt_kind)?;
        let title = request.salient_str("title").unwrap_or_default();
        let text = request.salient_str("text").unwrap_or_default();
        let haystack = format!("{title} {text}").to_lowercase();
        for rule in &profile.domain_label_rules {
            if haystack.contains(&rule.pattern.to_lowercase()) {
                return Ok(json!({ "label": rule.label }));
            }
        }
        Err(PipelineError::MockFixtureMissing {
            kind: request.prompt_kind.as_str().to_string(),
            detail: format!("no domain label rule matches paper `{title}`"),
        })
    }

    fn respond_domain_merge(&self, request: &ChatRequest) -> Result<Value> {
        let profile = self.profile(request.prompt_kind)?;
        let labels = request.salient_str_list("labels");
        let mut mapping = serde_json::Map::new();
        for label in labels {
            let folded = label.to_lowercase();
            let unified = profile
                .merge_groups
                .iter()
                .find(|g| g.members.iter().any(|m| m.to_lowercase() == folded))
                .map(|g| g.unified.clone())
                .unwrap_or_else(|| label.clone());
            mapping.insert(label, Value::String(unified));
        }
        Ok(json!({ "mapping": mapping }))
    }

    fn respond_summarize(&self, request: &ChatRequest) -> Result<Value> {
        let profile = self.profile(request.prompt_kind)?;
        if request.schema_id == super::schema::ids::ENTITY_EXTRACTION {
            let problem_text = request.salient_str("problem").unwrap_or_default().to_lowercase();
            let design_text = request.salient_str("design").unwrap_or_default().to_lowercase();
            let problems: Vec<&str> = profile
                .problem_rules
                .iter()
                .filter(|r| problem_text.contains(&r.pattern.to_lowercase()))
                .map(|r| r.problem.as_str())
                .collect();
            let methods: Vec<&str> = profile
                .method_rules
                .iter()
                .filter(|r| design_text.contains(&r.pattern.to_lowercase()))
                .map(|r| r.method.as_str())
                .collect();
            // possibly empty lists: schema validation upstream decides the outcome
            return Ok(json!({ "problems": problems, "methods": methods }));
        }
        let paper_id = request.salient_str("paper_id").unwrap_or_default();
        match profile.summaries.get(paper_id) {
            Some(s) => Ok(json!({
                "background": s.background,
                "problem": s.problem,
                "design": s.design,
            })),
            None => Err(PipelineError::MockFixtureMissing {
                kind: request.prompt_kind.as_str().to_string(),
                detail: format!("no summary fixture for paper `{paper_id}`"),
            }),
        }
    }

    fn respond_ref_method(&self, request: &ChatRequest) -> Result<Value> {
        let profile = self.profile(request.prompt_kind)?;
        let title = request.salient_str("ref_title").unwrap_or_default();
        let abstract_text = request.salient_str("abstract").unwrap_or_default();
        let haystack = format!("{title} {abstract_text}").to_lowercase();
        for rule in &profile.ref_method_rules {
            if haystack.contains(&rule.pattern.to_lowercase()) {
                let first_sentence = abstract_text
                    .split_inclusive('.')
                    .next()
                    .unwrap_or(abstract_text)
                    .trim();
                return Ok(json!({
                    "method_name": rule.method,
                    "summary": format!("Core method: {}. {}", rule.method, first_sentence),
                }));
            }
        }
        Err(PipelineError::MockFixtureMissing {
            kind: request.prompt_kind.as_str().to_string(),
            detail: format!("no reference method rule matches `{title}`"),
        })
    }

    fn respond_reduce(&self, request: &ChatRequest) -> Result<Value> {
        let profile = self.profile(request.prompt_kind)?;
        let mode = request.salient_str("mode").unwrap_or("existing");
        let findings = request
            .salient
            .get("findings")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();

        // merge per method, keeping the descending-score input order
        let mut order: Vec<String> = Vec::new();
        let mut merged: BTreeMap<String, (f64, Vec<String>)> = BTreeMap::new();
        for finding in &findings {
            let Some(obj) = finding.as_object() else { continue };
            let Some(method) = obj.get("method").and_then(Value::as_str) else { continue };
            let score = obj.get("score").and_then(Value::as_f64).unwrap_or(0.0);
            let provenance: Vec<String> = obj
                .get("provenance")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
                .unwrap_or_default();
            let entry = merged.entry(method.to_string()).or_insert_with(|| {
                order.push(method.to_string());
                (0.0, Vec::new())
            });
            entry.0 = entry.0.max(score);
            for p in provenance {
                if !entry.1.contains(&p) {
                    entry.1.push(p);
                }
            }
        }

        let methods: Vec<Value> = order
            .iter()
            .map(|name| {
                let (relevance, provenance) = &merged[name];
                let orientation = if mode == "existing" {
                    orientation_for(profile, name)
                } else {
                    "Cross-Domain Transfer".to_string()
                };
                json!({
                    "name": name,
                    "orientation": orientation,
                    "provenance": provenance,
                    "relevance": relevance,
                })
            })
            .collect();
        Ok(json!({ "methods": methods }))
    }

    fn respond_candidates(&self, request: &ChatRequest) -> Result<Value> {
        let index = request.salient_u64("index").unwrap_or(0);
        let domain = request.salient_str("domain").unwrap_or_default().to_string();
        let problem = request.salient_str("problem").unwrap_or_default().to_string();
        let existing = salient_entries(request, "existing");
        let inspirations = salient_entries(request, "inspirations");

        if problem.to_lowercase().contains("scalable network verification") && index == 0 {
            return Ok(json!({
                "title": "Runtime Verification using Adaptive Partitioning with Reinforcement Learning",
                "design": "Combine graph partitioning with a reinforcement-learned controller that adapts partition boundaries at runtime, so verification tracks live network state continuously instead of re-running from scratch after every change.",
                "tasks": [
                    "Define partition quality metrics over live state",
                    "Train the partition-adaptation policy offline",
                    "Integrate runtime verification triggers",
                    "Evaluate on evolving topologies"
                ],
                "challenges": [
                    "High overhead of continuous partition updates during runtime verification",
                    "Convergence of the learned partition-adaptation policy under shifting workloads"
                ],
                "reasoning": "Partitioned analysis already scales static verification; learning when to update partitions amortizes that cost across runtime events, keeping checks continuous yet tractable."
            }));
        }

        let material = derive_seed(
            self.seed.wrapping_add(request.seed),
            &["candidate", &domain, &problem, &index.to_string()],
        );
        let derivative = !existing.is_empty() && material % 3 == 0;
        if derivative {
            let pick = &existing[(material / 3) as usize % existing.len()];
            let name = pick.0.clone();
            return Ok(json!({
                "title": name,
                "design": pick.1,
                "tasks": [
                    format!("Reproduce {name} as a baseline"),
                    format!("Identify the delta required for {problem}"),
                    "Evaluate against the reproduced baseline"
                ],
                "challenges": [
                    format!("Differentiating the approach from {name}"),
                    format!("Demonstrating gains over existing {name} deployments")
                ],
                "reasoning": format!(
                    "Builds directly on {name}, which already addresses {problem}; an incremental adaptation is low-risk."
                ),
            }));
        }

        let (ins_name, _ins_text) = if inspirations.is_empty() {
            ("Staged Decomposition".to_string(), String::new())
        } else {
            inspirations[(material / 5) as usize % inspirations.len()].clone()
        };
        let grounding = if existing.is_empty() {
            "established practice".to_string()
        } else {
            existing[(material / 7) as usize % existing.len()].0.clone()
        };
        Ok(json!({
            "title": format!("Idea {index}: {ins_name} for {problem}"),
            "design": format!(
                "Apply {ins_name} to {problem} in the {domain} domain. The design adapts {ins_name} \
                 while retaining the operational constraints addressed by {grounding}: instrument the \
                 system, transfer the mechanism, then validate under production-like workloads."
            ),
            "tasks": [
                format!("Map {ins_name} onto the {domain} setting"),
                "Prototype the transferred mechanism",
                "Validate under production-like workloads"
            ],
            "challenges": [
                format!("Transferring {ins_name} across domain boundaries without losing precision"),
                format!("Bounding the runtime overhead of {ins_name} in {domain} deployments")
            ],
            "reasoning": format!(
                "Cross-domain evidence suggests {ins_name} handles structurally similar workloads; \
                 pairing it with constraints from {grounding} grounds feasibility."
            ),
        }))
    }
}

fn orientation_for(profile: &MockProfile, method: &str) -> String {
    let folded = method.to_lowercase();
    for rule in &profile.orientation_rules {
        if folded.contains(&rule.pattern.to_lowercase()) {
            return rule.orientation.clone();
        }
    }
    "General Systems Techniques".to_string()
}

fn salient_entries(request: &ChatRequest, key: &str) -> Vec<(String, String)> {
    request
        .salient
        .get(key)
        .and_then(Value::as_array)
        .map(|arr| {
            arr.iter()
                .filter_map(|v| {
                    let obj = v.as_object()?;
                    let name = obj.get("name")?.as_str()?.to_string();
                    let text = obj.get("text").and_then(Value::as_str).unwrap_or("").to_string();
                    Some((name, text))
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Community report: one structured line per member paper, so the map stage
/// can recover problem → method associations without guessing.
fn respond_report(request: &ChatRequest) -> Value {
    let community_id = request.salient_str("community_id").unwrap_or_default();
    let graph_kind = request.salient_str("graph_kind").unwrap_or_default();
    let members = request
        .salient
        .get("members")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();

    let mut lines = Vec::new();
    let mut all_methods: Vec<String> = Vec::new();
    let mut headline = String::new();
    for member in &members {
        let Some(obj) = member.as_object() else { continue };
        let kind = obj.get("kind").and_then(Value::as_str).unwrap_or("");
        let name = obj.get("name").and_then(Value::as_str).unwrap_or("");
        if headline.is_empty() {
            headline = name.to_string();
        }
        if kind == "Method" && !all_methods.iter().any(|m| m == name) {
            all_methods.push(name.to_string());
            headline = name.to_string();
        }
        if kind != "Paper" {
            continue;
        }
        let paper_id = obj
            .get("paper_id")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .unwrap_or("-");
        let problems = obj
            .get("problems")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("; "))
            .unwrap_or_default();
        let methods = obj
            .get("methods")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("; "))
            .unwrap_or_default();
        lines.push(format!(
            "paper [{paper_id}] '{name}' | problems: {problems} | methods: {methods}"
        ));
    }

    let mut summary = format!(
        "Community {community_id} covers {} node(s) in the {graph_kind}.",
        members.len()
    );
    for line in &lines {
        summary.push('\n');
        summary.push_str(line);
    }
    if !all_methods.is_empty() {
        summary.push_str("\nmethods present: ");
        summary.push_str(&all_methods.join("; "));
    }

    json!({
        "title": format!("Community {community_id}: {headline}"),
        "summary": summary,
    })
}

struct ReportLine {
    paper_id: String,
    problems: Vec<String>,
    methods: Vec<String>,
}

fn parse_report_lines(summary: &str) -> Vec<ReportLine> {
    let mut lines = Vec::new();
    for raw in summary.lines() {
        let Some(rest) = raw.strip_prefix("paper [") else { continue };
        let Some((paper_id, rest)) = rest.split_once("] '") else { continue };
        let Some((_name, rest)) = rest.split_once("' | problems: ") else { continue };
        let Some((problems, methods)) = rest.split_once(" | methods: ") else { continue };
        let split = |s: &str| -> Vec<String> {
            s.split("; ")
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect()
        };
        lines.push(ReportLine {
            paper_id: paper_id.to_string(),
            problems: split(problems),
            methods: split(methods),
        });
    }
    lines
}

/// Map step: relevance 100 when a report line's problem matches the queried
/// problem (existing mode) or a candidate method appears in a line
/// (inspiration mode); otherwise no findings.
fn respond_map_score(request: &ChatRequest) -> Value {
    let summary = request.salient_str("report_summary").unwrap_or_default();
    let mode = request.salient_str("mode").unwrap_or("existing");
    let query_problem = request
        .salient_str("query_problem")
        .unwrap_or_default()
        .to_lowercase();
    let lines = parse_report_lines(summary);

    let mut findings = Vec::new();
    if mode == "inspiration" {
        let candidates = request.salient_str_list("candidates");
        for candidate in &candidates {
            let mut provenance = Vec::new();
            for line in &lines {
                if line.methods.iter().any(|m| m == candidate) && line.paper_id != "-" {
                    provenance.push(line.paper_id.clone());
                }
            }
            let found = lines.iter().any(|l| l.methods.iter().any(|m| m == candidate));
            if found {
                findings.push(json!({
                    "method": candidate,
                    "score": 100.0,
                    "provenance": provenance,
                }));
            }
        }
    } else {
        for line in &lines {
            if line.problems.iter().any(|p| p.to_lowercase() == query_problem) {
                for method in &line.methods {
                    findings.push(json!({
                        "method": method,
                        "score": 100.0,
                        "provenance": [line.paper_id],
                    }));
                }
            }
        }
    }
    json!({ "findings": findings })
}

fn respond_suggest(request: &ChatRequest) -> Value {
    let challenges = request.salient_str_list("challenges");
    let suggestions: Vec<Value> = challenges
        .iter()
        .enumerate()
        .map(|(i, challenge)| {
            let text = if challenge.to_lowercase().contains("partition") {
                "partition update only on events".to_string()
            } else {
                let head: String = challenge.chars().take(48).collect();
                format!("Mitigate '{head}' with a staged rollout and explicit measurement gates")
            };
            json!({ "challenge_index": i, "text": text })
        })
        .collect();
    json!({ "suggestions": suggestions })
}

/// Refinement incorporates the suggestions and retires the first open
/// challenge, so repeated refinement converges to an empty challenge list.
fn respond_refine(request: &ChatRequest) -> Value {
    let design = request.salient_str("design").unwrap_or_default();
    let challenges = request.salient_str_list("challenges");
    let tasks = request.salient_str_list("tasks");
    let iteration = request.salient_u64("iteration").unwrap_or(1);
    let suggestion_texts: Vec<String> = request
        .salient
        .get("suggestions")
        .and_then(Value::as_array)
        .map(|arr| {
            arr.iter()
                .filter_map(|v| v.get("text").and_then(Value::as_str).map(str::to_string))
                .collect()
        })
        .unwrap_or_default();

    let revised = format!(
        "{design}\nRevision {iteration}: incorporated {} suggestion(s): {}.",
        suggestion_texts.len(),
        suggestion_texts.join("; ")
    );
    let remaining: Vec<String> = challenges.iter().skip(1).cloned().collect();
    json!({ "design": revised, "challenges": remaining, "tasks": tasks })
}

fn respond_maturity(request: &ChatRequest) -> Value {
    let challenges = request.salient_str_list("challenges");
    if challenges.is_empty() {
        json!({
            "verdict": true,
            "rationale": "All listed challenges have concrete mitigations incorporated into the design.",
        })
    } else {
        json!({
            "verdict": false,
            "rationale": format!("Open challenges remain: {}", challenges.join("; ")),
        })
    }
}

/// Unit vector derived from a seeded digest of the text: digest seeds a
/// ChaCha stream expanded into Gaussian components, then normalized.
pub fn mock_embedding(seed: u64, dim: usize, text: &str) -> Vec<f64> {
    let mut counter = 0u32;
    loop {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(b"embed");
        hasher.update(counter.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        let mut rng = ChaCha20Rng::from_seed(key);
        let values: Vec<f64> = (0..dim)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return values.iter().map(|v| v / norm).collect();
        }
        counter += 1;
    }
}

impl ChatBackend for MockBackend {
    fn backend_kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete_raw(&self, request: &ChatRequest, _attempt: u32) -> Result<RawResponse> {
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        if let Some(queue) = self.rigged.lock().unwrap().get_mut(request.prompt_kind.as_str()) {
            if let Some(raw) = queue.pop_front() {
                return Ok(RawResponse::mock(raw));
            }
        }
        {
            let responders = self.responders.lock().unwrap();
            if let Some(responder) = responders.get(request.prompt_kind.as_str()) {
                let value = responder(request)?;
                return Ok(RawResponse::mock(value.to_string()));
            }
        }
        let value = self.respond(request)?;
        Ok(RawResponse::mock(value.to_string()))
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        Ok(texts
            .iter()
            .map(|t| mock_embedding(self.seed, self.embed_dim, t))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::schema::ids;
    use crate::gateway::{cosine_similarity, BackendConfig, EmbeddingVector, Gateway};

    fn toy_gateway(seed: u64) -> Gateway {
        let cfg = BackendConfig::mock();
        Gateway::new(&cfg, Box::new(MockBackend::with_toy_profile(seed, cfg.embed_dim))).unwrap()
    }

    #[test]
    fn embeddings_deterministic_unit_and_distinct() {
        let a1 = mock_embedding(7, 32, "a");
        let a2 = mock_embedding(7, 32, "a");
        let b = mock_embedding(7, 32, "b");
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm(&a1) - 1.0).abs() < 1e-9);
        assert!((norm(&b) - 1.0).abs() < 1e-9);

        let va = EmbeddingVector::new(a1, "a").unwrap();
        let vb = EmbeddingVector::new(b, "b").unwrap();
        let cos = cosine_similarity(&va, &vb).unwrap();
        assert!(cos.abs() < 0.9, "hash embeddings of distinct texts should not collide");
    }

    #[test]
    fn domain_label_follows_rules_and_fails_loudly() {
        let gw = toy_gateway(1);
        let req = ChatRequest::new(PromptKind::DomainLabel, ids::DOMAIN_LABEL, "label this")
            .with_salient("title", "Checking the data-plane at scale")
            .with_salient("text", "a paper about data-plane checking");
        let record = gw.complete(&req).unwrap();
        assert_eq!(record.value["label"], "data-plane verification");

        let no_match = ChatRequest::new(PromptKind::DomainLabel, ids::DOMAIN_LABEL, "label this")
            .with_salient("title", "Cooking with gas")
            .with_salient("text", "unrelated text");
        let err = gw.complete(&no_match).unwrap_err();
        assert!(matches!(err, PipelineError::MockFixtureMissing { .. }));
    }

    #[test]
    fn identical_text_gets_identical_labels() {
        let gw = toy_gateway(3);
        let req = |id: &str| {
            ChatRequest::new(PromptKind::DomainLabel, ids::DOMAIN_LABEL, format!("label {id}"))
                .with_salient("title", "Congestion control revisited")
                .with_salient("text", "same text")
        };
        let a = gw.complete(&req("a")).unwrap();
        let b = gw.complete(&req("b")).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn rigged_malformed_output_recovers_on_retry() {
        let cfg = BackendConfig::mock();
        let backend = MockBackend::with_toy_profile(11, cfg.embed_dim);
        backend.rig_raw(PromptKind::DomainMerge, "this is not json");
        let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();

        let req = ChatRequest::new(PromptKind::DomainMerge, ids::DOMAIN_MERGE, "merge")
            .with_salient("labels", serde_json::json!(["control-plane verification", "data-plane verification"]));
        let record = gw.complete(&req).unwrap();
        assert_eq!(record.value["mapping"]["data-plane verification"], "network verification");
        assert_eq!(record.value["mapping"]["control-plane verification"], "network verification");

        let transcript = gw.transcript();
        assert_eq!(transcript.len(), 1);
        assert_eq!(transcript[0].retries, 1);
    }

    #[test]
    fn merge_is_identity_on_already_unified_labels() {
        let gw = toy_gateway(5);
        let req = ChatRequest::new(PromptKind::DomainMerge, ids::DOMAIN_MERGE, "merge")
            .with_salient("labels", serde_json::json!(["network verification", "congestion control"]));
        let record = gw.complete(&req).unwrap();
        assert_eq!(record.value["mapping"]["network verification"], "network verification");
        assert_eq!(record.value["mapping"]["congestion control"], "congestion control");
    }

    #[test]
    fn structured_output_error_after_exhausted_retries() {
        let cfg = BackendConfig::mock();
        let backend = MockBackend::with_toy_profile(11, cfg.embed_dim);
        for _ in 0..=cfg.max_retries {
            backend.rig_raw(PromptKind::Maturity, r#"{"verdict": "not a bool"}"#);
        }
        let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();
        let req = ChatRequest::new(PromptKind::Maturity, ids::MATURITY, "judge")
            .with_salient("challenges", serde_json::json!([]));
        let err = gw.complete(&req).unwrap_err();
        match err {
            PipelineError::StructuredOutput { attempts, last_response, .. } => {
                assert_eq!(attempts, cfg.max_retries + 1);
                assert!(last_response.contains("not a bool"));
            }
            other => panic!("expected StructuredOutput, got {other}"),
        }
    }

    #[test]
    fn in_flight_bound_is_enforced() {
        let mut cfg = BackendConfig::mock();
        cfg.max_in_flight = 3;
        let mut backend = MockBackend::with_toy_profile(2, cfg.embed_dim);
        backend.set_latency(Duration::from_millis(5));
        let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();

        let requests: Vec<ChatRequest> = (0..24)
            .map(|i| {
                ChatRequest::new(PromptKind::Maturity, ids::MATURITY, format!("judge {i}"))
                    .with_salient("challenges", serde_json::json!(["open challenge"]))
            })
            .collect();
        let results = gw.complete_batch(&requests);
        assert!(results.iter().all(Result::is_ok));
        assert!(gw.max_in_flight_seen() >= 2, "batch should actually overlap");
        assert!(gw.max_in_flight_seen() <= 3, "bound exceeded: {}", gw.max_in_flight_seen());
    }

    #[test]
    fn batch_transcript_is_deterministic_across_runs() {
        let run = || {
            let cfg = BackendConfig::mock();
            let mut backend = MockBackend::with_toy_profile(9, cfg.embed_dim);
            backend.set_latency(Duration::from_millis(1));
            let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();
            let requests: Vec<ChatRequest> = (0..16)
                .map(|i| {
                    ChatRequest::new(PromptKind::Suggest, ids::SUGGESTIONS, format!("suggest {i}"))
                        .with_salient("idea_title", format!("idea {i}"))
                        .with_salient("challenges", serde_json::json!([format!("challenge {i}")]))
                })
                .collect();
            let _ = gw.complete_batch(&requests);
            let _ = gw.embed_batch(&["alpha".to_string(), "beta".to_string()]).unwrap();
            gw.transcript_jsonl()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn embed_batch_rejects_empty_text_with_index() {
        let gw = toy_gateway(4);
        let err = gw
            .embed_batch(&["ok".to_string(), "  ".to_string()])
            .unwrap_err();
        assert!(err.to_string().contains("index 1"));
        assert!(gw.embed_batch(&[]).unwrap().is_empty());

        let pair = gw.embed_batch(&["a".to_string(), "a".to_string()]).unwrap();
        assert_eq!(pair[0], pair[1]);
    }

    #[test]
    fn scripted_responder_replaces_builtin() {
        let cfg = BackendConfig::mock();
        let backend = MockBackend::new(13, cfg.embed_dim);
        backend.set_responder(PromptKind::Maturity, |_req| {
            Ok(serde_json::json!({"verdict": true, "rationale": "scripted"}))
        });
        let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();
        let req = ChatRequest::new(PromptKind::Maturity, ids::MATURITY, "judge")
            .with_salient("challenges", serde_json::json!(["still open"]));
        let record = gw.complete(&req).unwrap();
        assert_eq!(record.value["verdict"], true);
    }

    #[test]
    fn bare_mock_fails_loudly_without_profile() {
        let cfg = BackendConfig::mock();
        let gw = Gateway::new(&cfg, Box::new(MockBackend::new(1, cfg.embed_dim))).unwrap();
        let req = ChatRequest::new(PromptKind::Summarize, ids::PAPER_SUMMARY, "summarize")
            .with_salient("paper_id", "t01");
        assert!(matches!(
            gw.complete(&req).unwrap_err(),
            PipelineError::MockFixtureMissing { .. }
        ));
    }

    #[test]
    fn empty_prompt_text_is_a_precondition_error() {
        let gw = toy_gateway(1);
        let req = ChatRequest::new(PromptKind::Maturity, ids::MATURITY, "  ");
        assert!(matches!(
            gw.complete(&req).unwrap_err(),
            PipelineError::Precondition(_)
        ));
    }
}
