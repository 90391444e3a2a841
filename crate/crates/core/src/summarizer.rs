//! Paper summarization and reference processing.
//!
//! Produces per-paper domain labels, the global domain consolidation,
//! structured summaries and entity extractions, plus the reference pipeline:
//! article filtering, seeded sampling, metadata resolution through a
//! pluggable client, reference method summaries, and synthetic citation link
//! injection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{CorpusStore, PaperRecord, PaperSummary, RawReference};
use crate::digest::short_id;
use crate::error::{PipelineError, Result};
use crate::gateway::schema::ids;
use crate::gateway::{ChatRequest, Gateway, PromptKind};

/// Mapping from raw domain labels to the consolidated domain set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConsolidation {
    pub raw_to_unified: BTreeMap<String, String>,
    pub unified_set: BTreeSet<String>,
}

impl DomainConsolidation {
    pub fn lookup(&self, raw: &str) -> Option<&str> {
        self.raw_to_unified.get(raw).map(String::as_str)
    }

    /// Every raw label maps somewhere, every unified label is an image.
    pub fn validate_total(&self, labels: &[String]) -> Result<()> {
        let missing: Vec<&String> = labels
            .iter()
            .filter(|l| !self.raw_to_unified.contains_key(*l))
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::Validation(format!(
                "consolidation is not total; unmapped labels: {missing:?}"
            )));
        }
        Ok(())
    }
}

fn record_text(record: &PaperRecord) -> String {
    let mut text = record.abstract_text.clone();
    if !record.body_text.is_empty() {
        if !text.is_empty() {
            text.push(' ');
        }
        // a prefix is plenty for labeling and keeps prompts bounded
        text.push_str(&record.body_text.chars().take(2000).collect::<String>());
    }
    text
}

/// One short raw domain label for a paper.
pub fn extract_domain_label(gateway: &Gateway, record: &PaperRecord) -> Result<String> {
    let text = record_text(record);
    if text.trim().is_empty() {
        return Err(PipelineError::Precondition(format!(
            "paper `{}` has neither abstract nor body text",
            record.paper_id
        )));
    }
    let request = label_request(record, &text);
    let response = gateway.complete(&request)?;
    Ok(response.value["label"].as_str().unwrap_or_default().to_string())
}

fn label_request(record: &PaperRecord, text: &str) -> ChatRequest {
    ChatRequest::new(
        PromptKind::DomainLabel,
        ids::DOMAIN_LABEL,
        format!(
            "Identify the research domain of this paper as one short label.\n\
             Title: {}\nText: {}",
            record.title, text
        ),
    )
    .with_salient("title", record.title.clone())
    .with_salient("text", text.to_string())
}

/// Merge semantically equivalent raw labels into unified domains with one
/// global gateway call, validated for totality (with bounded re-asks).
pub fn consolidate_domains(gateway: &Gateway, labels: &[String]) -> Result<DomainConsolidation> {
    if labels.is_empty() {
        return Err(PipelineError::Precondition(
            "consolidate_domains requires a non-empty label list".into(),
        ));
    }
    let mut distinct: Vec<String> = labels.to_vec();
    distinct.sort();
    distinct.dedup();

    let mut note = String::new();
    for _ in 0..=gateway.max_retries() {
        let request = ChatRequest::new(
            PromptKind::DomainMerge,
            ids::DOMAIN_MERGE,
            format!(
                "Merge semantically equivalent research domain labels into unified domains. \
                 Return a mapping covering every input label.{note}\nLabels: {distinct:?}"
            ),
        )
        .with_salient("labels", json!(distinct));
        let response = gateway.complete(&request)?;
        let mapping: BTreeMap<String, String> =
            serde_json::from_value(response.value["mapping"].clone()).map_err(|e| {
                PipelineError::Validation(format!("domain merge mapping malformed: {e}"))
            })?;

        let missing: Vec<&String> = distinct
            .iter()
            .filter(|l| !mapping.contains_key(*l))
            .collect();
        if missing.is_empty() {
            let filtered: BTreeMap<String, String> = mapping
                .into_iter()
                .filter(|(raw, _)| distinct.binary_search(raw).is_ok())
                .collect();
            let unified_set: BTreeSet<String> = filtered.values().cloned().collect();
            return Ok(DomainConsolidation {
                raw_to_unified: filtered,
                unified_set,
            });
        }
        note = format!(" Previous mapping missed: {missing:?}.");
    }
    Err(PipelineError::StructuredOutput {
        schema_id: ids::DOMAIN_MERGE.to_string(),
        attempts: gateway.max_retries() + 1,
        detail: "mapping never became total".into(),
        last_response: String::new(),
    })
}

/// Summarize one paper into background / problem / design, tagging it with
/// the unified domain derived from its raw label.
pub fn summarize_paper(
    gateway: &Gateway,
    record: &PaperRecord,
    raw_label: &str,
    consolidation: &DomainConsolidation,
) -> Result<PaperSummary> {
    record.validate()?;
    let unified = consolidation.lookup(raw_label).ok_or_else(|| {
        PipelineError::Precondition(format!(
            "consolidation does not cover raw label `{raw_label}` of paper `{}`",
            record.paper_id
        ))
    })?;
    let request = ChatRequest::new(
        PromptKind::Summarize,
        ids::PAPER_SUMMARY,
        format!(
            "Summarize this paper into three structured fields: background (research context \
             and motivation), problem (core limitations and technical challenges addressed), \
             design (the key method and system architecture).\nTitle: {}\nAbstract: {}\nBody: {}",
            record.title,
            record.abstract_text,
            record.body_text.chars().take(4000).collect::<String>()
        ),
    )
    .with_salient("paper_id", record.paper_id.clone())
    .with_salient("title", record.title.clone())
    .with_salient("abstract", record.abstract_text.clone())
    .with_salient("body", record.body_text.chars().take(2000).collect::<String>());
    let response = gateway.complete(&request)?;

    let summary = PaperSummary {
        paper_id: record.paper_id.clone(),
        domain_raw: raw_label.to_string(),
        domain_unified: unified.to_string(),
        background: response.value["background"].as_str().unwrap_or_default().to_string(),
        problem: response.value["problem"].as_str().unwrap_or_default().to_string(),
        design: response.value["design"].as_str().unwrap_or_default().to_string(),
    };
    summary.validate()?;
    Ok(summary)
}

/// Problem and method names extracted from a summary (for graph building).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedEntities {
    pub problems: Vec<String>,
    pub methods: Vec<String>,
}

pub fn extract_entities(gateway: &Gateway, summary: &PaperSummary) -> Result<ExtractedEntities> {
    let request = entity_request(summary);
    let response = gateway.complete(&request)?;
    response.deserialize()
}

pub(crate) fn entity_request(summary: &PaperSummary) -> ChatRequest {
    ChatRequest::new(
        PromptKind::Summarize,
        ids::ENTITY_EXTRACTION,
        format!(
            "Extract short canonical names for the research problems and the key methods \
             from this paper summary.\nProblem: {}\nDesign: {}",
            summary.problem, summary.design
        ),
    )
    .with_salient("paper_id", summary.paper_id.clone())
    .with_salient("title", summary.paper_id.clone())
    .with_salient("problem", summary.problem.clone())
    .with_salient("design", summary.design.clone())
}

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)https?://|\bwww\.").expect("url regex"));
static RFC_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bRFC\s*\d+").expect("rfc regex"));
static STANDARD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(IEEE\s+Std|ISO/IEC|3GPP\s+TS|ITU-T)\b").expect("standard regex")
});
static YEAR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(19|20)\d{2}\b").expect("year regex"));

/// Heuristic article filter: URLs, RFCs, standards documents and entries
/// without a year token are not articles.
pub fn is_article_reference(ref_text: &str) -> bool {
    !URL_RE.is_match(ref_text)
        && !RFC_RE.is_match(ref_text)
        && !STANDARD_RE.is_match(ref_text)
        && YEAR_RE.is_match(ref_text)
}

/// Mark article references and sample up to `k` of them uniformly without
/// replacement. Deterministic for a fixed seed; the sampled references keep
/// their original bibliography order.
pub fn filter_and_sample_references(record: &PaperRecord, k: usize, seed: u64) -> Vec<RawReference> {
    assert!(k > 0, "filter_and_sample_references requires k > 0");
    let article_indices: Vec<usize> = record
        .references
        .iter()
        .enumerate()
        .filter(|(_, r)| is_article_reference(&r.ref_text))
        .map(|(i, _)| i)
        .collect();

    let take = k.min(article_indices.len());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, article_indices.len(), take)
        .into_iter()
        .map(|i| article_indices[i])
        .collect();
    chosen.sort_unstable();

    chosen
        .into_iter()
        .map(|i| {
            let mut reference = record.references[i].clone();
            reference.is_article = true;
            reference
        })
        .collect()
}

/// Metadata for one resolved reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefMetadata {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

/// Pluggable bibliographic lookup. Production deployments would back this
/// with a metadata service; tests and offline runs use the fixture client.
pub trait RefMetadataClient: Send + Sync {
    fn lookup(&self, ref_text: &str) -> Result<Option<RefMetadata>>;
}

pub fn normalize_ref_text(ref_text: &str) -> String {
    ref_text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Offline client reading `{ref_text, title, abstract}` lines, keyed by the
/// normalized reference text.
pub struct FixtureMetadataClient {
    entries: HashMap<String, RefMetadata>,
}

#[derive(Debug, Deserialize)]
struct FixtureRow {
    ref_text: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
}

impl FixtureMetadataClient {
    pub fn from_path(path: &Path) -> Result<Self> {
        let rows: Vec<FixtureRow> = crate::jsonl::read_jsonl(path)?;
        let mut entries = HashMap::new();
        for row in rows {
            entries.insert(
                normalize_ref_text(&row.ref_text),
                RefMetadata {
                    title: row.title,
                    abstract_text: row.abstract_text,
                },
            );
        }
        Ok(FixtureMetadataClient { entries })
    }

    pub fn empty() -> Self {
        FixtureMetadataClient {
            entries: HashMap::new(),
        }
    }
}

impl RefMetadataClient for FixtureMetadataClient {
    fn lookup(&self, ref_text: &str) -> Result<Option<RefMetadata>> {
        Ok(self.entries.get(&normalize_ref_text(ref_text)).cloned())
    }
}

/// One-paragraph method summary for a reference with an abstract; references
/// without abstracts are skipped with a warning rather than failing the run.
pub fn summarize_reference_method(
    gateway: &Gateway,
    reference: &RawReference,
    title: &str,
) -> Result<Option<(String, String)>> {
    let Some(abstract_text) = reference.abstract_text.as_deref().filter(|a| !a.trim().is_empty())
    else {
        log::warn!(
            "reference `{}` has no abstract; dropping it from the citation graph",
            reference.ref_text
        );
        return Ok(None);
    };
    let request = ChatRequest::new(
        PromptKind::RefMethod,
        ids::REF_METHOD,
        format!("Summarize the methods of this referenced paper.\nTitle: {title}\nAbstract: {abstract_text}"),
    )
    .with_salient("ref_title", title.to_string())
    .with_salient("abstract", abstract_text.to_string());
    let response = gateway.complete(&request)?;
    Ok(Some((
        response.value["method_name"].as_str().unwrap_or_default().to_string(),
        response.value["summary"].as_str().unwrap_or_default().to_string(),
    )))
}

/// A sampled, resolved and summarized reference, ready for citation-graph
/// construction and the refs_sampled.jsonl export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub paper_id: String,
    pub ref_text: String,
    pub external_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub method_name: String,
    pub method_summary: String,
}

/// The full per-paper reference pipeline: filter + sample, resolve metadata,
/// summarize methods. Unresolvable or abstract-less references are dropped
/// with a warning.
pub fn process_references(
    gateway: &Gateway,
    client: &dyn RefMetadataClient,
    record: &PaperRecord,
    k: usize,
    seed: u64,
) -> Result<Vec<ReferenceRecord>> {
    let sampled = filter_and_sample_references(record, k, seed);
    let mut out = Vec::new();
    for mut reference in sampled {
        let Some(metadata) = client.lookup(&reference.ref_text)? else {
            log::warn!(
                "no metadata for reference `{}` of `{}`; dropped",
                reference.ref_text,
                record.paper_id
            );
            continue;
        };
        reference.external_id = Some(short_id(normalize_ref_text(&reference.ref_text).as_bytes()));
        reference.abstract_text = Some(metadata.abstract_text.clone());
        let Some((method_name, method_summary)) =
            summarize_reference_method(gateway, &reference, &metadata.title)?
        else {
            continue;
        };
        reference.method_summary = Some(method_summary.clone());
        reference.validate()?;
        out.push(ReferenceRecord {
            paper_id: record.paper_id.clone(),
            ref_text: reference.ref_text.clone(),
            external_id: reference.external_id.clone().unwrap_or_default(),
            title: metadata.title,
            abstract_text: metadata.abstract_text,
            method_name,
            method_summary,
        });
    }
    Ok(out)
}

/// A citation-graph link from a corpus paper. `dst_key` is a corpus paper id
/// for synthetic links and an external reference key otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationLink {
    pub src_paper_id: String,
    pub dst_key: String,
    pub synthetic: bool,
    #[serde(default)]
    pub method_summary: String,
}

/// Inject exactly `n` synthetic citation links from `record` to distinct
/// other corpus papers, never duplicating a real citation and never
/// self-looping. Deterministic for a fixed seed.
pub fn inject_synthetic_links(
    record: &PaperRecord,
    corpus: &CorpusStore,
    n: usize,
    seed: u64,
) -> Result<Vec<CitationLink>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if corpus.len() < n + 1 {
        return Err(PipelineError::CorpusTooSmall {
            needed: n + 1,
            actual: corpus.len(),
        });
    }

    // a real citation into the corpus shows up as the target's title inside
    // one of this paper's reference strings
    let cited_in_corpus: BTreeSet<&String> = corpus
        .records()
        .filter(|p| {
            record.references.iter().any(|r| {
                normalize_ref_text(&r.ref_text).contains(&normalize_ref_text(&p.title))
            })
        })
        .map(|p| &p.paper_id)
        .collect();

    let candidates: Vec<&String> = corpus
        .records
        .keys()
        .filter(|id| **id != record.paper_id && !cited_in_corpus.contains(*id))
        .collect();
    if candidates.len() < n {
        return Err(PipelineError::CorpusTooSmall {
            needed: n + 1 + cited_in_corpus.len(),
            actual: corpus.len(),
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut chosen: Vec<&String> = rand::seq::index::sample(&mut rng, candidates.len(), n)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    chosen.sort();

    Ok(chosen
        .into_iter()
        .map(|dst| CitationLink {
            src_paper_id: record.paper_id.clone(),
            dst_key: dst.clone(),
            synthetic: true,
            method_summary: String::new(),
        })
        .collect())
}

/// Outputs of the summarize stage for one store.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummarizeOutputs {
    pub raw_labels: BTreeMap<String, String>,
    pub consolidation: DomainConsolidation,
    pub summaries: Vec<PaperSummary>,
}

/// Label, consolidate and summarize every paper in the store (papers without
/// any text are skipped with a warning). Label and summary calls fan out
/// through the gateway's batch path.
pub fn summarize_store(gateway: &Gateway, store: &CorpusStore) -> Result<SummarizeOutputs> {
    let mut labelable: Vec<&PaperRecord> = Vec::new();
    for record in store.records() {
        if record_text(record).trim().is_empty() {
            log::warn!("paper `{}` has no text; skipping summarization", record.paper_id);
            continue;
        }
        labelable.push(record);
    }
    if labelable.is_empty() {
        return Err(PipelineError::Precondition(
            "no summarizable papers in store".into(),
        ));
    }

    let label_requests: Vec<ChatRequest> = labelable
        .iter()
        .map(|r| label_request(r, &record_text(r)))
        .collect();
    let mut raw_labels = BTreeMap::new();
    for (record, response) in labelable.iter().zip(gateway.complete_batch(&label_requests)) {
        let response = response?;
        raw_labels.insert(
            record.paper_id.clone(),
            response.value["label"].as_str().unwrap_or_default().to_string(),
        );
    }

    let labels: Vec<String> = raw_labels.values().cloned().collect();
    let consolidation = consolidate_domains(gateway, &labels)?;
    consolidation.validate_total(&labels)?;

    let mut summaries = Vec::new();
    for record in &labelable {
        let raw = &raw_labels[&record.paper_id];
        summaries.push(summarize_paper(gateway, record, raw, &consolidation)?);
    }
    Ok(SummarizeOutputs {
        raw_labels,
        consolidation,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PartitionTag;
    use crate::gateway::mock::MockBackend;
    use crate::gateway::BackendConfig;

    fn toy_gateway(seed: u64) -> Gateway {
        let cfg = BackendConfig::mock();
        Gateway::new(&cfg, Box::new(MockBackend::with_toy_profile(seed, cfg.embed_dim))).unwrap()
    }

    fn record_with_refs(id: &str, refs: Vec<&str>) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: format!("Paper {id} on data-plane checking"),
            venue: "NetSys".into(),
            year: 2022,
            abstract_text: "We study data-plane checking at scale.".into(),
            body_text: String::new(),
            references: refs.into_iter().map(RawReference::new).collect(),
        }
    }

    fn toy_store(ids: &[&str]) -> CorpusStore {
        let mut store = CorpusStore::empty(PartitionTag::Full);
        for id in ids {
            let r = record_with_refs(id, vec![]);
            store.records.insert(r.paper_id.clone(), r);
        }
        store
    }

    #[test]
    fn article_heuristic_rules() {
        assert!(is_article_reference(
            "P. Stone. Spectral Methods for Graph Partitioning. Journal, 2019."
        ));
        assert!(!is_article_reference("The P4 Language Consortium. https://p4.org/."));
        assert!(!is_article_reference("RFC 8955: Dissemination of Flow Specification Rules."));
        assert!(!is_article_reference("IEEE Std 802.1Q, Virtual LANs, 2018."));
        assert!(!is_article_reference("A. Author. Undated manuscript."));
    }

    #[test]
    fn sampling_takes_exactly_min_k_articles() {
        let refs: Vec<String> = (0..35).map(|i| format!("Author {i}. Work {i}. Venue, 2019.")).collect();
        let record = record_with_refs("p1", refs.iter().map(String::as_str).collect());
        let sampled = filter_and_sample_references(&record, 20, 42);
        assert_eq!(sampled.len(), 20);
        assert!(sampled.iter().all(|r| r.is_article));
        // without replacement
        let distinct: BTreeSet<&String> = sampled.iter().map(|r| &r.ref_text).collect();
        assert_eq!(distinct.len(), 20);

        let again = filter_and_sample_references(&record, 20, 42);
        assert_eq!(sampled, again);
        let other_seed = filter_and_sample_references(&record, 20, 43);
        assert_ne!(sampled, other_seed);
    }

    #[test]
    fn sampling_keeps_all_when_fewer_than_k() {
        let refs: Vec<String> = (0..7).map(|i| format!("Author {i}. Work {i}. Venue, 2019.")).collect();
        let mut all_refs: Vec<&str> = refs.iter().map(String::as_str).collect();
        all_refs.push("https://example.org/tool");
        let record = record_with_refs("p1", all_refs);
        let sampled = filter_and_sample_references(&record, 20, 1);
        assert_eq!(sampled.len(), 7);
    }

    #[test]
    fn synthetic_links_are_distinct_non_self_and_deterministic() {
        let store = toy_store(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"]);
        let record = store.records["a"].clone();
        let links = inject_synthetic_links(&record, &store, 5, 7).unwrap();
        assert_eq!(links.len(), 5);
        let targets: BTreeSet<&String> = links.iter().map(|l| &l.dst_key).collect();
        assert_eq!(targets.len(), 5);
        assert!(!targets.contains(&"a".to_string()));
        assert!(links.iter().all(|l| l.synthetic));

        let again = inject_synthetic_links(&record, &store, 5, 7).unwrap();
        assert_eq!(links, again);

        assert!(inject_synthetic_links(&record, &store, 0, 7).unwrap().is_empty());
    }

    #[test]
    fn synthetic_links_never_duplicate_real_citations() {
        let mut store = toy_store(&["a", "b", "c", "d", "e", "f"]);
        // `a` really cites `b` (the ref text embeds b's exact title)
        let title_b = store.records["b"].title.clone();
        store.records.get_mut("a").unwrap().references =
            vec![RawReference::new(format!("X. Author. {title_b}. NetSys, 2022."))];
        let record = store.records["a"].clone();

        // four candidates remain (c d e f); ask for all of them
        let links = inject_synthetic_links(&record, &store, 4, 3).unwrap();
        let targets: BTreeSet<&String> = links.iter().map(|l| &l.dst_key).collect();
        assert!(!targets.contains(&"a".to_string()));
        assert!(!targets.contains(&"b".to_string()));
        assert_eq!(targets.len(), 4);

        // asking for five must fail: only four legal targets exist
        assert!(inject_synthetic_links(&record, &store, 5, 3).is_err());
    }

    #[test]
    fn synthetic_links_corpus_too_small() {
        let store = toy_store(&["a", "b", "c"]);
        let record = store.records["a"].clone();
        let err = inject_synthetic_links(&record, &store, 5, 7).unwrap_err();
        assert!(matches!(err, PipelineError::CorpusTooSmall { needed: 6, actual: 3 }));
    }

    #[test]
    fn domain_label_requires_text() {
        let gw = toy_gateway(1);
        let mut record = record_with_refs("p1", vec![]);
        record.abstract_text = String::new();
        assert!(matches!(
            extract_domain_label(&gw, &record),
            Err(PipelineError::Precondition(_))
        ));
    }

    #[test]
    fn domain_label_for_data_plane_paper() {
        let gw = toy_gateway(1);
        let record = record_with_refs("p1", vec![]);
        let label = extract_domain_label(&gw, &record).unwrap();
        assert_eq!(label, "data-plane verification");
    }

    #[test]
    fn consolidation_merges_verification_variants() {
        let gw = toy_gateway(1);
        let labels = vec![
            "control-plane verification".to_string(),
            "data-plane verification".to_string(),
        ];
        let consolidation = consolidate_domains(&gw, &labels).unwrap();
        assert_eq!(consolidation.lookup("control-plane verification"), Some("network verification"));
        assert_eq!(consolidation.lookup("data-plane verification"), Some("network verification"));
        assert_eq!(consolidation.unified_set.len(), 1);
    }

    #[test]
    fn consolidation_singleton_is_identity() {
        let gw = toy_gateway(1);
        let labels = vec!["congestion control".to_string()];
        let consolidation = consolidate_domains(&gw, &labels).unwrap();
        assert_eq!(consolidation.lookup("congestion control"), Some("congestion control"));
    }

    #[test]
    fn consolidation_idempotent_on_unified_labels() {
        let gw = toy_gateway(1);
        let labels = vec![
            "network verification".to_string(),
            "congestion control".to_string(),
            "traffic engineering".to_string(),
        ];
        let consolidation = consolidate_domains(&gw, &labels).unwrap();
        for label in &labels {
            assert_eq!(consolidation.lookup(label), Some(label.as_str()));
        }
    }

    #[test]
    fn summarize_requires_covered_label() {
        let gw = toy_gateway(1);
        let record = record_with_refs("t01", vec![]);
        let consolidation = DomainConsolidation {
            raw_to_unified: BTreeMap::new(),
            unified_set: BTreeSet::new(),
        };
        assert!(matches!(
            summarize_paper(&gw, &record, "data-plane verification", &consolidation),
            Err(PipelineError::Precondition(_))
        ));
    }

    #[test]
    fn reference_method_summary_mentions_the_method() {
        let gw = toy_gateway(1);
        let mut reference = RawReference::new("P. Stone. Spectral Methods. Journal, 2019.");
        reference.is_article = true;
        reference.abstract_text =
            Some("Spectral techniques split large graphs into balanced partitions with quality guarantees.".into());
        let (name, summary) = summarize_reference_method(
            &gw,
            &reference,
            "Spectral Methods for Graph Partitioning and Clustering",
        )
        .unwrap()
        .unwrap();
        assert_eq!(name, "Graph Partitioning and Clustering");
        assert!(summary.to_lowercase().contains("partition"));
    }

    #[test]
    fn reference_without_abstract_is_skipped() {
        let gw = toy_gateway(1);
        let mut reference = RawReference::new("No abstract ref, 2019.");
        reference.is_article = true;
        let out = summarize_reference_method(&gw, &reference, "Whatever Title").unwrap();
        assert!(out.is_none());
    }
}
