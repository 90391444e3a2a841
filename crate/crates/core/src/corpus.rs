//! Paper corpus: loading, validation, time partitioning, and the guarded
//! post-partition store used by the time-split evaluation protocol.
//!
//! The corpus file is line-delimited JSON, one paper per line with fields
//! `{paper_id, title, venue, year, abstract, body_text, references:[{ref_text}]}`.
//! Summaries live in a companion JSONL file keyed by `paper_id`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::jsonl;

pub const YEAR_MIN: i32 = 1900;
pub const YEAR_MAX: i32 = 2100;

/// One raw bibliography entry of a paper. Only `ref_text` is present in the
/// corpus file; the remaining fields are filled in by reference filtering and
/// metadata resolution and are never written back into corpus files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReference {
    pub ref_text: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_article: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "abstract")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_summary: Option<String>,
}

fn is_false(v: &bool) -> bool {
    !v
}

impl RawReference {
    pub fn new(ref_text: impl Into<String>) -> Self {
        RawReference {
            ref_text: ref_text.into(),
            is_article: false,
            external_id: None,
            abstract_text: None,
            method_summary: None,
        }
    }

    /// abstract/method_summary may only be non-empty on article references.
    pub fn validate(&self) -> Result<()> {
        if !self.is_article {
            let has_abstract = self.abstract_text.as_deref().is_some_and(|s| !s.is_empty());
            let has_summary = self.method_summary.as_deref().is_some_and(|s| !s.is_empty());
            if has_abstract || has_summary {
                return Err(PipelineError::Validation(format!(
                    "non-article reference `{}` carries abstract or method summary",
                    self.ref_text
                )));
            }
        }
        Ok(())
    }
}

/// One corpus paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    pub venue: String,
    pub year: i32,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub body_text: String,
    pub references: Vec<RawReference>,
}

impl PaperRecord {
    pub fn validate(&self) -> Result<()> {
        if self.paper_id.trim().is_empty() {
            return Err(PipelineError::Validation("empty paper_id".into()));
        }
        if self.title.trim().is_empty() {
            return Err(PipelineError::Validation(format!(
                "paper `{}` has an empty title",
                self.paper_id
            )));
        }
        if !(YEAR_MIN..=YEAR_MAX).contains(&self.year) {
            return Err(PipelineError::Validation(format!(
                "paper `{}` has year {} outside [{YEAR_MIN}, {YEAR_MAX}]",
                self.paper_id, self.year
            )));
        }
        for r in &self.references {
            r.validate()?;
        }
        Ok(())
    }
}

/// Structured summary of one paper: background, problem, design, plus the raw
/// and consolidated domain labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperSummary {
    pub paper_id: String,
    pub domain_raw: String,
    pub domain_unified: String,
    pub background: String,
    pub problem: String,
    pub design: String,
}

impl PaperSummary {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("background", &self.background),
            ("problem", &self.problem),
            ("design", &self.design),
        ] {
            if value.trim().is_empty() {
                return Err(PipelineError::Validation(format!(
                    "summary of `{}` has empty {name}",
                    self.paper_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionTag {
    Full,
    Pre,
    Post,
}

/// Immutable collection of papers (and optionally their summaries) with a
/// partition tag. Safe to share across threads once loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStore {
    pub records: BTreeMap<String, PaperRecord>,
    pub summaries: BTreeMap<String, PaperSummary>,
    pub partition_tag: PartitionTag,
}

impl CorpusStore {
    pub fn empty(tag: PartitionTag) -> Self {
        CorpusStore {
            records: BTreeMap::new(),
            summaries: BTreeMap::new(),
            partition_tag: tag,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &PaperRecord> {
        self.records.values()
    }

    pub fn summaries(&self) -> impl Iterator<Item = &PaperSummary> {
        self.summaries.values()
    }

    /// Attach summaries, rejecting any whose paper_id does not resolve.
    pub fn attach_summaries(&mut self, summaries: Vec<PaperSummary>) -> Result<()> {
        for s in summaries {
            if !self.records.contains_key(&s.paper_id) {
                return Err(PipelineError::Validation(format!(
                    "summary references unknown paper `{}`",
                    s.paper_id
                )));
            }
            s.validate()?;
            self.summaries.insert(s.paper_id.clone(), s);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for record in self.records.values() {
            record.validate()?;
        }
        for summary in self.summaries.values() {
            if !self.records.contains_key(&summary.paper_id) {
                return Err(PipelineError::Validation(format!(
                    "summary references unknown paper `{}`",
                    summary.paper_id
                )));
            }
            summary.validate()?;
        }
        Ok(())
    }
}

/// Per-line failure collected while loading a corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

/// Outcome of a corpus load: counts plus skipped lines and warnings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub total_lines: usize,
    pub loaded: usize,
    pub malformed: Vec<MalformedLine>,
    pub warnings: Vec<String>,
}

/// Load a corpus file into a store tagged `full`.
///
/// Malformed lines (unparseable JSON or records violating the paper
/// invariants) are skipped and reported; a duplicated `paper_id` is fatal.
pub fn load_corpus(path: &Path) -> Result<(CorpusStore, LoadReport)> {
    let (rows, parse_failures) = jsonl::read_jsonl_lenient::<PaperRecord>(path)?;
    let mut report = LoadReport {
        total_lines: rows.len() + parse_failures.len(),
        ..LoadReport::default()
    };
    for (line, message) in parse_failures {
        report.malformed.push(MalformedLine { line, message });
    }

    let mut store = CorpusStore::empty(PartitionTag::Full);
    for (line, record) in rows {
        if let Err(e) = record.validate() {
            report.malformed.push(MalformedLine {
                line,
                message: e.to_string(),
            });
            continue;
        }
        if store.records.contains_key(&record.paper_id) {
            return Err(PipelineError::DuplicatePaperId(record.paper_id));
        }
        store.records.insert(record.paper_id.clone(), record);
    }
    report.loaded = store.records.len();
    if report.total_lines == 0 {
        report.warnings.push(format!(
            "corpus file {} is empty",
            path.display()
        ));
        log::warn!("corpus file {} is empty", path.display());
    }
    if !report.malformed.is_empty() {
        log::warn!(
            "skipped {} malformed corpus line(s) in {}",
            report.malformed.len(),
            path.display()
        );
    }
    Ok((store, report))
}

/// Write the store's records back out in the corpus file format
/// (stable paper_id order; reference enrichment is not persisted here).
pub fn save_corpus(store: &CorpusStore, path: &Path) -> Result<()> {
    jsonl::write_jsonl(path, store.records.values())
}

pub fn load_summaries(path: &Path) -> Result<Vec<PaperSummary>> {
    jsonl::read_jsonl(path)
}

pub fn save_summaries<'a>(
    summaries: impl IntoIterator<Item = &'a PaperSummary>,
    path: &Path,
) -> Result<()> {
    jsonl::write_jsonl(path, summaries)
}

/// Split a full store at `boundary_year`: years ≤ boundary go to the pre
/// store, the rest to post. Summaries travel with their records.
pub fn split_by_year(store: &CorpusStore, boundary_year: i32) -> Result<(CorpusStore, CorpusStore)> {
    if store.partition_tag != PartitionTag::Full {
        return Err(PipelineError::Precondition(
            "split_by_year requires a store tagged full".into(),
        ));
    }
    let mut pre = CorpusStore::empty(PartitionTag::Pre);
    let mut post = CorpusStore::empty(PartitionTag::Post);
    for (id, record) in &store.records {
        let target = if record.year <= boundary_year { &mut pre } else { &mut post };
        target.records.insert(id.clone(), record.clone());
        if let Some(summary) = store.summaries.get(id) {
            target.summaries.insert(id.clone(), summary.clone());
        }
    }
    Ok((pre, post))
}

/// Wrapper around a post-partition store that records every read.
///
/// The store starts in the generation phase: any read before
/// [`GuardedStore::begin_evaluation`] is a contract violation. The evaluation
/// harness checks that the read log stays empty until scoring begins.
#[derive(Debug)]
pub struct GuardedStore {
    store: CorpusStore,
    evaluation_started: AtomicBool,
    reads: AtomicU64,
    read_log: Mutex<Vec<String>>,
}

impl GuardedStore {
    pub fn new(store: CorpusStore) -> Result<Self> {
        if store.partition_tag != PartitionTag::Post {
            return Err(PipelineError::Precondition(
                "guard_post_access requires a store tagged post".into(),
            ));
        }
        Ok(GuardedStore {
            store,
            evaluation_started: AtomicBool::new(false),
            reads: AtomicU64::new(0),
            read_log: Mutex::new(Vec::new()),
        })
    }

    /// Flip the guard out of the generation phase; reads are legal from here on.
    pub fn begin_evaluation(&self) {
        self.evaluation_started.store(true, Ordering::SeqCst);
    }

    /// Read the guarded records, logging the access under `tag`. Fails if the
    /// generation phase is still active.
    pub fn read_records(&self, tag: &str) -> Result<impl Iterator<Item = &PaperRecord>> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        self.read_log.lock().unwrap().push(tag.to_string());
        if !self.evaluation_started.load(Ordering::SeqCst) {
            return Err(PipelineError::GuardViolation { tag: tag.into() });
        }
        Ok(self.store.records.values())
    }

    /// Number of papers without counting as a read (needed for progress
    /// reporting before scoring begins).
    pub fn paper_count(&self) -> usize {
        self.store.records.len()
    }

    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::SeqCst)
    }

    pub fn read_log(&self) -> Vec<String> {
        self.read_log.lock().unwrap().clone()
    }
}

/// Convenience wrapper: guard a post store produced by [`split_by_year`].
pub fn guard_post_access(store: CorpusStore) -> Result<GuardedStore> {
    GuardedStore::new(store)
}
