//! Time-split idea scoring: novelty against pre-dataset methods,
//! practicality against post-dataset methods, and the harmonic-mean quality
//! score, with report aggregation and the ablation comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, GuardedStore, PartitionTag};
use crate::error::{PipelineError, Result};
use crate::gateway::{cosine_similarity, EmbeddingVector, Gateway};
use crate::graphs::{build_paper_graph, KnowledgeGraph, NodeKind};
use crate::ideation::{idea_embedding_text, Idea};
use crate::summarizer::summarize_store;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestMatch {
    pub method_name: String,
    pub similarity: f64,
}

/// Scores for one idea under the time-split protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub idea_id: String,
    pub n_s: f64,
    pub p_s: f64,
    pub i_s: f64,
    pub n_above_threshold: usize,
    pub n_pre_methods: usize,
    pub best_post_match: BestMatch,
}

/// N_S = 1 − N_>t / N_pre, counting strict exceedances of the threshold.
pub fn novelty_score(
    idea_vector: &EmbeddingVector,
    pre_method_vectors: &[EmbeddingVector],
    t: f64,
) -> Result<(f64, usize)> {
    if pre_method_vectors.is_empty() {
        return Err(PipelineError::Precondition(
            "novelty score requires a non-empty pre-dataset method set".into(),
        ));
    }
    let mut above = 0usize;
    for vector in pre_method_vectors {
        if cosine_similarity(idea_vector, vector)? > t {
            above += 1;
        }
    }
    Ok((1.0 - above as f64 / pre_method_vectors.len() as f64, above))
}

/// P_S = max cosine similarity against the post-dataset methods, with the
/// argmax method identity.
pub fn practicality_score(
    idea_vector: &EmbeddingVector,
    post_methods: &[(String, EmbeddingVector)],
) -> Result<(f64, BestMatch)> {
    if post_methods.is_empty() {
        return Err(PipelineError::Precondition(
            "practicality score requires a non-empty post-dataset method set".into(),
        ));
    }
    let mut best = BestMatch {
        method_name: String::new(),
        similarity: f64::NEG_INFINITY,
    };
    for (name, vector) in post_methods {
        let similarity = cosine_similarity(idea_vector, vector)?;
        if similarity > best.similarity {
            best = BestMatch {
                method_name: name.clone(),
                similarity,
            };
        }
    }
    Ok((best.similarity, best))
}

/// I_S = harmonic mean of N_S and P_S. Negative inputs are clamped to 0
/// first; the result is 0 whenever either clamped input is 0.
pub fn quality_score(n_s: f64, p_s: f64) -> f64 {
    let n = n_s.max(0.0);
    let p = p_s.max(0.0);
    if n + p == 0.0 {
        0.0
    } else {
        2.0 * n * p / (n + p)
    }
}

/// Aggregation key and context for one evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub domain: String,
    pub backend: String,
}

/// One persisted scorecard row, tagged with its aggregation key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardEnvelope {
    pub domain: String,
    pub backend: String,
    #[serde(flatten)]
    pub card: ScoreCard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub domain: String,
    pub backend: String,
    pub mean_n_s: f64,
    pub mean_p_s: f64,
    pub mean_i_s: f64,
    pub idea_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub domain: String,
    pub backend: String,
    pub system_i_s: f64,
    pub baseline_i_s: f64,
    pub delta_abs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rel_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation_rows: Option<Vec<AblationRow>>,
}

/// Method names and embedding texts of every Method node in a graph.
pub fn graph_method_texts(graph: &KnowledgeGraph) -> Vec<(String, String)> {
    graph
        .nodes_of_kind(NodeKind::Method)
        .map(|n| (n.canonical_name.clone(), graph.method_embedding_text(n)))
        .collect()
}

/// Score every idea under the time-split protocol.
///
/// The pre-dataset methods are rebuilt from the pre store's summaries; the
/// post store is only touched through its guard, whose read log must be
/// empty when this operation starts (generation must not have seen post
/// data). Post papers are summarized and their methods extracted inside
/// this call, after `begin_evaluation` flips the guard.
pub fn evaluate_run(
    gateway: &Gateway,
    ideas: &[Idea],
    pre_store: &CorpusStore,
    post_guard: &GuardedStore,
    t: f64,
    meta: &RunMeta,
) -> Result<(Vec<CardEnvelope>, EvaluationReport)> {
    if ideas.is_empty() {
        return Err(PipelineError::Precondition("no ideas to evaluate".into()));
    }
    if post_guard.read_count() > 0 {
        return Err(PipelineError::Protocol(format!(
            "post-dataset guard recorded {} read(s) before evaluation began: {:?}",
            post_guard.read_count(),
            post_guard.read_log()
        )));
    }
    if pre_store.summaries.is_empty() {
        return Err(PipelineError::Precondition(
            "pre store carries no summaries; run summarization first".into(),
        ));
    }

    // pre-dataset methods: rebuild the paper graph from pre summaries only
    let pre_graph = build_paper_graph(gateway, pre_store)?;
    let pre_methods = graph_method_texts(&pre_graph);
    if pre_methods.is_empty() {
        return Err(PipelineError::Precondition(
            "pre-dataset produced no methods".into(),
        ));
    }

    // scoring begins: the guard may be read from here on
    post_guard.begin_evaluation();
    let mut post_store = CorpusStore::empty(PartitionTag::Full);
    for record in post_guard.read_records("evaluate:post-methods")? {
        post_store.records.insert(record.paper_id.clone(), record.clone());
    }
    let post_outputs = summarize_store(gateway, &post_store)?;
    post_store.attach_summaries(post_outputs.summaries)?;
    let post_graph = build_paper_graph(gateway, &post_store)?;
    let post_methods = graph_method_texts(&post_graph);
    if post_methods.is_empty() {
        return Err(PipelineError::Precondition(
            "post-dataset produced no methods".into(),
        ));
    }

    let idea_texts: Vec<String> = ideas.iter().map(idea_embedding_text).collect();
    let pre_texts: Vec<String> = pre_methods.iter().map(|(_, text)| text.clone()).collect();
    let post_texts: Vec<String> = post_methods.iter().map(|(_, text)| text.clone()).collect();
    let idea_vectors = gateway.embed_batch(&idea_texts)?;
    let pre_vectors = gateway.embed_batch(&pre_texts)?;
    let post_vectors = gateway.embed_batch(&post_texts)?;
    let post_named: Vec<(String, EmbeddingVector)> = post_methods
        .iter()
        .map(|(name, _)| name.clone())
        .zip(post_vectors)
        .collect();

    let mut cards = Vec::with_capacity(ideas.len());
    for (idea, vector) in ideas.iter().zip(&idea_vectors) {
        let (n_s, above) = novelty_score(vector, &pre_vectors, t)?;
        let (p_s, best) = practicality_score(vector, &post_named)?;
        cards.push(CardEnvelope {
            domain: meta.domain.clone(),
            backend: meta.backend.clone(),
            card: ScoreCard {
                idea_id: idea.idea_id.clone(),
                n_s,
                p_s,
                i_s: quality_score(n_s, p_s),
                n_above_threshold: above,
                n_pre_methods: pre_vectors.len(),
                best_post_match: best,
            },
        });
    }

    let report = EvaluationReport {
        rows: aggregate_rows(&cards),
        ablation_rows: None,
    };
    Ok((cards, report))
}

/// Mean scores per (domain, backend) cell.
pub fn aggregate_rows(cards: &[CardEnvelope]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, String), Vec<&ScoreCard>> = BTreeMap::new();
    for envelope in cards {
        groups
            .entry((envelope.domain.clone(), envelope.backend.clone()))
            .or_default()
            .push(&envelope.card);
    }
    groups
        .into_iter()
        .map(|((domain, backend), cards)| {
            let n = cards.len() as f64;
            ReportRow {
                domain,
                backend,
                mean_n_s: cards.iter().map(|c| c.n_s).sum::<f64>() / n,
                mean_p_s: cards.iter().map(|c| c.p_s).sum::<f64>() / n,
                mean_i_s: cards.iter().map(|c| c.i_s).sum::<f64>() / n,
                idea_count: cards.len(),
            }
        })
        .collect()
}

/// Per (domain, backend) cell: mean system quality vs mean baseline quality
/// with absolute and relative deltas. Keys must match exactly.
pub fn ablation_compare(
    system_cards: &[CardEnvelope],
    baseline_cards: &[CardEnvelope],
) -> Result<Vec<AblationRow>> {
    if system_cards.is_empty() || baseline_cards.is_empty() {
        return Err(PipelineError::Precondition(
            "ablation comparison requires non-empty card lists on both sides".into(),
        ));
    }
    let system_rows = aggregate_rows(system_cards);
    let baseline_rows = aggregate_rows(baseline_cards);
    let system_keys: BTreeMap<(String, String), &ReportRow> = system_rows
        .iter()
        .map(|r| ((r.domain.clone(), r.backend.clone()), r))
        .collect();
    let baseline_keys: BTreeMap<(String, String), &ReportRow> = baseline_rows
        .iter()
        .map(|r| ((r.domain.clone(), r.backend.clone()), r))
        .collect();

    let missing_in_baseline: Vec<String> = system_keys
        .keys()
        .filter(|k| !baseline_keys.contains_key(*k))
        .map(|(d, b)| format!("{d}/{b} (missing from baseline)"))
        .collect();
    let missing_in_system: Vec<String> = baseline_keys
        .keys()
        .filter(|k| !system_keys.contains_key(*k))
        .map(|(d, b)| format!("{d}/{b} (missing from system)"))
        .collect();
    if !missing_in_baseline.is_empty() || !missing_in_system.is_empty() {
        let mut all = missing_in_baseline;
        all.extend(missing_in_system);
        return Err(PipelineError::KeyMismatch(all.join(", ")));
    }

    Ok(system_keys
        .into_iter()
        .map(|(key, system)| {
            let baseline = baseline_keys[&key];
            let delta_abs = system.mean_i_s - baseline.mean_i_s;
            let delta_rel_pct = if baseline.mean_i_s.abs() > f64::EPSILON {
                Some(delta_abs / baseline.mean_i_s * 100.0)
            } else {
                None
            };
            AblationRow {
                domain: key.0,
                backend: key.1,
                system_i_s: system.mean_i_s,
                baseline_i_s: baseline.mean_i_s,
                delta_abs,
                delta_rel_pct,
            }
        })
        .collect())
}

/// Comma-separated form of the report (one row per domain × backend cell).
pub fn report_to_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("domain,backend,novelty,practicality,overall_quality,ideas\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{}\n",
            row.domain, row.backend, row.mean_n_s, row.mean_p_s, row.mean_i_s, row.idea_count
        ));
    }
    if let Some(ablation) = &report.ablation_rows {
        out.push_str("\ndomain,backend,system_quality,baseline_quality,delta_abs,delta_rel_pct\n");
        for row in ablation {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:+.4},{}\n",
                row.domain,
                row.backend,
                row.system_i_s,
                row.baseline_i_s,
                row.delta_abs,
                row.delta_rel_pct
                    .map(|p| format!("{p:+.1}%"))
                    .unwrap_or_else(|| "n/a".into())
            ));
        }
    }
    out
}

/// Text table with metrics as rows and domain × backend cells as columns.
pub fn report_to_table(report: &EvaluationReport) -> String {
    let headers: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} ({})", r.domain, r.backend))
        .collect();
    let width = headers
        .iter()
        .map(String::len)
        .chain([15])
        .max()
        .unwrap_or(15)
        .max(12);

    let mut out = String::new();
    out.push_str(&format!("{:<16}", "Metric"));
    for header in &headers {
        out.push_str(&format!(" | {header:>width$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(16 + headers.len() * (width + 3)));
    out.push('\n');
    for (label, pick) in [
        ("Novelty", 0usize),
        ("Practicality", 1),
        ("Overall Quality", 2),
        ("Ideas", 3),
    ] {
        out.push_str(&format!("{label:<16}"));
        for row in &report.rows {
            let cell = match pick {
                0 => format!("{:.3}", row.mean_n_s),
                1 => format!("{:.3}", row.mean_p_s),
                2 => format!("{:.3}", row.mean_i_s),
                _ => row.idea_count.to_string(),
            };
            out.push_str(&format!(" | {cell:>width$}"));
        }
        out.push('\n');
    }
    if let Some(ablation) = &report.ablation_rows {
        out.push('\n');
        out.push_str("Ablation (system vs baseline quality):\n");
        for row in ablation {
            out.push_str(&format!(
                "  {} ({}): {:.3} vs {:.3} ({:+.3}{})\n",
                row.domain,
                row.backend,
                row.system_i_s,
                row.baseline_i_s,
                row.delta_abs,
                row.delta_rel_pct
                    .map(|p| format!(", {p:+.1}%"))
                    .unwrap_or_default()
            ));
        }
    }
    out
}
