//! Typed knowledge graphs: the paper graph (Domain/Problem/Paper/Method with
//! has / is-solved-by / uses edges) and the citation graph (Paper/Method with
//! cites / uses edges), plus community detection, community reports, and
//! deterministic exports.

pub mod community;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::CorpusStore;
use crate::digest::{sha256_hex, short_id};
use crate::error::{PipelineError, Result};
use crate::gateway::schema::ids;
use crate::gateway::{ChatRequest, Gateway, PromptKind};
use crate::summarizer::{entity_request, CitationLink, ExtractedEntities, ReferenceRecord};

pub use community::detect_communities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    PaperGraph,
    CitationGraph,
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphKind::PaperGraph => write!(f, "paper_graph"),
            GraphKind::CitationGraph => write!(f, "citation_graph"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Domain,
    Problem,
    Paper,
    Method,
}

impl NodeKind {
    fn as_str(self) -> &'static str {
        match self {
            NodeKind::Domain => "Domain",
            NodeKind::Problem => "Problem",
            NodeKind::Paper => "Paper",
            NodeKind::Method => "Method",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Has,
    IsSolvedBy,
    Uses,
    Cites,
}

impl EdgeKind {
    /// (source kind, destination kind) this edge kind connects.
    pub fn endpoint_kinds(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::Has => (NodeKind::Domain, NodeKind::Problem),
            EdgeKind::IsSolvedBy => (NodeKind::Problem, NodeKind::Paper),
            EdgeKind::Uses => (NodeKind::Paper, NodeKind::Method),
            EdgeKind::Cites => (NodeKind::Paper, NodeKind::Paper),
        }
    }
}

impl GraphKind {
    pub fn permits_edge(self, kind: EdgeKind) -> bool {
        match self {
            GraphKind::PaperGraph => {
                matches!(kind, EdgeKind::Has | EdgeKind::IsSolvedBy | EdgeKind::Uses)
            }
            GraphKind::CitationGraph => matches!(kind, EdgeKind::Cites | EdgeKind::Uses),
        }
    }

    pub fn permits_node(self, kind: NodeKind) -> bool {
        match self {
            GraphKind::PaperGraph => true,
            GraphKind::CitationGraph => matches!(kind, NodeKind::Paper | NodeKind::Method),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
    pub source_paper_ids: BTreeSet<String>,
    /// Context sentence used as the node's embedding text complement.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// For Paper nodes that are corpus papers, their paper id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_paper_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
    pub synthetic: bool,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub community_id: String,
    pub member_node_ids: BTreeSet<String>,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub community_id: String,
    pub title: String,
    pub summary: String,
    pub member_methods: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub graph_kind: GraphKind,
    pub nodes: BTreeMap<String, GraphNode>,
    pub edges: BTreeSet<GraphEdge>,
    #[serde(default)]
    pub communities: Vec<Community>,
    #[serde(default)]
    pub reports: Vec<CommunityReport>,
}

/// Case-fold, trim and collapse whitespace.
pub fn canonical_form(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn node_id_for(kind: NodeKind, canonical: &str) -> String {
    short_id(format!("{}\x1f{canonical}", kind.as_str()).as_bytes())
}

impl KnowledgeGraph {
    pub fn empty(kind: GraphKind) -> Self {
        KnowledgeGraph {
            graph_kind: kind,
            nodes: BTreeMap::new(),
            edges: BTreeSet::new(),
            communities: Vec::new(),
            reports: Vec::new(),
        }
    }

    pub fn node(&self, node_id: &str) -> Option<&GraphNode> {
        self.nodes.get(node_id)
    }

    /// Find a node by kind and (canonicalized) name, checking aliases too.
    pub fn find_node(&self, kind: NodeKind, name: &str) -> Option<&GraphNode> {
        let target = canonical_form(name);
        if let Some(node) = self.nodes.get(&node_id_for(kind, &target)) {
            return Some(node);
        }
        self.nodes.values().find(|n| {
            n.kind == kind
                && (canonical_form(&n.canonical_name) == target
                    || n.aliases.iter().any(|a| canonical_form(a) == target))
        })
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    pub fn edges_from(&self, node_id: &str, kind: EdgeKind) -> Vec<&GraphEdge> {
        self.edges
            .iter()
            .filter(|e| e.src == node_id && e.kind == kind)
            .collect()
    }

    pub fn edges_to(&self, node_id: &str, kind: EdgeKind) -> Vec<&GraphEdge> {
        self.edges
            .iter()
            .filter(|e| e.dst == node_id && e.kind == kind)
            .collect()
    }

    /// Corpus paper id → node id, for nodes representing corpus papers.
    pub fn paper_node_index(&self) -> BTreeMap<String, String> {
        let mut index = BTreeMap::new();
        for node in self.nodes.values() {
            if let Some(pid) = &node.corpus_paper_id {
                index.insert(pid.clone(), node.node_id.clone());
            }
        }
        index
    }

    /// Embedding text for a Method node: canonical name plus its context
    /// sentence.
    pub fn method_embedding_text(&self, node: &GraphNode) -> String {
        if node.description.is_empty() {
            node.canonical_name.clone()
        } else {
            format!("{}\n{}", node.canonical_name, node.description)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen_names: BTreeSet<(NodeKind, String)> = BTreeSet::new();
        for node in self.nodes.values() {
            if !self.graph_kind.permits_node(node.kind) {
                return Err(PipelineError::Validation(format!(
                    "{} does not permit {:?} nodes (`{}`)",
                    self.graph_kind, node.kind, node.canonical_name
                )));
            }
            let key = (node.kind, canonical_form(&node.canonical_name));
            if !seen_names.insert(key) {
                return Err(PipelineError::Validation(format!(
                    "duplicate ({:?}, `{}`) node",
                    node.kind, node.canonical_name
                )));
            }
        }
        for edge in &self.edges {
            let src = self.nodes.get(&edge.src).ok_or_else(|| {
                PipelineError::Validation(format!("edge source `{}` missing", edge.src))
            })?;
            let dst = self.nodes.get(&edge.dst).ok_or_else(|| {
                PipelineError::Validation(format!("edge destination `{}` missing", edge.dst))
            })?;
            if !self.graph_kind.permits_edge(edge.kind) {
                return Err(PipelineError::Validation(format!(
                    "{} does not permit {:?} edges",
                    self.graph_kind, edge.kind
                )));
            }
            let (want_src, want_dst) = edge.kind.endpoint_kinds();
            if src.kind != want_src || dst.kind != want_dst {
                return Err(PipelineError::Validation(format!(
                    "{:?} edge requires {want_src:?}→{want_dst:?}, found {:?}→{:?} (`{}` → `{}`)",
                    edge.kind, src.kind, dst.kind, src.canonical_name, dst.canonical_name
                )));
            }
        }
        self.validate_communities()?;
        Ok(())
    }

    fn validate_communities(&self) -> Result<()> {
        if self.communities.is_empty() {
            return Ok(());
        }
        let mut covered: BTreeSet<&String> = BTreeSet::new();
        for community in &self.communities {
            for member in &community.member_node_ids {
                if !self.nodes.contains_key(member) {
                    return Err(PipelineError::Validation(format!(
                        "community `{}` references missing node `{member}`",
                        community.community_id
                    )));
                }
                if !covered.insert(member) {
                    return Err(PipelineError::Validation(format!(
                        "node `{member}` belongs to more than one community"
                    )));
                }
            }
        }
        if covered.len() != self.nodes.len() {
            return Err(PipelineError::Validation(format!(
                "communities cover {} of {} nodes",
                covered.len(),
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Count of edge-typing violations (0 on any graph built here; exposed
    /// so harnesses can scan without tripping on the first error).
    pub fn edge_typing_violations(&self) -> usize {
        self.edges
            .iter()
            .filter(|edge| {
                let Some(src) = self.nodes.get(&edge.src) else { return true };
                let Some(dst) = self.nodes.get(&edge.dst) else { return true };
                let (want_src, want_dst) = edge.kind.endpoint_kinds();
                src.kind != want_src || dst.kind != want_dst || !self.graph_kind.permits_edge(edge.kind)
            })
            .count()
    }

    /// Stable content digest over the exported node and edge serializations.
    pub fn digest(&self) -> String {
        let mut material = String::new();
        for node in self.nodes.values() {
            material.push_str(&serde_json::to_string(node).expect("node serializes"));
            material.push('\n');
        }
        for edge in &self.edges {
            material.push_str(&serde_json::to_string(edge).expect("edge serializes"));
            material.push('\n');
        }
        sha256_hex(material.as_bytes())
    }
}

/// Accumulates surface-form entities and edges, then canonicalizes names and
/// produces a validated graph. Nodes of the same kind merge when their
/// normalized names match exactly or their name embeddings agree at
/// `merge_threshold` cosine similarity.
pub(crate) struct GraphAssembler {
    kind: GraphKind,
    merge_threshold: f64,
    entities: Vec<PendingEntity>,
    edges: Vec<PendingEdge>,
}

struct PendingEntity {
    kind: NodeKind,
    surface: String,
    source_paper_id: Option<String>,
    description: String,
    corpus_paper_id: Option<String>,
}

struct PendingEdge {
    src: (NodeKind, String),
    dst: (NodeKind, String),
    kind: EdgeKind,
    synthetic: bool,
    provenance: String,
}

impl GraphAssembler {
    pub(crate) fn new(kind: GraphKind, merge_threshold: f64) -> Self {
        GraphAssembler {
            kind,
            merge_threshold,
            entities: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub(crate) fn add_entity(
        &mut self,
        kind: NodeKind,
        surface: &str,
        source_paper_id: Option<&str>,
        description: &str,
    ) {
        self.add_entity_full(kind, surface, source_paper_id, description, None);
    }

    pub(crate) fn add_entity_full(
        &mut self,
        kind: NodeKind,
        surface: &str,
        source_paper_id: Option<&str>,
        description: &str,
        corpus_paper_id: Option<&str>,
    ) {
        self.entities.push(PendingEntity {
            kind,
            surface: surface.trim().to_string(),
            source_paper_id: source_paper_id.map(str::to_string),
            description: description.to_string(),
            corpus_paper_id: corpus_paper_id.map(str::to_string),
        });
    }

    pub(crate) fn add_edge(
        &mut self,
        src: (NodeKind, &str),
        dst: (NodeKind, &str),
        kind: EdgeKind,
        synthetic: bool,
        provenance: &str,
    ) {
        self.edges.push(PendingEdge {
            src: (src.0, src.1.trim().to_string()),
            dst: (dst.0, dst.1.trim().to_string()),
            kind,
            synthetic,
            provenance: provenance.to_string(),
        });
    }

    pub(crate) fn assemble(self, gateway: &Gateway) -> Result<KnowledgeGraph> {
        // exact merge on normalized names
        let mut groups: BTreeMap<(NodeKind, String), Vec<&PendingEntity>> = BTreeMap::new();
        for entity in &self.entities {
            groups
                .entry((entity.kind, canonical_form(&entity.surface)))
                .or_default()
                .push(entity);
        }

        // embedding merge within each kind via union-find over group keys
        let keys: Vec<(NodeKind, String)> = groups.keys().cloned().collect();
        let mut parent: Vec<usize> = (0..keys.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let root = find(parent, parent[i]);
                parent[i] = root;
            }
            parent[i]
        }
        if keys.len() > 1 {
            let texts: Vec<String> = keys.iter().map(|(_, name)| name.clone()).collect();
            let vectors = gateway.embed_batch(&texts)?;
            for i in 0..keys.len() {
                for j in (i + 1)..keys.len() {
                    if keys[i].0 != keys[j].0 || keys[i].1 == keys[j].1 {
                        continue;
                    }
                    let cos = crate::gateway::cosine_similarity(&vectors[i], &vectors[j])?;
                    if cos >= self.merge_threshold {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            // lower index becomes the root for determinism
                            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                            parent[hi] = lo;
                        }
                    }
                }
            }
        }

        // materialize nodes per merge component
        let mut key_to_node: BTreeMap<(NodeKind, String), String> = BTreeMap::new();
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..keys.len() {
            let root = find(&mut parent, i);
            components.entry(root).or_default().push(i);
        }

        let mut graph = KnowledgeGraph::empty(self.kind);
        for indices in components.values() {
            let kind = keys[indices[0]].0;
            let root_form = indices
                .iter()
                .map(|&i| keys[i].1.clone())
                .min()
                .expect("component non-empty");

            let mut aliases: BTreeSet<String> = BTreeSet::new();
            let mut sources: BTreeSet<String> = BTreeSet::new();
            let mut descriptions: Vec<String> = Vec::new();
            let mut corpus_paper_id: Option<String> = None;
            for &i in indices {
                for entity in &groups[&keys[i]] {
                    aliases.insert(entity.surface.clone());
                    if let Some(s) = &entity.source_paper_id {
                        sources.insert(s.clone());
                    }
                    if !entity.description.is_empty() {
                        descriptions.push(entity.description.clone());
                    }
                    if let Some(pid) = &entity.corpus_paper_id {
                        corpus_paper_id = Some(match corpus_paper_id.take() {
                            Some(existing) if existing <= *pid => existing,
                            _ => pid.clone(),
                        });
                    }
                }
            }
            descriptions.sort();
            let canonical_name = aliases
                .iter()
                .filter(|a| canonical_form(a) == root_form)
                .min()
                .cloned()
                .unwrap_or_else(|| root_form.clone());
            let node_id = node_id_for(kind, &root_form);
            for &i in indices {
                key_to_node.insert(keys[i].clone(), node_id.clone());
            }
            graph.nodes.insert(
                node_id.clone(),
                GraphNode {
                    node_id,
                    kind,
                    canonical_name,
                    aliases,
                    source_paper_ids: sources,
                    description: descriptions.first().cloned().unwrap_or_default(),
                    corpus_paper_id,
                },
            );
        }

        for edge in &self.edges {
            let src_key = (edge.src.0, canonical_form(&edge.src.1));
            let dst_key = (edge.dst.0, canonical_form(&edge.dst.1));
            let src = key_to_node.get(&src_key).ok_or_else(|| {
                PipelineError::Validation(format!("edge source `{}` was never added", edge.src.1))
            })?;
            let dst = key_to_node.get(&dst_key).ok_or_else(|| {
                PipelineError::Validation(format!(
                    "edge destination `{}` was never added",
                    edge.dst.1
                ))
            })?;
            graph.edges.insert(GraphEdge {
                src: src.clone(),
                dst: dst.clone(),
                kind: edge.kind,
                synthetic: edge.synthetic,
                provenance: edge.provenance.clone(),
            });
        }

        graph.validate()?;
        Ok(graph)
    }
}

fn first_sentence(text: &str) -> String {
    text.split_inclusive('.').next().unwrap_or(text).trim().to_string()
}

/// Run entity extraction for every summary in the store; summaries whose
/// extraction cannot produce at least one problem and one method are skipped
/// with a warning.
fn extract_all(
    gateway: &Gateway,
    store: &CorpusStore,
) -> Result<BTreeMap<String, ExtractedEntities>> {
    let summaries: Vec<_> = store.summaries().collect();
    let requests: Vec<ChatRequest> = summaries.iter().map(|s| entity_request(s)).collect();
    let mut extractions = BTreeMap::new();
    for (summary, response) in summaries.iter().zip(gateway.complete_batch(&requests)) {
        match response {
            Ok(record) => {
                extractions.insert(summary.paper_id.clone(), record.deserialize()?);
            }
            Err(PipelineError::StructuredOutput { detail, .. }) => {
                log::warn!(
                    "entity extraction failed for `{}` ({detail}); summary skipped",
                    summary.paper_id
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(extractions)
}

/// Build the paper graph from the store's summaries: one Paper node per
/// summarized paper, Domain nodes from unified labels, Problem and Method
/// nodes from gateway extraction, edges typed Domain–has→Problem,
/// Problem–is_solved_by→Paper, Paper–uses→Method.
pub fn build_paper_graph(gateway: &Gateway, store: &CorpusStore) -> Result<KnowledgeGraph> {
    if store.summaries.is_empty() {
        return Err(PipelineError::Precondition(
            "build_paper_graph requires at least one summary".into(),
        ));
    }
    let extractions = extract_all(gateway, store)?;
    let mut assembler = GraphAssembler::new(GraphKind::PaperGraph, 0.95);

    for summary in store.summaries() {
        let Some(entities) = extractions.get(&summary.paper_id) else { continue };
        let title = store
            .records
            .get(&summary.paper_id)
            .map(|r| r.title.as_str())
            .unwrap_or(&summary.paper_id);
        let pid = summary.paper_id.as_str();
        let design_sentence = first_sentence(&summary.design);

        assembler.add_entity(NodeKind::Domain, &summary.domain_unified, Some(pid), "");
        assembler.add_entity_full(NodeKind::Paper, title, Some(pid), &design_sentence, Some(pid));
        for problem in &entities.problems {
            assembler.add_entity(NodeKind::Problem, problem, Some(pid), "");
            assembler.add_edge(
                (NodeKind::Domain, &summary.domain_unified),
                (NodeKind::Problem, problem),
                EdgeKind::Has,
                false,
                pid,
            );
            assembler.add_edge(
                (NodeKind::Problem, problem),
                (NodeKind::Paper, title),
                EdgeKind::IsSolvedBy,
                false,
                pid,
            );
        }
        for method in &entities.methods {
            assembler.add_entity(NodeKind::Method, method, Some(pid), &design_sentence);
            assembler.add_edge(
                (NodeKind::Paper, title),
                (NodeKind::Method, method),
                EdgeKind::Uses,
                false,
                pid,
            );
        }
    }
    assembler.assemble(gateway)
}

/// Build the citation graph: Paper nodes for corpus papers and sampled
/// references, Method nodes from design extractions and reference method
/// summaries, cites-edges for sampled references plus flagged synthetic
/// links, uses-edges from papers to their methods.
pub fn build_citation_graph(
    gateway: &Gateway,
    store: &CorpusStore,
    references: &[ReferenceRecord],
    synthetic_links: &[CitationLink],
) -> Result<KnowledgeGraph> {
    let extractions = extract_all(gateway, store)?;
    let mut assembler = GraphAssembler::new(GraphKind::CitationGraph, 0.95);

    let mut titles: BTreeMap<&str, &str> = BTreeMap::new();
    for record in store.records() {
        titles.insert(&record.paper_id, &record.title);
    }

    for summary in store.summaries() {
        let Some(entities) = extractions.get(&summary.paper_id) else { continue };
        let pid = summary.paper_id.as_str();
        let title = titles.get(pid).copied().unwrap_or(pid);
        let design_sentence = first_sentence(&summary.design);
        assembler.add_entity_full(NodeKind::Paper, title, Some(pid), &design_sentence, Some(pid));
        for method in &entities.methods {
            assembler.add_entity(NodeKind::Method, method, Some(pid), &design_sentence);
            assembler.add_edge(
                (NodeKind::Paper, title),
                (NodeKind::Method, method),
                EdgeKind::Uses,
                false,
                pid,
            );
        }
    }

    for reference in references {
        let src_pid = reference.paper_id.as_str();
        let Some(src_title) = titles.get(src_pid).copied() else {
            return Err(PipelineError::DanglingLink {
                src: src_pid.to_string(),
                target: reference.external_id.clone(),
            });
        };
        assembler.add_entity(NodeKind::Paper, &reference.title, Some(src_pid), "");
        assembler.add_edge(
            (NodeKind::Paper, src_title),
            (NodeKind::Paper, &reference.title),
            EdgeKind::Cites,
            false,
            src_pid,
        );
        if !reference.method_name.is_empty() {
            assembler.add_entity(
                NodeKind::Method,
                &reference.method_name,
                Some(src_pid),
                &first_sentence(&reference.method_summary),
            );
            assembler.add_edge(
                (NodeKind::Paper, &reference.title),
                (NodeKind::Method, &reference.method_name),
                EdgeKind::Uses,
                false,
                src_pid,
            );
        }
    }

    for link in synthetic_links {
        let src_title = titles.get(link.src_paper_id.as_str()).copied().ok_or_else(|| {
            PipelineError::DanglingLink {
                src: link.src_paper_id.clone(),
                target: link.dst_key.clone(),
            }
        })?;
        let dst_title = titles.get(link.dst_key.as_str()).copied().ok_or_else(|| {
            PipelineError::DanglingLink {
                src: link.src_paper_id.clone(),
                target: link.dst_key.clone(),
            }
        })?;
        assembler.add_edge(
            (NodeKind::Paper, src_title),
            (NodeKind::Paper, dst_title),
            EdgeKind::Cites,
            true,
            &link.src_paper_id,
        );
    }

    assembler.assemble(gateway)
}

/// Generate one report per community through the gateway. A failed report
/// degrades (title = community id, summary = concatenated member names)
/// instead of failing the run.
pub fn generate_community_reports(
    gateway: &Gateway,
    graph: &KnowledgeGraph,
    communities: &[Community],
) -> Result<Vec<CommunityReport>> {
    {
        let mut probe = graph.clone();
        probe.communities = communities.to_vec();
        probe.validate_communities()?;
    }

    let requests: Vec<ChatRequest> = communities
        .iter()
        .map(|community| report_request(graph, community))
        .collect();
    let mut reports = Vec::with_capacity(communities.len());
    for (community, response) in communities.iter().zip(gateway.complete_batch(&requests)) {
        let member_methods: Vec<String> = community
            .member_node_ids
            .iter()
            .filter_map(|id| graph.nodes.get(id))
            .filter(|n| n.kind == NodeKind::Method)
            .map(|n| n.canonical_name.clone())
            .collect();
        match response {
            Ok(record) => reports.push(CommunityReport {
                community_id: community.community_id.clone(),
                title: record.value["title"].as_str().unwrap_or_default().to_string(),
                summary: record.value["summary"].as_str().unwrap_or_default().to_string(),
                member_methods,
                degraded: false,
            }),
            Err(e) => {
                log::warn!(
                    "report generation failed for `{}` ({e}); emitting degraded report",
                    community.community_id
                );
                let names: Vec<String> = community
                    .member_node_ids
                    .iter()
                    .filter_map(|id| graph.nodes.get(id))
                    .map(|n| n.canonical_name.clone())
                    .collect();
                reports.push(CommunityReport {
                    community_id: community.community_id.clone(),
                    title: community.community_id.clone(),
                    summary: names.join("; "),
                    member_methods,
                    degraded: true,
                });
            }
        }
    }
    Ok(reports)
}

fn report_request(graph: &KnowledgeGraph, community: &Community) -> ChatRequest {
    let mut members = Vec::new();
    for node_id in &community.member_node_ids {
        let Some(node) = graph.nodes.get(node_id) else { continue };
        let mut problems: Vec<String> = Vec::new();
        let mut methods: Vec<String> = Vec::new();
        if node.kind == NodeKind::Paper {
            problems = graph
                .edges_to(node_id, EdgeKind::IsSolvedBy)
                .iter()
                .filter_map(|e| graph.nodes.get(&e.src))
                .map(|n| n.canonical_name.clone())
                .collect();
            methods = graph
                .edges_from(node_id, EdgeKind::Uses)
                .iter()
                .filter_map(|e| graph.nodes.get(&e.dst))
                .map(|n| n.canonical_name.clone())
                .collect();
            problems.sort();
            problems.dedup();
            methods.sort();
            methods.dedup();
        }
        members.push(json!({
            "node_id": node.node_id,
            "kind": format!("{:?}", node.kind),
            "name": node.canonical_name,
            "paper_id": node.corpus_paper_id.clone().unwrap_or_default(),
            "problems": problems,
            "methods": methods,
        }));
    }
    ChatRequest::new(
        PromptKind::Report,
        ids::COMMUNITY_REPORT,
        format!(
            "Write a short report for graph community `{}`: what connects its members, which \
             problems appear, and which methods are used.\nMembers: {}",
            community.community_id,
            serde_json::to_string(&members).unwrap_or_default()
        ),
    )
    .with_salient("community_id", community.community_id.clone())
    .with_salient("graph_kind", graph.graph_kind.to_string())
    .with_salient("members", serde_json::Value::Array(members))
}

/// Write nodes and edges (and communities/reports when present) as sorted
/// JSONL files under `dir`. Byte-deterministic for a fixed graph.
pub fn export_graph(graph: &KnowledgeGraph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    crate::jsonl::write_jsonl(&dir.join("nodes.jsonl"), graph.nodes.values())?;
    crate::jsonl::write_jsonl(&dir.join("edges.jsonl"), graph.edges.iter())?;
    if !graph.communities.is_empty() {
        crate::jsonl::write_jsonl(&dir.join("communities.jsonl"), graph.communities.iter())?;
    }
    if !graph.reports.is_empty() {
        crate::jsonl::write_jsonl(&dir.join("reports.jsonl"), graph.reports.iter())?;
    }
    Ok(())
}

/// Inverse of [`export_graph`].
pub fn load_graph(kind: GraphKind, dir: &Path) -> Result<KnowledgeGraph> {
    let nodes: Vec<GraphNode> = crate::jsonl::read_jsonl(&dir.join("nodes.jsonl"))?;
    let edges: Vec<GraphEdge> = crate::jsonl::read_jsonl(&dir.join("edges.jsonl"))?;
    let mut graph = KnowledgeGraph::empty(kind);
    for node in nodes {
        graph.nodes.insert(node.node_id.clone(), node);
    }
    graph.edges = edges.into_iter().collect();
    let communities_path = dir.join("communities.jsonl");
    if communities_path.exists() {
        graph.communities = crate::jsonl::read_jsonl(&communities_path)?;
    }
    let reports_path = dir.join("reports.jsonl");
    if reports_path.exists() {
        graph.reports = crate::jsonl::read_jsonl(&reports_path)?;
    }
    graph.validate()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PaperRecord, PaperSummary, PartitionTag, RawReference};
    use crate::gateway::mock::MockBackend;
    use crate::gateway::BackendConfig;

    fn toy_gateway(seed: u64) -> Gateway {
        let cfg = BackendConfig::mock();
        Gateway::new(&cfg, Box::new(MockBackend::with_toy_profile(seed, cfg.embed_dim))).unwrap()
    }

    fn verification_store() -> CorpusStore {
        let mut store = CorpusStore::empty(PartitionTag::Full);
        for (id, title, design, problem) in [
            (
                "t01",
                "Scaling Data-Plane Verification with Partitioned Equivalence Analysis",
                "The system applies graph partitioning and clustered analysis over forwarding state.",
                "The obstacle is scalable network verification of large forwarding tables.",
            ),
            (
                "t02",
                "Compositional Reasoning for Control-Plane Correctness",
                "The design performs modular and compositional verification of configuration modules.",
                "The bottleneck is scalable network verification across thousands of routers.",
            ),
        ] {
            store.records.insert(
                id.to_string(),
                PaperRecord {
                    paper_id: id.into(),
                    title: title.into(),
                    venue: "NetSys".into(),
                    year: 2022,
                    abstract_text: "abstract".into(),
                    body_text: String::new(),
                    references: vec![RawReference::new("A. B. Cited Work. Venue, 2019.")],
                },
            );
            store
                .attach_summaries(vec![PaperSummary {
                    paper_id: id.into(),
                    domain_raw: "network verification".into(),
                    domain_unified: "network verification".into(),
                    background: "Operators need machine-checked guarantees.".into(),
                    problem: problem.into(),
                    design: design.into(),
                }])
                .unwrap();
        }
        store
    }

    #[test]
    fn paper_graph_has_expected_shape() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let graph = build_paper_graph(&gw, &store).unwrap();

        // shared domain and problem, two papers, two methods
        assert_eq!(graph.nodes_of_kind(NodeKind::Domain).count(), 1);
        assert_eq!(graph.nodes_of_kind(NodeKind::Problem).count(), 1);
        assert_eq!(graph.nodes_of_kind(NodeKind::Paper).count(), 2);
        assert_eq!(graph.nodes_of_kind(NodeKind::Method).count(), 2);
        assert_eq!(graph.edge_typing_violations(), 0);

        // the triple chain exists: domain –has→ problem –is_solved_by→ paper –uses→ method
        let domain = graph.find_node(NodeKind::Domain, "network verification").unwrap();
        let problem = graph.find_node(NodeKind::Problem, "scalable network verification").unwrap();
        let paper = graph
            .find_node(NodeKind::Paper, "Scaling Data-Plane Verification with Partitioned Equivalence Analysis")
            .unwrap();
        let method = graph
            .find_node(NodeKind::Method, "Graph Partitioning and Clustered Analysis")
            .unwrap();
        assert!(graph.edges.iter().any(|e| e.kind == EdgeKind::Has
            && e.src == domain.node_id
            && e.dst == problem.node_id));
        assert!(graph.edges.iter().any(|e| e.kind == EdgeKind::IsSolvedBy
            && e.src == problem.node_id
            && e.dst == paper.node_id));
        assert!(graph.edges.iter().any(|e| e.kind == EdgeKind::Uses
            && e.src == paper.node_id
            && e.dst == method.node_id));

        // the shared domain keeps one has-edge per evidencing paper (distinct provenance)
        let has_edges = graph.edges_to(&problem.node_id, EdgeKind::Has);
        assert_eq!(has_edges.len(), 2);
        let provenances: BTreeSet<&String> = has_edges.iter().map(|e| &e.provenance).collect();
        assert_eq!(provenances.len(), 2);
        assert_eq!(graph.edges_from(&problem.node_id, EdgeKind::IsSolvedBy).len(), 2);
    }

    #[test]
    fn single_summary_yields_four_nodes_three_edges() {
        let gw = toy_gateway(1);
        let mut store = verification_store();
        store.records.remove("t02");
        store.summaries.remove("t02");
        let graph = build_paper_graph(&gw, &store).unwrap();
        assert_eq!(graph.nodes.len(), 4);
        assert_eq!(graph.edges.len(), 3);
    }

    #[test]
    fn export_reload_roundtrip_and_deterministic_bytes() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let graph = build_paper_graph(&gw, &store).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        export_graph(&graph, &a).unwrap();
        export_graph(&graph, &b).unwrap();
        assert_eq!(
            std::fs::read(a.join("nodes.jsonl")).unwrap(),
            std::fs::read(b.join("nodes.jsonl")).unwrap()
        );
        assert_eq!(
            std::fs::read(a.join("edges.jsonl")).unwrap(),
            std::fs::read(b.join("edges.jsonl")).unwrap()
        );

        let reloaded = load_graph(GraphKind::PaperGraph, &a).unwrap();
        assert_eq!(reloaded, graph);
    }

    #[test]
    fn canonicalization_is_idempotent_across_rebuild() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let graph = build_paper_graph(&gw, &store).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, dir.path()).unwrap();
        let reloaded = load_graph(GraphKind::PaperGraph, dir.path()).unwrap();
        assert_eq!(reloaded.nodes.len(), graph.nodes.len());
        assert_eq!(reloaded.digest(), graph.digest());
    }

    #[test]
    fn exact_duplicate_names_merge_casefolded() {
        let gw = toy_gateway(1);
        let mut assembler = GraphAssembler::new(GraphKind::CitationGraph, 0.95);
        assembler.add_entity(NodeKind::Method, "Graph  Partitioning", Some("a"), "");
        assembler.add_entity(NodeKind::Method, "graph partitioning", Some("b"), "");
        let graph = assembler.assemble(&gw).unwrap();
        assert_eq!(graph.nodes.len(), 1);
        let node = graph.nodes.values().next().unwrap();
        assert_eq!(node.aliases.len(), 2);
        assert_eq!(node.source_paper_ids.len(), 2);
    }

    #[test]
    fn empty_graph_exports_valid_empty_files() {
        let graph = KnowledgeGraph::empty(GraphKind::PaperGraph);
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, dir.path()).unwrap();
        let reloaded = load_graph(GraphKind::PaperGraph, dir.path()).unwrap();
        assert!(reloaded.nodes.is_empty());
        assert!(reloaded.edges.is_empty());
    }

    #[test]
    fn citation_graph_degrees_and_typing() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let references = vec![
            ReferenceRecord {
                paper_id: "t01".into(),
                ref_text: "P. Stone. Spectral Methods for Graph Partitioning. J., 2019.".into(),
                external_id: "e1".into(),
                title: "Spectral Methods for Graph Partitioning and Clustering".into(),
                abstract_text: "Partitioning with guarantees.".into(),
                method_name: "Graph Partitioning and Clustering".into(),
                method_summary: "Core method: Graph Partitioning and Clustering.".into(),
            },
            ReferenceRecord {
                paper_id: "t01".into(),
                ref_text: "R. Vega. GNNs for Modeling. L4S, 2020.".into(),
                external_id: "e2".into(),
                title: "Graph Neural Networks for Data-Driven Network Modeling".into(),
                abstract_text: "Graph neural networks model networks.".into(),
                method_name: "GNNs for Network Modeling".into(),
                method_summary: "Core method: GNNs for Network Modeling.".into(),
            },
        ];
        let links = vec![CitationLink {
            src_paper_id: "t01".into(),
            dst_key: "t02".into(),
            synthetic: true,
            method_summary: String::new(),
        }];
        let graph = build_citation_graph(&gw, &store, &references, &links).unwrap();
        assert_eq!(graph.edge_typing_violations(), 0);

        let t01 = graph
            .find_node(NodeKind::Paper, "Scaling Data-Plane Verification with Partitioned Equivalence Analysis")
            .unwrap();
        let cites = graph.edges_from(&t01.node_id, EdgeKind::Cites);
        assert_eq!(cites.len(), 3);
        assert_eq!(cites.iter().filter(|e| e.synthetic).count(), 1);
        assert_eq!(cites.iter().filter(|e| !e.synthetic).count(), 2);
    }

    #[test]
    fn citation_graph_rejects_dangling_synthetic_target() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let links = vec![CitationLink {
            src_paper_id: "t01".into(),
            dst_key: "missing-paper".into(),
            synthetic: true,
            method_summary: String::new(),
        }];
        let err = build_citation_graph(&gw, &store, &[], &links).unwrap_err();
        assert!(matches!(err, PipelineError::DanglingLink { .. }));
    }

    #[test]
    fn reports_cover_every_community_and_degrade_on_failure() {
        let gw = toy_gateway(1);
        let store = verification_store();
        let graph = build_paper_graph(&gw, &store).unwrap();
        let communities = detect_communities(&graph, 1.0, 7);
        let reports = generate_community_reports(&gw, &graph, &communities).unwrap();
        assert_eq!(reports.len(), communities.len());
        for (community, report) in communities.iter().zip(&reports) {
            assert!(!report.degraded);
            let methods_in_community = community
                .member_node_ids
                .iter()
                .filter(|id| graph.nodes[*id].kind == NodeKind::Method)
                .count();
            assert_eq!(report.member_methods.len(), methods_in_community);
        }

        // rig every report call to fail: degraded reports keep the run alive
        let cfg = BackendConfig::mock();
        let backend = MockBackend::with_toy_profile(1, cfg.embed_dim);
        for _ in 0..(communities.len() * (cfg.max_retries as usize + 1)) {
            backend.rig_raw(PromptKind::Report, "not json");
        }
        let rigged = Gateway::new(&cfg, Box::new(backend)).unwrap();
        let degraded = generate_community_reports(&rigged, &graph, &communities).unwrap();
        assert!(degraded.iter().all(|r| r.degraded));
        assert!(degraded.iter().all(|r| !r.summary.is_empty()));
    }

    #[test]
    fn validate_rejects_wrong_endpoint_kinds() {
        let mut graph = KnowledgeGraph::empty(GraphKind::PaperGraph);
        for (kind, name) in [(NodeKind::Domain, "d"), (NodeKind::Paper, "p")] {
            let id = node_id_for(kind, name);
            graph.nodes.insert(
                id.clone(),
                GraphNode {
                    node_id: id,
                    kind,
                    canonical_name: name.into(),
                    aliases: BTreeSet::new(),
                    source_paper_ids: BTreeSet::new(),
                    description: String::new(),
                    corpus_paper_id: None,
                },
            );
        }
        graph.edges.insert(GraphEdge {
            src: node_id_for(NodeKind::Domain, "d"),
            dst: node_id_for(NodeKind::Paper, "p"),
            kind: EdgeKind::Has,
            synthetic: false,
            provenance: "x".into(),
        });
        assert!(graph.validate().is_err());
        assert_eq!(graph.edge_typing_violations(), 1);

        // cites edges are not allowed in the paper graph at all
        let mut citation_in_paper = KnowledgeGraph::empty(GraphKind::PaperGraph);
        let pid = node_id_for(NodeKind::Paper, "p");
        citation_in_paper.nodes.insert(
            pid.clone(),
            GraphNode {
                node_id: pid.clone(),
                kind: NodeKind::Paper,
                canonical_name: "p".into(),
                aliases: BTreeSet::new(),
                source_paper_ids: BTreeSet::new(),
                description: String::new(),
                corpus_paper_id: None,
            },
        );
        citation_in_paper.edges.insert(GraphEdge {
            src: pid.clone(),
            dst: pid,
            kind: EdgeKind::Cites,
            synthetic: false,
            provenance: "x".into(),
        });
        assert!(citation_in_paper.validate().is_err());
    }
}
