//! Problem setting and inspiration retrieval: global map-reduce search over
//! community reports, existing methods from the paper graph, inspirational
//! methods from the citation graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{PipelineError, Result};
use crate::gateway::schema::ids;
use crate::gateway::{ChatRequest, Gateway, PromptKind};
use crate::graphs::{canonical_form, EdgeKind, GraphNode, KnowledgeGraph, NodeKind};

/// The user's research background: domain ⊕ problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchBrief {
    pub domain: String,
    pub problem: String,
    pub composed_query: String,
}

impl ResearchBrief {
    pub fn new(domain: &str, problem: &str) -> Result<Self> {
        if domain.trim().is_empty() || problem.trim().is_empty() {
            return Err(PipelineError::Precondition(
                "research brief requires non-empty domain and problem".into(),
            ));
        }
        Ok(ResearchBrief {
            domain: domain.trim().to_string(),
            problem: problem.trim().to_string(),
            composed_query: format!("Domain: {}\nProblem: {}", domain.trim(), problem.trim()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSetKind {
    Existing,
    Inspirational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub method_name: String,
    pub orientation: String,
    pub provenance: Vec<String>,
    pub relevance: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub via_synthetic: bool,
    /// Text embedded when this method is compared against ideas.
    #[serde(default)]
    pub embedding_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSet {
    pub kind: MethodSetKind,
    pub entries: Vec<MethodEntry>,
}

impl MethodSet {
    pub fn method_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.method_name.as_str()).collect()
    }

    /// Check the structural contract against the graph the set was retrieved
    /// from: names resolve to Method nodes, provenance papers carry
    /// uses-edges to them, and (for existing sets) orientations are set.
    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        if self.kind == MethodSetKind::Existing && self.entries.is_empty() {
            return Err(PipelineError::Validation("existing method set is empty".into()));
        }
        let paper_index = graph.paper_node_index();
        for entry in &self.entries {
            if self.kind == MethodSetKind::Existing && entry.orientation.trim().is_empty() {
                return Err(PipelineError::Validation(format!(
                    "method `{}` has no orientation",
                    entry.method_name
                )));
            }
            let node = graph.find_node(NodeKind::Method, &entry.method_name).ok_or_else(|| {
                PipelineError::Validation(format!(
                    "method `{}` does not resolve to a Method node",
                    entry.method_name
                ))
            })?;
            for pid in &entry.provenance {
                let paper_node = paper_index
                    .get(pid)
                    .cloned()
                    .or_else(|| graph.nodes.contains_key(pid).then(|| pid.clone()))
                    .ok_or_else(|| {
                        PipelineError::Validation(format!(
                            "provenance `{pid}` of `{}` is not a known paper",
                            entry.method_name
                        ))
                    })?;
                let has_uses = graph
                    .edges
                    .iter()
                    .any(|e| e.kind == EdgeKind::Uses && e.src == paper_node && e.dst == node.node_id);
                if !has_uses {
                    return Err(PipelineError::Validation(format!(
                        "provenance `{pid}` carries no uses-edge to `{}`",
                        entry.method_name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Existing,
    Inspiration,
}

impl SearchMode {
    fn as_str(self) -> &'static str {
        match self {
            SearchMode::Existing => "existing",
            SearchMode::Inspiration => "inspiration",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchQuery {
    pub text: String,
    pub domain: String,
    pub problem: String,
    pub mode: SearchMode,
    /// Candidate method names to confirm (inspiration mode only).
    pub candidates: Vec<String>,
}

/// One extracted finding from the map stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub method: String,
    pub score: f64,
    pub provenance: Vec<String>,
    pub community_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSearchResult {
    pub methods: Vec<MethodEntry>,
    pub findings: Vec<Finding>,
    /// Set when no report produced any relevant finding.
    pub no_relevant_findings: bool,
}

/// Map-reduce search over all community reports: each report is scored and
/// mined for findings (map, fan-out), findings are sorted by score and
/// truncated to `finding_budget`, then one reduce call synthesizes the
/// ranked method list with provenance preserved.
pub fn global_search(
    gateway: &Gateway,
    graph: &KnowledgeGraph,
    query: &SearchQuery,
    finding_budget: usize,
) -> Result<GlobalSearchResult> {
    if graph.reports.is_empty() {
        return Err(PipelineError::Retrieval(
            "graph has no community reports; run report generation first".into(),
        ));
    }

    let requests: Vec<ChatRequest> = graph
        .reports
        .iter()
        .map(|report| {
            ChatRequest::new(
                PromptKind::MapScore,
                ids::MAP_FINDINGS,
                format!(
                    "Score this community report for relevance to the query and extract \
                     findings (method, 0-100 score, provenance paper ids).\nQuery: {}\n\
                     Report `{}`:\n{}",
                    query.text, report.title, report.summary
                ),
            )
            .with_salient("community_id", report.community_id.clone())
            .with_salient("report_title", report.title.clone())
            .with_salient("report_summary", report.summary.clone())
            .with_salient("query_domain", query.domain.clone())
            .with_salient("query_problem", query.problem.clone())
            .with_salient("mode", query.mode.as_str())
            .with_salient("candidates", json!(query.candidates))
        })
        .collect();

    let mut findings: Vec<Finding> = Vec::new();
    let mut failures = 0usize;
    for (report, response) in graph.reports.iter().zip(gateway.complete_batch(&requests)) {
        match response {
            Ok(record) => {
                if let Some(raw) = record.value["findings"].as_array() {
                    for f in raw {
                        let score = f["score"].as_f64().unwrap_or(0.0);
                        if score <= 0.0 {
                            continue;
                        }
                        findings.push(Finding {
                            method: f["method"].as_str().unwrap_or_default().to_string(),
                            score,
                            provenance: f["provenance"]
                                .as_array()
                                .map(|a| {
                                    a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect()
                                })
                                .unwrap_or_default(),
                            community_id: report.community_id.clone(),
                        });
                    }
                }
            }
            Err(e) => {
                failures += 1;
                log::warn!("map call failed for community `{}`: {e}", report.community_id);
            }
        }
    }
    if failures == graph.reports.len() {
        return Err(PipelineError::Retrieval("every map call failed".into()));
    }

    // stable sort: descending score, ties keep report/finding order
    findings.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    findings.truncate(finding_budget);

    if findings.is_empty() {
        return Ok(GlobalSearchResult {
            methods: Vec::new(),
            findings,
            no_relevant_findings: true,
        });
    }

    let findings_json: Vec<Value> = findings
        .iter()
        .map(|f| {
            json!({
                "method": f.method,
                "score": f.score,
                "provenance": f.provenance,
                "community_id": f.community_id,
            })
        })
        .collect();
    let reduce_request = ChatRequest::new(
        PromptKind::ReduceSynthesize,
        ids::REDUCE_SYNTHESIS,
        format!(
            "Merge these ranked findings into a ranked method list with orientations and \
             provenance.\nQuery: {}\nFindings: {}",
            query.text,
            serde_json::to_string(&findings_json).unwrap_or_default()
        ),
    )
    .with_salient("mode", query.mode.as_str())
    .with_salient("query_domain", query.domain.clone())
    .with_salient("query_problem", query.problem.clone())
    .with_salient("findings", Value::Array(findings_json));
    let reduced = gateway.complete(&reduce_request)?;

    let methods: Vec<MethodEntry> = reduced.value["methods"]
        .as_array()
        .map(|arr| {
            arr.iter()
                .map(|m| MethodEntry {
                    method_name: m["name"].as_str().unwrap_or_default().to_string(),
                    orientation: m["orientation"].as_str().unwrap_or_default().to_string(),
                    provenance: m["provenance"]
                        .as_array()
                        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
                        .unwrap_or_default(),
                    relevance: m["relevance"].as_f64().unwrap_or(0.0),
                    via_synthetic: false,
                    embedding_text: String::new(),
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(GlobalSearchResult {
        methods,
        findings,
        no_relevant_findings: false,
    })
}

/// Retrieve existing methods E_m relevant to the brief from the paper graph.
pub fn retrieve_existing_methods(
    gateway: &Gateway,
    paper_graph: &KnowledgeGraph,
    brief: &ResearchBrief,
    finding_budget: usize,
) -> Result<MethodSet> {
    let query = SearchQuery {
        text: brief.composed_query.clone(),
        domain: brief.domain.clone(),
        problem: brief.problem.clone(),
        mode: SearchMode::Existing,
        candidates: Vec::new(),
    };
    let result = global_search(gateway, paper_graph, &query, finding_budget)?;
    if result.no_relevant_findings || result.methods.is_empty() {
        return Err(PipelineError::Retrieval(format!(
            "no existing methods found for problem `{}`; broaden the problem statement",
            brief.problem
        )));
    }

    let paper_index = paper_graph.paper_node_index();
    let mut entries = Vec::new();
    for mut entry in result.methods {
        let Some(node) = paper_graph.find_node(NodeKind::Method, &entry.method_name) else {
            log::warn!(
                "retrieved method `{}` does not resolve to a Method node; dropped",
                entry.method_name
            );
            continue;
        };
        entry.method_name = node.canonical_name.clone();
        entry.embedding_text = paper_graph.method_embedding_text(node);
        entry.provenance.retain(|pid| {
            let resolved = paper_index.get(pid);
            let keep = resolved.is_some_and(|paper_node| {
                paper_graph
                    .edges
                    .iter()
                    .any(|e| e.kind == EdgeKind::Uses && &e.src == paper_node && e.dst == node.node_id)
            });
            if !keep {
                log::warn!("provenance `{pid}` of `{}` not verifiable; dropped", node.canonical_name);
            }
            keep
        });
        if entry.provenance.is_empty() {
            log::warn!("method `{}` kept no verifiable provenance; dropped", node.canonical_name);
            continue;
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(PipelineError::Retrieval(
            "no retrieved method survived provenance verification".into(),
        ));
    }

    let set = MethodSet {
        kind: MethodSetKind::Existing,
        entries,
    };
    set.validate(paper_graph)?;
    Ok(set)
}

/// Papers reachable from `start` over cites-edges within `hop_budget` hops.
fn reachable_papers(
    graph: &KnowledgeGraph,
    start: &str,
    hop_budget: usize,
    include_synthetic: bool,
) -> BTreeMap<String, usize> {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for edge in &graph.edges {
        if edge.kind != EdgeKind::Cites || (edge.synthetic && !include_synthetic) {
            continue;
        }
        adjacency.entry(edge.src.as_str()).or_default().push(edge.dst.as_str());
        adjacency.entry(edge.dst.as_str()).or_default().push(edge.src.as_str());
    }
    let mut depths: BTreeMap<String, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    depths.insert(start.to_string(), 0);
    queue.push_back((start.to_string(), 0usize));
    while let Some((node, depth)) = queue.pop_front() {
        if depth == hop_budget {
            continue;
        }
        if let Some(neighbors) = adjacency.get(node.as_str()) {
            for &next in neighbors {
                if !depths.contains_key(next) {
                    depths.insert(next.to_string(), depth + 1);
                    queue.push_back((next.to_string(), depth + 1));
                }
            }
        }
    }
    depths
}

fn methods_of_paper<'g>(graph: &'g KnowledgeGraph, paper_node: &str) -> Vec<&'g GraphNode> {
    graph
        .edges_from(paper_node, EdgeKind::Uses)
        .iter()
        .filter_map(|e| graph.nodes.get(&e.dst))
        .collect()
}

/// Retrieve inspirational methods I_m: methods reachable from each existing
/// method through the citation graph within `hop_budget` Paper-mediated hops
/// (synthetic edges included), confirmed and scored by global search, then
/// deduplicated against E_m. An empty result is legal.
pub fn retrieve_inspirations(
    gateway: &Gateway,
    citation_graph: &KnowledgeGraph,
    brief: &ResearchBrief,
    existing: &MethodSet,
    hop_budget: usize,
    finding_budget: usize,
) -> Result<MethodSet> {
    if existing.entries.is_empty() {
        return Err(PipelineError::Precondition(
            "retrieve_inspirations requires a non-empty existing method set".into(),
        ));
    }
    if citation_graph.nodes.is_empty() {
        return Err(PipelineError::Precondition("citation graph is empty".into()));
    }

    let existing_names: BTreeSet<String> = existing
        .entries
        .iter()
        .map(|e| canonical_form(&e.method_name))
        .collect();

    // hop traversal: candidate methods per seed, with synthetic-only flags
    let mut candidate_info: BTreeMap<String, (bool, BTreeSet<String>)> = BTreeMap::new();
    let mut per_seed_candidates: Vec<(String, Vec<String>)> = Vec::new();
    for entry in &existing.entries {
        let Some(seed_node) = citation_graph.find_node(NodeKind::Method, &entry.method_name) else {
            log::warn!(
                "existing method `{}` not present in the citation graph; skipped",
                entry.method_name
            );
            continue;
        };
        let seed_papers: Vec<String> = citation_graph
            .edges_to(&seed_node.node_id, EdgeKind::Uses)
            .iter()
            .map(|e| e.src.clone())
            .collect();

        let mut seed_candidates: BTreeSet<String> = BTreeSet::new();
        for paper in &seed_papers {
            let with_synthetic = reachable_papers(citation_graph, paper, hop_budget, true);
            let real_only = reachable_papers(citation_graph, paper, hop_budget, false);
            for reached in with_synthetic.keys() {
                let via_synthetic_path = !real_only.contains_key(reached);
                for method in methods_of_paper(citation_graph, reached) {
                    let folded = canonical_form(&method.canonical_name);
                    if folded == canonical_form(&seed_node.canonical_name)
                        || existing_names.contains(&folded)
                    {
                        continue;
                    }
                    seed_candidates.insert(method.canonical_name.clone());
                    let info = candidate_info
                        .entry(method.canonical_name.clone())
                        .or_insert((true, BTreeSet::new()));
                    // reachable over real edges from any seed clears the flag
                    if !via_synthetic_path {
                        info.0 = false;
                    }
                    info.1.insert(reached.clone());
                }
            }
        }
        if !seed_candidates.is_empty() {
            per_seed_candidates.push((
                entry.method_name.clone(),
                seed_candidates.into_iter().collect(),
            ));
        }
    }

    if candidate_info.is_empty() {
        log::info!("no inspirational methods reachable within {hop_budget} hops");
        return Ok(MethodSet {
            kind: MethodSetKind::Inspirational,
            entries: Vec::new(),
        });
    }

    // confirm and score candidates with one global search per seed method
    let mut merged: BTreeMap<String, MethodEntry> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (seed_name, candidates) in &per_seed_candidates {
        let query = SearchQuery {
            text: format!("{}\nSeed method: {seed_name}", brief.composed_query),
            domain: brief.domain.clone(),
            problem: brief.problem.clone(),
            mode: SearchMode::Inspiration,
            candidates: candidates.clone(),
        };
        let result = global_search(gateway, citation_graph, &query, finding_budget)?;
        for entry in result.methods {
            let folded = canonical_form(&entry.method_name);
            if existing_names.contains(&folded) {
                continue;
            }
            let slot = merged.entry(folded.clone()).or_insert_with(|| {
                order.push(folded.clone());
                entry.clone()
            });
            slot.relevance = slot.relevance.max(entry.relevance);
            for p in entry.provenance {
                if !slot.provenance.contains(&p) {
                    slot.provenance.push(p);
                }
            }
        }
    }

    let mut entries = Vec::new();
    for folded in order {
        let mut entry = merged.remove(&folded).expect("ordered key present");
        let Some(node) = citation_graph.find_node(NodeKind::Method, &entry.method_name) else {
            log::warn!("inspirational method `{}` unresolvable; dropped", entry.method_name);
            continue;
        };
        entry.method_name = node.canonical_name.clone();
        entry.embedding_text = citation_graph.method_embedding_text(node);
        if let Some((synthetic_only, _)) = candidate_info.get(&node.canonical_name) {
            entry.via_synthetic = *synthetic_only;
        }
        entries.push(entry);
    }

    Ok(MethodSet {
        kind: MethodSetKind::Inspirational,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockBackend;
    use crate::gateway::BackendConfig;
    use crate::graphs::{
        detect_communities, generate_community_reports, node_id_for, GraphEdge, GraphKind,
    };
    use std::collections::BTreeSet;

    fn toy_gateway(seed: u64) -> Gateway {
        let cfg = BackendConfig::mock();
        Gateway::new(&cfg, Box::new(MockBackend::with_toy_profile(seed, cfg.embed_dim))).unwrap()
    }

    fn add_node(
        graph: &mut KnowledgeGraph,
        kind: NodeKind,
        name: &str,
        corpus_paper_id: Option<&str>,
    ) -> String {
        let id = node_id_for(kind, &canonical_form(name));
        graph.nodes.insert(
            id.clone(),
            GraphNode {
                node_id: id.clone(),
                kind,
                canonical_name: name.to_string(),
                aliases: [name.to_string()].into_iter().collect(),
                source_paper_ids: corpus_paper_id.iter().map(|s| s.to_string()).collect(),
                description: format!("{name} in context."),
                corpus_paper_id: corpus_paper_id.map(str::to_string),
            },
        );
        id
    }

    fn add_edge(graph: &mut KnowledgeGraph, src: &str, dst: &str, kind: EdgeKind, synthetic: bool) {
        graph.edges.insert(GraphEdge {
            src: src.to_string(),
            dst: dst.to_string(),
            kind,
            synthetic,
            provenance: "test".into(),
        });
    }

    /// p1 uses seed method; p1 –cites→ p2 (real) –cites→ p4 (real);
    /// p1 –cites→ p3 (synthetic only). Every paper has one method.
    fn citation_fixture(gw: &Gateway) -> (KnowledgeGraph, MethodSet) {
        let mut graph = KnowledgeGraph::empty(GraphKind::CitationGraph);
        let p1 = add_node(&mut graph, NodeKind::Paper, "Paper One", Some("p1"));
        let p2 = add_node(&mut graph, NodeKind::Paper, "Paper Two", Some("p2"));
        let p3 = add_node(&mut graph, NodeKind::Paper, "Paper Three", Some("p3"));
        let p4 = add_node(&mut graph, NodeKind::Paper, "Paper Four", Some("p4"));
        let seed = add_node(&mut graph, NodeKind::Method, "Seed Method", None);
        let m2 = add_node(&mut graph, NodeKind::Method, "Real Neighbor Method", None);
        let m3 = add_node(&mut graph, NodeKind::Method, "Synthetic Neighbor Method", None);
        let m4 = add_node(&mut graph, NodeKind::Method, "Two Hop Method", None);
        add_edge(&mut graph, &p1, &seed, EdgeKind::Uses, false);
        add_edge(&mut graph, &p2, &m2, EdgeKind::Uses, false);
        add_edge(&mut graph, &p3, &m3, EdgeKind::Uses, false);
        add_edge(&mut graph, &p4, &m4, EdgeKind::Uses, false);
        add_edge(&mut graph, &p1, &p2, EdgeKind::Cites, false);
        add_edge(&mut graph, &p2, &p4, EdgeKind::Cites, false);
        add_edge(&mut graph, &p1, &p3, EdgeKind::Cites, true);
        graph.validate().unwrap();

        graph.communities = detect_communities(&graph, 1.0, 7);
        graph.reports = generate_community_reports(gw, &graph, &graph.communities.clone()).unwrap();

        let existing = MethodSet {
            kind: MethodSetKind::Existing,
            entries: vec![MethodEntry {
                method_name: "Seed Method".into(),
                orientation: "Testing".into(),
                provenance: vec!["p1".into()],
                relevance: 100.0,
                via_synthetic: false,
                embedding_text: "Seed Method".into(),
            }],
        };
        (graph, existing)
    }

    #[test]
    fn brief_composes_domain_and_problem_verbatim() {
        let brief = ResearchBrief::new("network verification", "scalable network verification").unwrap();
        assert!(brief.composed_query.contains("network verification"));
        assert!(brief.composed_query.contains("scalable network verification"));
        assert!(ResearchBrief::new("", "p").is_err());
        assert!(ResearchBrief::new("d", " ").is_err());
    }

    #[test]
    fn inspirations_reach_real_and_synthetic_neighbors_with_flags() {
        let gw = toy_gateway(1);
        let (graph, existing) = citation_fixture(&gw);
        let brief = ResearchBrief::new("testing", "fixture problem").unwrap();
        let inspirations =
            retrieve_inspirations(&gw, &graph, &brief, &existing, 2, 50).unwrap();

        let names: BTreeSet<&str> = inspirations
            .entries
            .iter()
            .map(|e| e.method_name.as_str())
            .collect();
        assert!(names.contains("Real Neighbor Method"));
        assert!(names.contains("Synthetic Neighbor Method"));
        assert!(names.contains("Two Hop Method"), "2-hop method reachable");
        assert!(!names.contains("Seed Method"), "dedup against E_m");

        let by_name = |n: &str| {
            inspirations
                .entries
                .iter()
                .find(|e| e.method_name == n)
                .unwrap()
        };
        assert!(!by_name("Real Neighbor Method").via_synthetic);
        assert!(by_name("Synthetic Neighbor Method").via_synthetic);
    }

    #[test]
    fn hop_budget_one_excludes_two_hop_methods() {
        let gw = toy_gateway(1);
        let (graph, existing) = citation_fixture(&gw);
        let brief = ResearchBrief::new("testing", "fixture problem").unwrap();
        let inspirations =
            retrieve_inspirations(&gw, &graph, &brief, &existing, 1, 50).unwrap();
        let names: BTreeSet<&str> = inspirations
            .entries
            .iter()
            .map(|e| e.method_name.as_str())
            .collect();
        assert!(names.contains("Real Neighbor Method"));
        assert!(!names.contains("Two Hop Method"));
    }

    #[test]
    fn isolated_seed_paper_yields_empty_inspirations() {
        let gw = toy_gateway(1);
        let mut graph = KnowledgeGraph::empty(GraphKind::CitationGraph);
        let p1 = add_node(&mut graph, NodeKind::Paper, "Lonely Paper", Some("p1"));
        let seed = add_node(&mut graph, NodeKind::Method, "Seed Method", None);
        add_edge(&mut graph, &p1, &seed, EdgeKind::Uses, false);
        graph.communities = detect_communities(&graph, 1.0, 7);
        graph.reports =
            generate_community_reports(&gw, &graph, &graph.communities.clone()).unwrap();

        let existing = MethodSet {
            kind: MethodSetKind::Existing,
            entries: vec![MethodEntry {
                method_name: "Seed Method".into(),
                orientation: "Testing".into(),
                provenance: vec!["p1".into()],
                relevance: 100.0,
                via_synthetic: false,
                embedding_text: "Seed Method".into(),
            }],
        };
        let brief = ResearchBrief::new("testing", "fixture problem").unwrap();
        let inspirations =
            retrieve_inspirations(&gw, &graph, &brief, &existing, 2, 50).unwrap();
        assert!(inspirations.entries.is_empty());
    }

    #[test]
    fn map_ordering_puts_higher_scored_report_first() {
        let cfg = BackendConfig::mock();
        let backend = MockBackend::with_toy_profile(1, cfg.embed_dim);
        backend.set_responder(PromptKind::MapScore, |req| {
            let community = req.salient_str("community_id").unwrap_or_default();
            let (method, score) = if community == "c000" {
                ("Low Method", 60.0)
            } else {
                ("High Method", 80.0)
            };
            Ok(serde_json::json!({
                "findings": [{"method": method, "score": score, "provenance": ["p1"]}]
            }))
        });
        let gw = Gateway::new(&cfg, Box::new(backend)).unwrap();

        let mut graph = KnowledgeGraph::empty(GraphKind::CitationGraph);
        let p1 = add_node(&mut graph, NodeKind::Paper, "Paper One", Some("p1"));
        let p2 = add_node(&mut graph, NodeKind::Paper, "Paper Two", Some("p2"));
        let m1 = add_node(&mut graph, NodeKind::Method, "Low Method", None);
        let m2 = add_node(&mut graph, NodeKind::Method, "High Method", None);
        add_edge(&mut graph, &p1, &m1, EdgeKind::Uses, false);
        add_edge(&mut graph, &p2, &m2, EdgeKind::Uses, false);
        graph.communities = detect_communities(&graph, 1.0, 7);
        assert!(graph.communities.len() >= 2);
        graph.reports = generate_community_reports(&gw, &graph, &graph.communities.clone()).unwrap();

        let query = SearchQuery {
            text: "q".into(),
            domain: "d".into(),
            problem: "p".into(),
            mode: SearchMode::Existing,
            candidates: Vec::new(),
        };
        let result = global_search(&gw, &graph, &query, 50).unwrap();
        assert_eq!(result.findings[0].score, 80.0);
        assert_eq!(result.methods[0].method_name, "High Method");
    }

    #[test]
    fn all_zero_scores_produce_empty_result_marker() {
        let gw = toy_gateway(1);
        let (graph, _) = citation_fixture(&gw);
        let query = SearchQuery {
            text: "query about nothing".into(),
            domain: "unrelated".into(),
            problem: "problem that matches no report".into(),
            mode: SearchMode::Existing,
            candidates: Vec::new(),
        };
        let result = global_search(&gw, &graph, &query, 50).unwrap();
        assert!(result.no_relevant_findings);
        assert!(result.methods.is_empty());
    }

    #[test]
    fn search_requires_reports() {
        let gw = toy_gateway(1);
        let graph = KnowledgeGraph::empty(GraphKind::PaperGraph);
        let query = SearchQuery {
            text: "q".into(),
            domain: "d".into(),
            problem: "p".into(),
            mode: SearchMode::Existing,
            candidates: Vec::new(),
        };
        assert!(matches!(
            global_search(&gw, &graph, &query, 50),
            Err(PipelineError::Retrieval(_))
        ));
    }
}
