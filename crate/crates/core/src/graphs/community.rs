//! Modularity-based community detection over the undirected projection of a
//! knowledge graph: Louvain local moving with graph aggregation, seeded for
//! determinism. Neighbor communities are scanned in sorted order and moves
//! require strict gain, so a fixed seed always yields the same partition.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{Community, KnowledgeGraph};

const MAX_PASSES_PER_LEVEL: usize = 16;
const MIN_MODULARITY_GAIN: f64 = 1e-7;

/// Undirected weighted adjacency. Parallel edges accumulate weight.
#[derive(Debug, Clone)]
struct Projection {
    adjacency: Vec<BTreeMap<usize, f64>>,
    /// Sum of all degrees (2m).
    total_weight: f64,
    /// Original node indices folded into each current node.
    members: Vec<Vec<usize>>,
}

impl Projection {
    fn from_graph(graph: &KnowledgeGraph) -> (Vec<String>, Self) {
        let node_ids: Vec<String> = graph.nodes.keys().cloned().collect();
        let index: BTreeMap<&String, usize> =
            node_ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let mut adjacency = vec![BTreeMap::new(); node_ids.len()];
        let mut total_weight = 0.0;
        for edge in &graph.edges {
            let (Some(&u), Some(&v)) = (index.get(&edge.src), index.get(&edge.dst)) else {
                continue;
            };
            if u == v {
                continue;
            }
            *adjacency[u].entry(v).or_insert(0.0) += 1.0;
            *adjacency[v].entry(u).or_insert(0.0) += 1.0;
            total_weight += 2.0;
        }
        let members = (0..node_ids.len()).map(|i| vec![i]).collect();
        (
            node_ids,
            Projection {
                adjacency,
                total_weight,
                members,
            },
        )
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    fn degree(&self, node: usize) -> f64 {
        self.adjacency[node].values().sum()
    }

    /// Collapse communities into single nodes, accumulating edge weights.
    fn aggregate(&self, node_to_comm: &[usize]) -> Projection {
        let mut comm_ids: Vec<usize> = node_to_comm.to_vec();
        comm_ids.sort_unstable();
        comm_ids.dedup();
        let renumber: BTreeMap<usize, usize> =
            comm_ids.iter().enumerate().map(|(new, &old)| (old, new)).collect();

        let mut adjacency = vec![BTreeMap::new(); comm_ids.len()];
        let mut members = vec![Vec::new(); comm_ids.len()];
        for node in 0..self.len() {
            let new_node = renumber[&node_to_comm[node]];
            members[new_node].extend(self.members[node].iter().copied());
            for (&neighbor, &weight) in &self.adjacency[node] {
                let new_neighbor = renumber[&node_to_comm[neighbor]];
                if new_neighbor != new_node {
                    *adjacency[new_node].entry(new_neighbor).or_insert(0.0) += weight;
                }
            }
        }
        for m in &mut members {
            m.sort_unstable();
        }
        Projection {
            adjacency,
            total_weight: self.total_weight,
            members,
        }
    }

    /// Newman–Girvan modularity Q = Σ_c [ L_c/m − γ·(k_c/2m)² ].
    fn modularity(&self, node_to_comm: &[usize], resolution: f64) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        let m = self.total_weight / 2.0;
        let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
        let mut degrees: BTreeMap<usize, f64> = BTreeMap::new();
        for node in 0..self.len() {
            let comm = node_to_comm[node];
            *degrees.entry(comm).or_insert(0.0) += self.degree(node);
            for (&neighbor, &weight) in &self.adjacency[node] {
                if node_to_comm[neighbor] == comm && node <= neighbor {
                    *internal.entry(comm).or_insert(0.0) += weight;
                }
            }
        }
        degrees
            .iter()
            .map(|(comm, &k_c)| {
                let l_c = internal.get(comm).copied().unwrap_or(0.0);
                l_c / m - resolution * (k_c / (2.0 * m)).powi(2)
            })
            .sum()
    }
}

/// One Louvain level: move nodes greedily until no strict modularity gain.
/// Returns whether any node moved.
fn one_level(
    projection: &Projection,
    node_to_comm: &mut [usize],
    resolution: f64,
    rng: &mut ChaCha20Rng,
) -> bool {
    let two_m = projection.total_weight;
    if two_m == 0.0 {
        return false;
    }
    let mut community_degrees: BTreeMap<usize, f64> = BTreeMap::new();
    for (node, &comm) in node_to_comm.iter().enumerate() {
        *community_degrees.entry(comm).or_insert(0.0) += projection.degree(node);
    }

    let mut order: Vec<usize> = (0..projection.len()).collect();
    order.shuffle(rng);

    let mut moved_any = false;
    for _ in 0..MAX_PASSES_PER_LEVEL {
        let mut moves = 0usize;
        for &node in &order {
            let current = node_to_comm[node];
            let degree = projection.degree(node);

            // weights from this node to each neighboring community (sorted)
            let mut neighbor_weights: BTreeMap<usize, f64> = BTreeMap::new();
            for (&neighbor, &weight) in &projection.adjacency[node] {
                *neighbor_weights.entry(node_to_comm[neighbor]).or_insert(0.0) += weight;
            }

            community_degrees.entry(current).and_modify(|d| *d -= degree);
            let weight_to_current = neighbor_weights.get(&current).copied().unwrap_or(0.0);
            let current_degrees = community_degrees.get(&current).copied().unwrap_or(0.0);
            let removal_cost = -(weight_to_current / two_m)
                + resolution * current_degrees * degree / (two_m * two_m);

            let mut best_comm = current;
            let mut best_gain = 0.0;
            for (&candidate, &weight_to_candidate) in &neighbor_weights {
                if candidate == current {
                    continue;
                }
                let candidate_degrees = community_degrees.get(&candidate).copied().unwrap_or(0.0);
                let addition_gain = weight_to_candidate / two_m
                    - resolution * candidate_degrees * degree / (two_m * two_m);
                let gain = removal_cost + addition_gain;
                if gain > best_gain {
                    best_gain = gain;
                    best_comm = candidate;
                }
            }

            *community_degrees.entry(best_comm).or_insert(0.0) += degree;
            if best_comm != current {
                node_to_comm[node] = best_comm;
                moves += 1;
                moved_any = true;
            }
        }
        if moves == 0 {
            break;
        }
    }
    moved_any
}

/// Full Louvain over a projection: returns the final assignment of original
/// node indices to community indices.
fn louvain(projection: Projection, resolution: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut current = projection;
    let mut node_to_comm: Vec<usize> = (0..current.len()).collect();
    let mut best_modularity = current.modularity(&node_to_comm, resolution);

    loop {
        let moved = one_level(&current, &mut node_to_comm, resolution, &mut rng);
        if !moved {
            break;
        }
        let new_modularity = current.modularity(&node_to_comm, resolution);
        let aggregated = current.aggregate(&node_to_comm);
        let gain = new_modularity - best_modularity;
        current = aggregated;
        node_to_comm = (0..current.len()).collect();
        best_modularity = new_modularity;
        if gain <= MIN_MODULARITY_GAIN {
            break;
        }
    }

    current.members
}

/// Detect communities on the undirected projection of `graph`. Deterministic
/// for a fixed seed; singleton (isolated) nodes form singleton communities;
/// the result is a partition at level 0.
pub fn detect_communities(graph: &KnowledgeGraph, resolution: f64, seed: u64) -> Vec<Community> {
    let (node_ids, projection) = Projection::from_graph(graph);
    if node_ids.is_empty() {
        return Vec::new();
    }
    let mut groups = louvain(projection, resolution, seed);
    // order communities by their smallest member for stable ids
    groups.sort_by_key(|g| g.first().copied().unwrap_or(usize::MAX));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, members)| Community {
            community_id: format!("c{i:03}"),
            member_node_ids: members.into_iter().map(|idx| node_ids[idx].clone()).collect(),
            level: 0,
        })
        .collect()
}

/// Modularity of an explicit partition of `graph` (id sets) at `resolution`.
pub fn partition_modularity(
    graph: &KnowledgeGraph,
    partition: &[Community],
    resolution: f64,
) -> f64 {
    let (node_ids, projection) = Projection::from_graph(graph);
    let index: BTreeMap<&String, usize> =
        node_ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut node_to_comm = vec![usize::MAX; node_ids.len()];
    for (c, community) in partition.iter().enumerate() {
        for member in &community.member_node_ids {
            if let Some(&i) = index.get(member) {
                node_to_comm[i] = c;
            }
        }
    }
    projection.modularity(&node_to_comm, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{node_id_for, EdgeKind, GraphEdge, GraphKind, GraphNode, NodeKind};
    use std::collections::BTreeSet;

    /// Papers linked by cites-edges; enough structure for clustering tests.
    fn citation_graph(names: &[&str], edges: &[(usize, usize)]) -> KnowledgeGraph {
        let mut graph = KnowledgeGraph::empty(GraphKind::CitationGraph);
        for name in names {
            let id = node_id_for(NodeKind::Paper, name);
            graph.nodes.insert(
                id.clone(),
                GraphNode {
                    node_id: id,
                    kind: NodeKind::Paper,
                    canonical_name: name.to_string(),
                    aliases: BTreeSet::new(),
                    source_paper_ids: BTreeSet::new(),
                    description: String::new(),
                    corpus_paper_id: None,
                },
            );
        }
        for &(a, b) in edges {
            graph.edges.insert(GraphEdge {
                src: node_id_for(NodeKind::Paper, names[a]),
                dst: node_id_for(NodeKind::Paper, names[b]),
                kind: EdgeKind::Cites,
                synthetic: false,
                provenance: "test".into(),
            });
        }
        graph.validate().unwrap();
        graph
    }

    #[test]
    fn triangle_is_one_community() {
        let graph = citation_graph(&["a", "b", "c"], &[(0, 1), (1, 2), (2, 0)]);
        let communities = detect_communities(&graph, 1.0, 7);
        assert_eq!(communities.len(), 1);
        assert_eq!(communities[0].member_node_ids.len(), 3);
        assert_eq!(communities[0].level, 0);
    }

    #[test]
    fn two_disjoint_cliques_split_into_two_communities() {
        let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                edges.push((i, j));
                edges.push((i + 4, j + 4));
            }
        }
        let graph = citation_graph(&names, &edges);
        let communities = detect_communities(&graph, 1.0, 11);
        assert_eq!(communities.len(), 2);
        let mut sizes: Vec<usize> = communities.iter().map(|c| c.member_node_ids.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4]);

        let first: BTreeSet<&str> = communities[0]
            .member_node_ids
            .iter()
            .map(|id| graph.nodes[id].canonical_name.as_str())
            .collect();
        assert!(
            first == ["a", "b", "c", "d"].into_iter().collect::<BTreeSet<_>>()
                || first == ["e", "f", "g", "h"].into_iter().collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn empty_graph_yields_no_communities() {
        let graph = KnowledgeGraph::empty(GraphKind::CitationGraph);
        assert!(detect_communities(&graph, 1.0, 1).is_empty());
    }

    #[test]
    fn isolated_nodes_stay_singletons() {
        let graph = citation_graph(&["a", "b", "c", "d"], &[(0, 1)]);
        let communities = detect_communities(&graph, 1.0, 5);
        assert_eq!(communities.len(), 3);
        let mut sizes: Vec<usize> = communities.iter().map(|c| c.member_node_ids.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 2]);
    }

    #[test]
    fn detection_is_deterministic_for_fixed_seed() {
        let names = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        let edges = [
            (0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3),
            (6, 7), (7, 8), (8, 9), (9, 6), (2, 3), (5, 6),
        ];
        let graph = citation_graph(&names, &edges);
        let a = detect_communities(&graph, 1.0, 99);
        let b = detect_communities(&graph, 1.0, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn partition_property_holds() {
        let names = ["a", "b", "c", "d", "e", "f", "g"];
        let edges = [(0, 1), (1, 2), (3, 4), (4, 5), (5, 3), (0, 2)];
        let graph = citation_graph(&names, &edges);
        let communities = detect_communities(&graph, 1.0, 3);
        let total: usize = communities.iter().map(|c| c.member_node_ids.len()).sum();
        assert_eq!(total, graph.nodes.len());
        let mut seen = BTreeSet::new();
        for community in &communities {
            for member in &community.member_node_ids {
                assert!(seen.insert(member.clone()), "node in two communities");
            }
        }
    }

    #[test]
    fn clique_partition_beats_alternatives_on_modularity() {
        let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                edges.push((i, j));
                edges.push((i + 4, j + 4));
            }
        }
        let graph = citation_graph(&names, &edges);
        let detected = detect_communities(&graph, 1.0, 11);
        let detected_q = partition_modularity(&graph, &detected, 1.0);

        let everything = vec![Community {
            community_id: "all".into(),
            member_node_ids: graph.nodes.keys().cloned().collect(),
            level: 0,
        }];
        assert!(detected_q > partition_modularity(&graph, &everything, 1.0));
        assert!((detected_q - 0.5).abs() < 1e-12, "two equal cliques have Q = 1/2");
    }
}
