//! Clustered network model and connectivity predicates.
//!
//! Edge convention: an edge `from -> to` with weight `w` means agent `to`
//! reads agent `from`, i.e. the adjacency entry `a(to, from) = w`. Information
//! flows along the edge direction, so a spanning tree root is a node that
//! reaches every other node.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, Matrix};

/// Default support threshold for [`matrix_graph`].
pub const DEFAULT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge {from}->{to} has non-positive or non-finite weight {weight}")]
    BadWeight { from: usize, to: usize, weight: f64 },
    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("node {0} belongs to more than one cluster")]
    Overlap(usize),
    #[error("node {0} is not in any cluster")]
    Uncovered(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("leader {leader} of cluster {cluster} is not a member of it")]
    LeaderOutsideCluster { cluster: usize, leader: usize },
    #[error("expected {expected} leaders, found {found}")]
    LeaderCount { expected: usize, found: usize },
    #[error("edge {from}->{to} crosses clusters {from_cluster} and {to_cluster}")]
    CrossClusterEdge { from: usize, to: usize, from_cluster: usize, to_cluster: usize },
    #[error("jump matrix is {rows}x{cols}, expected {n}x{n}")]
    JumpShape { rows: usize, cols: usize, n: usize },
    #[error("matrix entry ({row}, {col}) = {value} is significantly negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix is not square")]
    NotSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedWeightedGraph {
    node_count: usize,
    edges: Vec<Edge>,
}

impl DirectedWeightedGraph {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        for e in &edges {
            for id in [e.from, e.to] {
                if id >= node_count {
                    return Err(GraphError::NodeOutOfRange { id, n: node_count });
                }
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e.from));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(GraphError::BadWeight { from: e.from, to: e.to, weight: e.weight });
            }
        }
        Ok(Self { node_count, edges })
    }

    /// Builds a graph from `(from, to, weight)` triples.
    pub fn from_triples(node_count: usize, triples: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        Self::new(node_count, triples.iter().map(|&(from, to, weight)| Edge { from, to, weight }).collect())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.to].push(e.from);
        }
        adj
    }

    /// Restriction to a node subset, relabelled `0..nodes.len()` in order.
    pub fn induced(&self, nodes: &[usize]) -> DirectedWeightedGraph {
        let mut index = vec![usize::MAX; self.node_count];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| index[e.from] != usize::MAX && index[e.to] != usize::MAX)
            .map(|e| Edge { from: index[e.from], to: index[e.to], weight: e.weight })
            .collect();
        DirectedWeightedGraph { node_count: nodes.len(), edges }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }
}

fn reachable(adj: &[Vec<usize>], root: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Returns a root that reaches every node, if one exists.
pub fn spanning_tree_root(g: &DirectedWeightedGraph) -> Option<usize> {
    if g.node_count == 0 {
        return None;
    }
    let adj = g.successors();
    (0..g.node_count).find(|&r| reachable(&adj, r).iter().all(|&s| s))
}

pub fn has_directed_spanning_tree(g: &DirectedWeightedGraph) -> bool {
    spanning_tree_root(g).is_some()
}

/// Forward and reverse reachability from node 0.
pub fn is_strongly_connected(g: &DirectedWeightedGraph) -> bool {
    if g.node_count == 0 {
        return false;
    }
    reachable(&g.successors(), 0).iter().all(|&s| s)
        && reachable(&g.predecessors(), 0).iter().all(|&s| s)
}

/// Graph of a nonnegative square matrix: edge `j -> i` iff `M(i, j) > threshold`, `i != j`.
pub fn matrix_graph(m: &Matrix, threshold: f64) -> Result<DirectedWeightedGraph, GraphError> {
    if !m.is_square() {
        return Err(GraphError::NotSquare);
    }
    let n = m.rows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if v < -threshold {
                return Err(GraphError::NegativeEntry { row: i, col: j, value: v });
            }
            if i != j && v > threshold {
                edges.push(Edge { from: j, to: i, weight: v });
            }
        }
    }
    Ok(DirectedWeightedGraph { node_count: n, edges })
}

/// Laplacian of a weighted digraph: `L(i,j) = -a(i,j)`, `L(i,i) = Σ_{j≠i} a(i,j)`.
pub fn laplacian(g: &DirectedWeightedGraph) -> Matrix {
    let n = g.node_count;
    let mut l = Matrix::zeros(n, n);
    for e in &g.edges {
        l[(e.to, e.from)] -= e.weight;
    }
    for i in 0..n {
        // negated off-diagonal sum gives exact zero row sums
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
        l[(i, i)] = -off;
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    clusters: Vec<Vec<usize>>,
    leaders: Vec<usize>,
    membership: Vec<usize>,
}

impl ClusterPartition {
    pub fn new(node_count: usize, clusters: Vec<Vec<usize>>, leaders: Vec<usize>) -> Result<Self, GraphError> {
        if leaders.len() != clusters.len() {
            return Err(GraphError::LeaderCount { expected: clusters.len(), found: leaders.len() });
        }
        let mut membership = vec![usize::MAX; node_count];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(GraphError::EmptyCluster(c));
            }
            for &v in members {
                if v >= node_count {
                    return Err(GraphError::NodeOutOfRange { id: v, n: node_count });
                }
                if membership[v] != usize::MAX {
                    return Err(GraphError::Overlap(v));
                }
                membership[v] = c;
            }
        }
        if let Some(v) = membership.iter().position(|&c| c == usize::MAX) {
            return Err(GraphError::Uncovered(v));
        }
        for (c, &l) in leaders.iter().enumerate() {
            if l >= node_count || membership[l] != c {
                return Err(GraphError::LeaderOutsideCluster { cluster: c, leader: l });
            }
        }
        Ok(Self { clusters, leaders, membership })
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.clusters[cluster]
    }

    pub fn leaders(&self) -> &[usize] {
        &self.leaders
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.membership[node]
    }

    pub fn is_leader(&self, node: usize) -> bool {
        self.leaders[self.membership[node]] == node
    }

    /// Indicator vector of a cluster.
    pub fn indicator(&self, cluster: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.node_count()];
        for &i in &self.clusters[cluster] {
            v[i] = 1.0;
        }
        v
    }
}

/// Intra-cluster graph, partition and inter-cluster jump matrix `P_e`.
#[derive(Debug, Clone)]
pub struct ClusteredNetwork {
    intra: DirectedWeightedGraph,
    partition: ClusterPartition,
    p_e: Matrix,
    laplacian: Matrix,
}

impl ClusteredNetwork {
    /// Structural checks only (shapes, edges inside clusters); the modelling
    /// assumptions are reported by [`validate_network`].
    pub fn new(intra: DirectedWeightedGraph, partition: ClusterPartition, p_e: Matrix) -> Result<Self, GraphError> {
        let n = partition.node_count();
        if intra.node_count != n {
            return Err(GraphError::NodeOutOfRange { id: intra.node_count, n });
        }
        if p_e.rows() != n || p_e.cols() != n {
            return Err(GraphError::JumpShape { rows: p_e.rows(), cols: p_e.cols(), n });
        }
        for e in &intra.edges {
            let (cf, ct) = (partition.cluster_of(e.from), partition.cluster_of(e.to));
            if cf != ct {
                return Err(GraphError::CrossClusterEdge { from: e.from, to: e.to, from_cluster: cf, to_cluster: ct });
            }
        }
        let laplacian = laplacian(&intra);
        Ok(Self { intra, partition, p_e, laplacian })
    }

    pub fn node_count(&self) -> usize {
        self.partition.node_count()
    }

    pub fn intra(&self) -> &DirectedWeightedGraph {
        &self.intra
    }

    pub fn partition(&self) -> &ClusterPartition {
        &self.partition
    }

    pub fn p_e(&self) -> &Matrix {
        &self.p_e
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// Laplacian of one cluster, indexed by the cluster's member order.
    pub fn cluster_laplacian(&self, cluster: usize) -> Matrix {
        laplacian(&self.intra.induced(self.partition.members(cluster)))
    }
}

/// Block-diagonal Laplacian of the intra-cluster graph.
pub fn build_laplacian(network: &ClusteredNetwork) -> Matrix {
    network.laplacian.clone()
}

/// Sufficient SIA test: stochastic, positive diagonal, spanning tree in the associated graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiaDiagnostic {
    pub is_sia: bool,
    pub stochastic: bool,
    pub positive_diagonal: bool,
    pub spanning_tree: bool,
    /// First failed condition, if any.
    pub failed: Option<String>,
}

pub fn is_sia(m: &Matrix) -> SiaDiagnostic {
    let stochastic = m.is_square() && linalg::check_stochastic(m, linalg::STOCHASTIC_TOL).is_ok();
    let positive_diagonal = m.is_square() && (0..m.rows()).all(|i| m[(i, i)] > 0.0);
    let spanning_tree = matrix_graph(m, DEFAULT_THRESHOLD).map(|g| has_directed_spanning_tree(&g)).unwrap_or(false);
    let failed = if !stochastic {
        Some("row-stochastic".to_string())
    } else if !positive_diagonal {
        Some("positive diagonal".to_string())
    } else if !spanning_tree {
        Some("spanning tree of associated graph".to_string())
    } else {
        None
    };
    SiaDiagnostic { is_sia: failed.is_none(), stochastic, positive_diagonal, spanning_tree, failed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const CHECK_SPANNING_TREES: &str = "cluster spanning trees";
pub const CHECK_STOCHASTIC: &str = "jump matrix row-stochastic";
pub const CHECK_POSITIVE_DIAGONAL: &str = "jump matrix positive diagonal";
pub const CHECK_FOLLOWER_ROWS: &str = "follower rows are identity";
pub const CHECK_STRONGLY_CONNECTED: &str = "inter-cluster strong connectivity";

/// Checks the modelling assumptions of a clustered network.
///
/// Strong connectivity is tested on the graph over all nodes formed by the
/// off-diagonal support of `P_e` together with every intra-cluster edge.
pub fn validate_network(network: &ClusteredNetwork) -> ValidationReport {
    let part = &network.partition;
    let pe = &network.p_e;
    let n = network.node_count();
    let mut checks = Vec::new();

    let bad_clusters: Vec<usize> = (0..part.cluster_count())
        .filter(|&c| !has_directed_spanning_tree(&network.intra.induced(part.members(c))))
        .collect();
    checks.push(Check {
        name: CHECK_SPANNING_TREES.into(),
        passed: bad_clusters.is_empty(),
        detail: if bad_clusters.is_empty() {
            format!("all {} clusters have a directed spanning tree", part.cluster_count())
        } else {
            format!("clusters without spanning tree: {bad_clusters:?}")
        },
    });

    let stoch = linalg::check_stochastic(pe, linalg::STOCHASTIC_TOL);
    checks.push(Check {
        name: CHECK_STOCHASTIC.into(),
        passed: stoch.is_ok(),
        detail: match &stoch {
            Ok(()) => "row sums 1, entries nonnegative".into(),
            Err(e) => e.to_string(),
        },
    });

    let bad_diag: Vec<usize> = (0..n).filter(|&i| pe[(i, i)] <= 0.0).collect();
    checks.push(Check {
        name: CHECK_POSITIVE_DIAGONAL.into(),
        passed: bad_diag.is_empty(),
        detail: if bad_diag.is_empty() { "all diagonal entries positive".into() } else { format!("nonpositive diagonal at rows {bad_diag:?}") },
    });

    let bad_rows: Vec<usize> = (0..n)
        .filter(|&i| !part.is_leader(i))
        .filter(|&i| (0..n).any(|j| pe[(i, j)] != if i == j { 1.0 } else { 0.0 }))
        .collect();
    checks.push(Check {
        name: CHECK_FOLLOWER_ROWS.into(),
        passed: bad_rows.is_empty(),
        detail: if bad_rows.is_empty() { "no jumps on followers".into() } else { format!("non-identity follower rows {bad_rows:?}") },
    });

    let connected = match matrix_graph(pe, DEFAULT_THRESHOLD) {
        Ok(g) => {
            let mut edges = g.edges;
            edges.extend_from_slice(&network.intra.edges);
            is_strongly_connected(&DirectedWeightedGraph { node_count: n, edges })
        }
        Err(_) => false,
    };
    checks.push(Check {
        name: CHECK_STRONGLY_CONNECTED.into(),
        passed: connected,
        detail: if connected { "jump support plus intra edges is strongly connected".into() } else { "jump support plus intra edges is not strongly connected".into() },
    });

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { checks, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cluster_one_laplacian_matches_printed_matrix() {
        let net = fixtures::paper_network();
        let l1 = net.cluster_laplacian(0);
        let expect = Matrix::from_rows(&[
            vec![2.0, -1.0, 0.0, -1.0],
            vec![-1.0, 2.0, -1.0, 0.0],
            vec![-1.0, -1.0, 2.0, 0.0],
            vec![-1.0, -1.0, 0.0, 2.0],
        ])
        .unwrap();
        assert_eq!(l1, expect);
        let l2 = Matrix::from_rows(&[vec![3.0, -3.0, 0.0], vec![0.0, 2.0, -2.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(net.cluster_laplacian(1), l2);
        assert_eq!(build_laplacian(&net), Matrix::block_diagonal(&[expect, l2]));
    }

    #[test]
    fn trivial_laplacians() {
        assert_eq!(laplacian(&DirectedWeightedGraph::new(1, vec![]).unwrap()), Matrix::zeros(1, 1));
        let g = DirectedWeightedGraph::from_triples(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(laplacian(&g), Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap());
    }

    #[test]
    fn graph_constructor_rejects_bad_edges() {
        assert_eq!(DirectedWeightedGraph::from_triples(2, &[(1, 1, 1.0)]), Err(GraphError::SelfLoop(1)));
        assert!(matches!(DirectedWeightedGraph::from_triples(2, &[(0, 1, 0.0)]), Err(GraphError::BadWeight { .. })));
        assert!(matches!(DirectedWeightedGraph::from_triples(2, &[(0, 2, 1.0)]), Err(GraphError::NodeOutOfRange { id: 2, n: 2 })));
    }

    #[test]
    fn spanning_tree_cases() {
        let net = fixtures::paper_network();
        let c1 = net.intra().induced(net.partition().members(0));
        assert_eq!(spanning_tree_root(&c1), Some(0));
        assert!(!has_directed_spanning_tree(&DirectedWeightedGraph::new(2, vec![]).unwrap()));
        let chain = DirectedWeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(spanning_tree_root(&chain), Some(0));
        assert!(!is_strongly_connected(&chain));
    }

    #[test]
    fn strong_connectivity_cases() {
        let cycle = DirectedWeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert!(is_strongly_connected(&cycle));
        let net = fixtures::paper_network();
        assert!(is_strongly_connected(&net.intra().induced(net.partition().members(1))));
    }

    #[test]
    fn jump_matrix_graph_edges() {
        assert!(matrix_graph(&Matrix::identity(4), DEFAULT_THRESHOLD).unwrap().edges().is_empty());
        let net = fixtures::paper_network();
        let g = matrix_graph(net.p_e(), DEFAULT_THRESHOLD).unwrap();
        let mut pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.from, e.to)).collect();
        pairs.sort();
        // agents 6->1, 2->5, 3->5 in one-based labels
        assert_eq!(pairs, vec![(1, 4), (2, 4), (5, 0)]);
        let mut bad = Matrix::identity(2);
        bad[(0, 1)] = -0.5;
        assert!(matches!(matrix_graph(&bad, DEFAULT_THRESHOLD), Err(GraphError::NegativeEntry { .. })));
    }

    #[test]
    fn heat_kernel_of_cluster_one_is_complete() {
        let net = fixtures::paper_network();
        let e = linalg::mat_exp(&net.cluster_laplacian(0).scale(-1.0), 0.5).unwrap();
        let g = matrix_graph(&e, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(g.edges().len(), 12);
    }

    #[test]
    fn sia_cases() {
        let net = fixtures::paper_network();
        let d = is_sia(net.p_e());
        assert!(!d.is_sia);
        assert_eq!(d.failed.as_deref(), Some("spanning tree of associated graph"));
        assert!(!is_sia(&Matrix::identity(3)).is_sia);
        let prod = net.p_e().matmul(&linalg::mat_exp(&net.laplacian().scale(-1.0), 0.5).unwrap());
        assert!(is_sia(&prod).is_sia);
    }

    #[test]
    fn paper_network_validates() {
        let report = validate_network(&fixtures::paper_network());
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checks.len(), 5);
    }

    #[test]
    fn validation_flags_short_row() {
        let net = fixtures::paper_network();
        let mut pe = net.p_e().clone();
        pe[(0, 5)] = 0.4;
        let bad = ClusteredNetwork::new(net.intra().clone(), net.partition().clone(), pe).unwrap();
        let r = validate_network(&bad);
        assert!(!r.passed);
        assert!(!r.check(CHECK_STOCHASTIC).unwrap().passed);
    }

    #[test]
    fn validation_flags_unreachable_node() {
        // node 2 of cluster {0,1,2} has no incoming or outgoing edge
        let g = DirectedWeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let part = ClusterPartition::new(3, vec![vec![0, 1, 2]], vec![0]).unwrap();
        let net = ClusteredNetwork::new(g, part, Matrix::identity(3)).unwrap();
        let r = validate_network(&net);
        assert!(!r.check(CHECK_SPANNING_TREES).unwrap().passed);
    }

    #[test]
    fn validation_flags_follower_jump_and_disconnected_clusters() {
        let g = DirectedWeightedGraph::from_triples(4, &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
        let part = ClusterPartition::new(4, vec![vec![0, 1], vec![2, 3]], vec![0, 2]).unwrap();
        let net = ClusteredNetwork::new(g.clone(), part.clone(), Matrix::identity(4)).unwrap();
        let r = validate_network(&net);
        assert!(!r.check(CHECK_STRONGLY_CONNECTED).unwrap().passed);
        assert!(r.check(CHECK_FOLLOWER_ROWS).unwrap().passed);

        let mut pe = Matrix::identity(4);
        pe[(1, 1)] = 0.5;
        pe[(1, 2)] = 0.5;
        let net = ClusteredNetwork::new(g, part, pe).unwrap();
        assert!(!validate_network(&net).check(CHECK_FOLLOWER_ROWS).unwrap().passed);
    }

    #[test]
    fn partition_and_network_errors() {
        assert_eq!(ClusterPartition::new(3, vec![vec![0, 1], vec![1, 2]], vec![0, 2]), Err(GraphError::Overlap(1)));
        assert_eq!(ClusterPartition::new(3, vec![vec![0, 1]], vec![0]), Err(GraphError::Uncovered(2)));
        assert!(matches!(
            ClusterPartition::new(2, vec![vec![0], vec![1]], vec![1, 0]),
            Err(GraphError::LeaderOutsideCluster { cluster: 0, leader: 1 })
        ));
        let part = ClusterPartition::new(2, vec![vec![0], vec![1]], vec![0, 1]).unwrap();
        let g = DirectedWeightedGraph::from_triples(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            ClusteredNetwork::new(g, part, Matrix::identity(2)),
            Err(GraphError::CrossClusterEdge { from: 0, to: 1, .. })
        ));
    }
}
