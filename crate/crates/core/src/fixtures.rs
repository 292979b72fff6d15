//! The seven-agent, two-cluster reference network and its companion data.
//!
//! Agents are zero-based here: cluster 1 is `{0, 1, 2, 3}` with leader 0 and
//! cluster 2 is `{4, 5, 6}` with leader 4.

use crate::graph::{ClusterPartition, ClusteredNetwork, DirectedWeightedGraph};
use crate::linalg::{self, Matrix};

pub const INITIAL_STATE: [f64; 7] = [0.0, -1.0, -2.0, -4.0, 2.0, 3.0, 4.0];

/// Externally reported consensus value for the leaders-only variant, kept
/// for comparison with the computed candidates.
pub const REPORTED_LEADERS_ONLY_VALUE: f64 = 2.513;

/// Intra-cluster edges as `(from, to, weight)`; `to` reads `from`.
pub const INTRA_EDGES: [(usize, usize, f64); 11] = [
    (1, 0, 1.0),
    (3, 0, 1.0),
    (0, 1, 1.0),
    (2, 1, 1.0),
    (0, 2, 1.0),
    (1, 2, 1.0),
    (0, 3, 1.0),
    (1, 3, 1.0),
    (5, 4, 3.0),
    (6, 5, 2.0),
    (4, 6, 1.0),
];

pub fn partition() -> ClusterPartition {
    ClusterPartition::new(7, vec![vec![0, 1, 2, 3], vec![4, 5, 6]], vec![0, 4]).expect("static partition")
}

pub fn intra_graph() -> DirectedWeightedGraph {
    DirectedWeightedGraph::from_triples(7, &INTRA_EDGES).expect("static graph")
}

/// Jump matrix where leader 1 averages with agent 6 and leader 2 mixes in agents 2 and 3.
pub fn jump_matrix() -> Matrix {
    let mut pe = Matrix::identity(7);
    pe[(0, 0)] = 0.5;
    pe[(0, 5)] = 0.5;
    pe[(4, 1)] = 0.1;
    pe[(4, 2)] = 0.1;
    pe[(4, 4)] = 0.8;
    pe
}

pub fn paper_network() -> ClusteredNetwork {
    ClusteredNetwork::new(intra_graph(), partition(), jump_matrix()).expect("static network")
}

pub fn leader_matrix() -> Matrix {
    Matrix::from_rows(&[vec![0.45, 0.55], vec![0.55, 0.45]]).expect("static matrix")
}

/// Variant where only the two leaders exchange information at impulses.
pub fn leaders_only_network() -> ClusteredNetwork {
    let pe = linalg::embed_leader_matrix(&leader_matrix(), &partition()).expect("static embedding");
    ClusteredNetwork::new(intra_graph(), partition(), pe).expect("static network")
}

/// Lyapunov matrix as printed to two decimals.
pub fn printed_lyapunov_matrix() -> Matrix {
    Matrix::from_rows(&[
        vec![2.36, -0.69, -0.42, -1.25, 0.0, 0.0, 0.0],
        vec![-0.69, 2.36, -1.25, -0.42, 0.0, 0.0, 0.0],
        vec![-0.42, -1.25, 1.97, -0.30, 0.0, 0.0, 0.0],
        vec![-1.25, -0.42, -0.30, 1.96, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 2.02, -1.6, -0.39],
        vec![0.0, 0.0, 0.0, 0.0, -1.6, 2.94, -1.30],
        vec![0.0, 0.0, 0.0, 0.0, -0.39, -1.3, 1.69],
    ])
    .expect("static matrix")
}
