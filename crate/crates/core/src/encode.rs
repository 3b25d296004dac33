//! Turn a CFG into the matrix pair the network consumes.
//!
//! The adjacency matrix is boolean and directed, exactly as the edges lie;
//! no symmetrization happens anywhere. Normalization adds self-loops
//! (every node can keep its own state), takes row-sum degrees, and scales
//! entry (i, j) by 1/sqrt(d_i * d_j). Node features are the identity
//! matrix zero-padded to a fixed width so graphs of different sizes share
//! one input dimension and one first-layer weight matrix.

use crate::cfg::Cfg;
use crate::matrix::Matrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Dense directed adjacency with 0/1 entries, indexed by block id.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    entries: Matrix,
}

impl AdjacencyMatrix {
    /// Wrap a square matrix. Panics if not square.
    pub fn new(entries: Matrix) -> AdjacencyMatrix {
        assert_eq!(entries.rows(), entries.cols(), "adjacency must be square");
        AdjacencyMatrix { entries }
    }

    /// Build from an explicit edge list over `n` nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> AdjacencyMatrix {
        let mut m = Matrix::zeros(n, n);
        for &(src, dst) in edges {
            m[(src, dst)] = 1.0;
        }
        AdjacencyMatrix { entries: m }
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }
}

/// A graph ready for the network: normalized adjacency, one-hot features,
/// and an optional binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGraph {
    pub n: usize,
    pub a_hat: Matrix,
    pub features: Matrix,
    pub label: Option<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("graph has no blocks")]
    EmptyGraph,
    #[error("graph has {nodes} blocks, more than max_nodes = {max_nodes}")]
    TooManyNodes { nodes: usize, max_nodes: usize },
}

/// Extract the boolean adjacency matrix of a CFG: entry (i, j) is 1 when an
/// edge i→j of either kind exists. Parallel kinds collapse to a single 1.
pub fn adjacency_from_cfg(cfg: &Cfg) -> Result<AdjacencyMatrix, EncodeError> {
    let n = cfg.blocks.len();
    if n == 0 {
        return Err(EncodeError::EmptyGraph);
    }
    let mut m = Matrix::zeros(n, n);
    for edge in &cfg.edges {
        m[(edge.src, edge.dst)] = 1.0;
    }
    Ok(AdjacencyMatrix { entries: m })
}

/// Symmetrically normalize: with self-loops added, scale each entry by the
/// inverse square roots of its row's and column's degree.
pub fn normalize(adj: &AdjacencyMatrix) -> Matrix {
    let n = adj.n();
    let mut tilde = adj.entries.clone();
    for i in 0..n {
        tilde[(i, i)] += 1.0;
    }
    let dinv: Vec<f64> = (0..n)
        .map(|i| tilde.row(i).iter().sum::<f64>().sqrt().recip())
        .collect();
    Matrix::from_fn(n, n, |i, j| dinv[i] * tilde[(i, j)] * dinv[j])
}

/// Encode a CFG for the network. Graphs larger than `max_nodes` are
/// rejected unless `truncate` is set, in which case the first `max_nodes`
/// blocks in address order are kept and edges to dropped blocks vanish.
pub fn encode(
    cfg: &Cfg,
    max_nodes: usize,
    label: Option<u8>,
    truncate: bool,
) -> Result<EncodedGraph, EncodeError> {
    let nodes = cfg.blocks.len();
    if nodes == 0 {
        return Err(EncodeError::EmptyGraph);
    }
    if nodes > max_nodes && !truncate {
        return Err(EncodeError::TooManyNodes { nodes, max_nodes });
    }

    let n = nodes.min(max_nodes);
    let mut adj = Matrix::zeros(n, n);
    for edge in &cfg.edges {
        if edge.src < n && edge.dst < n {
            adj[(edge.src, edge.dst)] = 1.0;
        }
    }
    let a_hat = normalize(&AdjacencyMatrix { entries: adj });
    let features = Matrix::from_fn(n, max_nodes, |i, j| if i == j { 1.0 } else { 0.0 });
    Ok(EncodedGraph {
        n,
        a_hat,
        features,
        label,
    })
}

#[derive(Serialize, Deserialize)]
struct EncodedGraphRepr {
    n: usize,
    a_hat: Matrix,
    x: Matrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

impl Serialize for EncodedGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        EncodedGraphRepr {
            n: self.n,
            a_hat: self.a_hat.clone(),
            x: self.features.clone(),
            label: self.label,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EncodedGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<EncodedGraph, D::Error> {
        let repr = EncodedGraphRepr::deserialize(deserializer)?;
        if repr.a_hat.rows() != repr.n || repr.a_hat.cols() != repr.n {
            return Err(D::Error::custom(format!(
                "a_hat is {}x{}, expected {}x{}",
                repr.a_hat.rows(),
                repr.a_hat.cols(),
                repr.n,
                repr.n
            )));
        }
        if repr.x.rows() != repr.n {
            return Err(D::Error::custom(format!(
                "x has {} rows, expected {}",
                repr.x.rows(),
                repr.n
            )));
        }
        if let Some(label) = repr.label {
            if label > 1 {
                return Err(D::Error::custom(format!("label {label} is not 0 or 1")));
            }
        }
        Ok(EncodedGraph {
            n: repr.n,
            a_hat: repr.a_hat,
            features: repr.x,
            label: repr.label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;

    /// Edge list whose self-looped adjacency matches the worked 5-node
    /// normalization example.
    pub(crate) const FIVE_NODE_EDGES: [(usize, usize); 6] =
        [(0, 1), (0, 2), (0, 3), (2, 3), (3, 4), (4, 0)];

    #[test]
    fn adjacency_of_two_block_graph() {
        let cfg = build_cfg(&[0x60, 0x03, 0x56, 0x5B, 0x00]);
        let adj = adjacency_from_cfg(&cfg).unwrap();
        assert_eq!(adj.entries().data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn parallel_edge_kinds_collapse_to_one() {
        // JUMPI whose taken target is also the fall-through block.
        let cfg = build_cfg(&[0x60, 0x03, 0x57, 0x5B, 0x00]);
        assert_eq!(cfg.edges.len(), 2);
        let adj = adjacency_from_cfg(&cfg).unwrap();
        assert_eq!(adj.entries()[(0, 1)], 1.0);
    }

    #[test]
    fn empty_graph_rejected() {
        let cfg = Cfg {
            blocks: vec![],
            edges: vec![],
            unresolved_jumps: vec![],
        };
        assert_eq!(adjacency_from_cfg(&cfg).unwrap_err(), EncodeError::EmptyGraph);
    }

    #[test]
    fn single_node_normalizes_to_one() {
        let adj = AdjacencyMatrix::from_edges(1, &[]);
        assert_eq!(normalize(&adj).data(), &[1.0]);
    }

    #[test]
    fn five_node_example_degrees_and_entries() {
        let adj = AdjacencyMatrix::from_edges(5, &FIVE_NODE_EDGES);

        // Self-looped row sums: the degree diagonal.
        let mut tilde = adj.entries().clone();
        for i in 0..5 {
            tilde[(i, i)] += 1.0;
        }
        let degrees: Vec<f64> = (0..5).map(|i| tilde.row(i).iter().sum()).collect();
        assert_eq!(degrees, [4.0, 1.0, 2.0, 2.0, 2.0]);

        let a_hat = normalize(&adj);
        let s = 8.0f64.sqrt().recip();
        assert_eq!(a_hat[(0, 0)], 0.25);
        assert_eq!(a_hat[(0, 1)], 0.5);
        assert_eq!(a_hat[(0, 2)], s);
        assert_eq!(a_hat[(0, 3)], s);
        assert_eq!(a_hat[(4, 0)], s);
        assert_eq!(a_hat[(1, 1)], 1.0);
        // These entries multiply two rounded copies of 1/sqrt(2), so they
        // sit one ulp below the exact 1/2.
        for (i, j) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)] {
            assert!((a_hat[(i, j)] - 0.5).abs() < 1e-12);
        }
        assert_eq!(a_hat[(1, 0)], 0.0);
    }

    #[test]
    fn five_node_example_matches_triple_product() {
        let adj = AdjacencyMatrix::from_edges(5, &FIVE_NODE_EDGES);
        let mut tilde = adj.entries().clone();
        for i in 0..5 {
            tilde[(i, i)] += 1.0;
        }
        let d_inv_sqrt = Matrix::from_fn(5, 5, |i, j| {
            if i == j {
                tilde.row(i).iter().sum::<f64>().sqrt().recip()
            } else {
                0.0
            }
        });
        let product = d_inv_sqrt.matmul(&tilde).matmul(&d_inv_sqrt);
        let a_hat = normalize(&adj);
        for i in 0..5 {
            for j in 0..5 {
                assert!((a_hat[(i, j)] - product[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn normalized_entries_stay_in_unit_interval() {
        let adj = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let a_hat = normalize(&adj);
        for i in 0..4 {
            assert!(a_hat[(i, i)] > 0.0 && a_hat[(i, i)] <= 1.0);
            for j in 0..4 {
                assert!((0.0..=1.0).contains(&a_hat[(i, j)]));
            }
        }
    }

    #[test]
    fn features_are_padded_identity() {
        let cfg = build_cfg(&[0x60, 0x03, 0x56, 0x5B, 0x00, 0x00]);
        assert_eq!(cfg.blocks.len(), 3);
        let g = encode(&cfg, 5, Some(1), false).unwrap();
        assert_eq!(g.n, 3);
        assert_eq!((g.features.rows(), g.features.cols()), (3, 5));
        for i in 0..3 {
            for j in 0..5 {
                assert_eq!(g.features[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn exact_fit_features_are_identity() {
        let cfg = build_cfg(&[0x60, 0x03, 0x56, 0x5B, 0x00, 0x00]);
        let g = encode(&cfg, 3, None, false).unwrap();
        assert_eq!(g.features, Matrix::identity(3));
    }

    #[test]
    fn oversized_graph_rejected_unless_truncated() {
        let cfg = build_cfg(&[0x60, 0x03, 0x56, 0x5B, 0x00, 0x00]);
        assert_eq!(
            encode(&cfg, 2, None, false).unwrap_err(),
            EncodeError::TooManyNodes {
                nodes: 3,
                max_nodes: 2
            }
        );
        let g = encode(&cfg, 2, None, true).unwrap();
        assert_eq!(g.n, 2);
        assert_eq!(g.a_hat.rows(), 2);
    }

    #[test]
    fn json_uses_the_interchange_keys() {
        let cfg = build_cfg(&[0x60, 0x03, 0x56, 0x5B, 0x00]);
        let g = encode(&cfg, 4, Some(1), false).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"n\":2"));
        assert!(json.contains("\"a_hat\""));
        assert!(json.contains("\"x\""));
        assert!(json.contains("\"label\":1"));
        let back: EncodedGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_shape_mismatch_rejected() {
        let text = r#"{"n":2,"a_hat":[[1.0]],"x":[[1.0,0.0]],"label":0}"#;
        assert!(serde_json::from_str::<EncodedGraph>(text).is_err());
    }
}
