//! Undirected connected graphs, standard generators, and assignment of a
//! matrix `W` whose off-diagonal sparsity matches the edge set.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::{Error, Result};

/// Undirected connected graph with 1-based node ids and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Build from an edge list. Edges are unordered pairs; duplicates
    /// collapse. Rejects self-loops, out-of-range ids, and disconnected
    /// graphs.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid("graph needs at least 2 nodes".into()));
        }
        let mut edges = BTreeSet::new();
        for &(i, j) in edge_list {
            if i == j {
                return Err(Error::Invalid(format!("self-loop at node {i}")));
            }
            if i < 1 || i > n || j < 1 || j > n {
                return Err(Error::Invalid(format!("edge ({i},{j}) out of range 1..={n}")));
            }
            edges.insert((i.min(j), i.max(j)));
        }
        let g = Self { n, edges };
        if !g.is_connected() {
            return Err(Error::Invalid("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Neighbor ids of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (1..=self.n).filter(|&j| self.has_edge(i, j)).collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n + 1];
        let mut stack = vec![1];
        seen[1] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }
}

/// Graph families the generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Path,
    Cycle,
    Complete,
    ErdosRenyi,
}

/// Generate a connected graph of the requested family. `edge_prob` applies
/// only to `ErdosRenyi`, which redraws (up to a retry budget) until the
/// sample is connected.
pub fn generate_graph(
    kind: GraphKind,
    n: usize,
    edge_prob: Option<f64>,
    seed: u64,
) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Invalid("graph needs at least 2 nodes".into()));
    }
    match kind {
        GraphKind::Path => Graph::new(n, &(1..n).map(|i| (i, i + 1)).collect::<Vec<_>>()),
        GraphKind::Cycle => {
            let mut e: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            e.push((n, 1));
            Graph::new(n, &e)
        }
        GraphKind::Complete => {
            let mut e = Vec::new();
            for i in 1..=n {
                for j in i + 1..=n {
                    e.push((i, j));
                }
            }
            Graph::new(n, &e)
        }
        GraphKind::ErdosRenyi => {
            let p = edge_prob.ok_or_else(|| {
                Error::Invalid("erdos_renyi requires an edge probability".into())
            })?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Invalid(format!("edge probability {p} outside (0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let mut e = Vec::new();
                for i in 1..=n {
                    for j in i + 1..=n {
                        if rng.random::<f64>() < p {
                            e.push((i, j));
                        }
                    }
                }
                if e.len() >= n - 1 {
                    if let Ok(g) = Graph::new(n, &e) {
                        return Ok(g);
                    }
                }
            }
            Err(Error::Generation(format!(
                "no connected sample in 1000 draws (n={n}, p={p})"
            )))
        }
    }
}

/// How to fill the matrix `W` on a graph's sparsity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WKind {
    /// Symmetric 0/1 adjacency matrix.
    Adjacency,
    /// Degree diagonal minus adjacency.
    Laplacian,
    /// Every diagonal entry and every directed edge entry drawn
    /// independently uniform on [-1, 1]; generally asymmetric.
    RandomWeights,
}

/// A graph together with a conforming matrix `W`.
///
/// The construction only checks dimensions; whether the off-pattern entries
/// are exactly zero is reported (not enforced) by [`pattern_violations`],
/// so malformed assignments can be represented and diagnosed.
#[derive(Debug, Clone)]
pub struct WAssignment {
    pub graph: Graph,
    pub w: DenseMatrix,
}

impl WAssignment {
    pub fn new(graph: Graph, w: DenseMatrix) -> Result<Self> {
        if w.rows() != graph.node_count() || w.cols() != graph.node_count() {
            return Err(Error::Dimension(format!(
                "graph has {} nodes but W is {}x{}",
                graph.node_count(),
                w.rows(),
                w.cols()
            )));
        }
        Ok(Self { graph, w })
    }

    pub fn n(&self) -> usize {
        self.graph.node_count()
    }
}

/// Build `W` of the requested kind on the graph's pattern. `seed` is used
/// only for `RandomWeights`, drawing in node-major order: for each node
/// (ascending), first its diagonal entry, then its row entries toward
/// neighbors in ascending neighbor order.
pub fn build_w(graph: &Graph, kind: WKind, seed: Option<u64>) -> WAssignment {
    let n = graph.node_count();
    let mut w = DenseMatrix::zeros(n, n);
    match kind {
        WKind::Adjacency => {
            for (i, j) in graph.edges() {
                w.set(i - 1, j - 1, 1.0);
                w.set(j - 1, i - 1, 1.0);
            }
        }
        WKind::Laplacian => {
            for i in 1..=n {
                w.set(i - 1, i - 1, graph.degree(i) as f64);
            }
            for (i, j) in graph.edges() {
                w.set(i - 1, j - 1, -1.0);
                w.set(j - 1, i - 1, -1.0);
            }
        }
        WKind::RandomWeights => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            for i in 1..=n {
                w.set(i - 1, i - 1, rng.random_range(-1.0..1.0));
                for j in graph.neighbors(i) {
                    w.set(i - 1, j - 1, rng.random_range(-1.0..1.0));
                }
            }
        }
    }
    WAssignment { graph: graph.clone(), w }
}

/// Return every `(i, j)` (1-based, `i != j`) where `W` has a nonzero entry
/// off the graph's edge pattern. Empty means the assignment conforms.
pub fn pattern_violations(wa: &WAssignment) -> Vec<(usize, usize)> {
    let n = wa.n();
    let mut bad = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if i != j && !wa.graph.has_edge(i, j) && wa.w.get(i - 1, j - 1) != 0.0 {
                bad.push((i, j));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_complete_edges() {
        let p3 = generate_graph(GraphKind::Path, 3, None, 0).unwrap();
        assert_eq!(p3.edges().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
        let k3 = generate_graph(GraphKind::Complete, 3, None, 0).unwrap();
        assert_eq!(k3.edges().collect::<Vec<_>>(), vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn cycle_wraps() {
        let c4 = generate_graph(GraphKind::Cycle, 4, None, 0).unwrap();
        assert!(c4.has_edge(4, 1));
        assert_eq!(c4.edge_count(), 4);
        assert_eq!(c4.degree(1), 2);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Graph::new(1, &[]).is_err());
        assert!(Graph::new(3, &[(1, 1)]).is_err());
        assert!(Graph::new(3, &[(1, 4)]).is_err());
        // 3 nodes, single edge: disconnected.
        assert!(Graph::new(3, &[(1, 2)]).is_err());
    }

    #[test]
    fn erdos_renyi_connected_and_deterministic() {
        let a = generate_graph(GraphKind::ErdosRenyi, 6, Some(0.5), 42).unwrap();
        let b = generate_graph(GraphKind::ErdosRenyi, 6, Some(0.5), 42).unwrap();
        assert_eq!(a, b);
        assert!(generate_graph(GraphKind::ErdosRenyi, 6, None, 42).is_err());
    }

    #[test]
    fn adjacency_and_laplacian_p2() {
        let p2 = generate_graph(GraphKind::Path, 2, None, 0).unwrap();
        let adj = build_w(&p2, WKind::Adjacency, None);
        assert_eq!(adj.w.entries(), &[0.0, 1.0, 1.0, 0.0]);
        let lap = build_w(&p2, WKind::Laplacian, None);
        assert_eq!(lap.w.entries(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_adjacency_symmetric() {
        let g = generate_graph(GraphKind::ErdosRenyi, 7, Some(0.6), 7).unwrap();
        let lap = build_w(&g, WKind::Laplacian, None);
        for i in 0..7 {
            let s: f64 = lap.w.row(i).iter().sum();
            assert!(s.abs() < 1e-12);
        }
        let adj = build_w(&g, WKind::Adjacency, None);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(adj.w.get(i, j), adj.w.get(j, i));
                assert!(adj.w.get(i, j) == 0.0 || adj.w.get(i, j) == 1.0);
            }
        }
    }

    #[test]
    fn random_weights_respect_pattern_and_seed() {
        let g = generate_graph(GraphKind::ErdosRenyi, 6, Some(0.4), 3).unwrap();
        let a = build_w(&g, WKind::RandomWeights, Some(5));
        let b = build_w(&g, WKind::RandomWeights, Some(5));
        assert_eq!(a.w.entries(), b.w.entries());
        assert!(pattern_violations(&a).is_empty());
        let c = build_w(&g, WKind::RandomWeights, Some(6));
        assert_ne!(a.w.entries(), c.w.entries());
        for v in a.w.entries() {
            assert!(*v >= -1.0 && *v < 1.0);
        }
    }

    #[test]
    fn validation_reports_off_pattern_entries() {
        let p3 = generate_graph(GraphKind::Path, 3, None, 0).unwrap();
        let mut w = build_w(&p3, WKind::Adjacency, None).w;
        w.set(0, 2, 0.5);
        let wa = WAssignment::new(p3, w).unwrap();
        assert_eq!(pattern_violations(&wa), vec![(1, 3)]);
    }
}
