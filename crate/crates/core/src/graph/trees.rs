//! Spanning-tree counting through the matrix-tree theorem, in log domain.

use std::collections::BTreeMap;

use thiserror::Error;

use super::DualGraph;
use crate::state::Partition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeCountError {
    #[error("vertex set is empty")]
    EmptySubset,
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("edge multiplicity must be positive")]
    NonPositiveMultiplicity,
    #[error("induced subgraph is disconnected; it has no spanning tree")]
    Disconnected,
}

/// Natural log of the number of spanning trees of a weighted multigraph on
/// `n` vertices, where an edge of weight `k` stands for `k` parallel edges.
///
/// Computes the determinant of the Laplacian with the last row and column
/// removed by LU factorization with partial pivoting. Dense, `O(n^3)`.
pub fn laplacian_log_det(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<f64, TreeCountError> {
    if n == 0 {
        return Err(TreeCountError::EmptySubset);
    }
    let mut dsu = Dsu::new(n);
    let m = n - 1;
    let mut lap = vec![0.0f64; m * m];
    for (a, b, w) in edges {
        if a >= n || b >= n {
            return Err(TreeCountError::VertexOutOfRange(a.max(b)));
        }
        if w.is_nan() || w <= 0.0 {
            return Err(TreeCountError::NonPositiveMultiplicity);
        }
        if a == b {
            continue;
        }
        dsu.union(a, b);
        if a < m {
            lap[a * m + a] += w;
        }
        if b < m {
            lap[b * m + b] += w;
        }
        if a < m && b < m {
            lap[a * m + b] -= w;
            lap[b * m + a] -= w;
        }
    }
    if dsu.components != 1 {
        return Err(TreeCountError::Disconnected);
    }
    Ok(lu_log_abs_det(&mut lap, m))
}

fn lu_log_abs_det(a: &mut [f64], m: usize) -> f64 {
    let mut log_det = 0.0;
    for k in 0..m {
        let pivot_row = (k..m)
            .max_by(|&i, &j| a[i * m + k].abs().total_cmp(&a[j * m + k].abs()))
            .expect("non-empty range");
        if pivot_row != k {
            for j in 0..m {
                a.swap(k * m + j, pivot_row * m + j);
            }
        }
        let pivot = a[k * m + k];
        log_det += pivot.abs().ln();
        for i in k + 1..m {
            let factor = a[i * m + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..m {
                a[i * m + j] -= factor * a[k * m + j];
            }
        }
    }
    log_det
}

/// `ln t` for the subgraph of `g` induced on `vertex_subset`; `0` for a single
/// vertex. A disconnected subset is an error, never `-inf`.
pub fn log_spanning_tree_count(g: &DualGraph, vertex_subset: &[usize]) -> Result<f64, TreeCountError> {
    if vertex_subset.is_empty() {
        return Err(TreeCountError::EmptySubset);
    }
    let mut local = vec![usize::MAX; g.vertex_count()];
    let mut k = 0;
    for &v in vertex_subset {
        if v >= g.vertex_count() {
            return Err(TreeCountError::VertexOutOfRange(v));
        }
        if local[v] == usize::MAX {
            local[v] = k;
            k += 1;
        }
    }
    let edges = g.edges().iter().filter_map(|&(a, b)| {
        let (la, lb) = (local[a], local[b]);
        (la != usize::MAX && lb != usize::MAX).then_some((la, lb, 1.0))
    });
    laplacian_log_det(k, edges)
}

/// Undirected multigraph stored as multiplicities on vertex pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    vertex_count: usize,
    multiplicity: BTreeMap<(usize, usize), u64>,
}

impl Multigraph {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            multiplicity: BTreeMap::new(),
        }
    }

    pub fn add_edges(&mut self, a: usize, b: usize, count: u64) {
        if a != b && count > 0 {
            *self.multiplicity.entry((a.min(b), a.max(b))).or_insert(0) += count;
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn multiplicity(&self, a: usize, b: usize) -> u64 {
        self.multiplicity
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.multiplicity.iter().map(|(&k, &v)| (k, v))
    }

    /// `ln t(Q)`, counting parallel edges as distinct.
    pub fn log_tree_count(&self) -> Result<f64, TreeCountError> {
        laplacian_log_det(
            self.vertex_count,
            self.multiplicity
                .iter()
                .map(|(&(a, b), &k)| (a, b, k as f64)),
        )
    }
}

/// Contracts every part of `partition` to one vertex, keeping cut edges as
/// parallel edges between parts.
pub fn quotient_multigraph(g: &DualGraph, partition: &Partition) -> Multigraph {
    let labels = partition.assignment();
    let mut q = Multigraph::new(partition.parts());
    for &(a, b) in g.edges() {
        q.add_edges(labels[a], labels[b], 1);
    }
    q
}

struct Dsu {
    parent: Vec<usize>,
    components: usize,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Counts spanning trees by checking every (n-1)-subset of edges.
    fn brute_force_tree_count(g: &DualGraph) -> u64 {
        let n = g.vertex_count();
        let m = g.edge_count();
        let mut count = 0;
        for mask in 0u64..(1 << m) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let mut dsu = Dsu::new(n);
            for (i, &(a, b)) in g.edges().iter().enumerate() {
                if mask >> i & 1 == 1 {
                    dsu.union(a, b);
                }
            }
            if dsu.components == 1 {
                count += 1;
            }
        }
        count
    }

    fn all(g: &DualGraph) -> Vec<usize> {
        (0..g.vertex_count()).collect()
    }

    #[test]
    fn small_graphs_match_brute_force() {
        // triangle: 3, C4: 4, K4: 16 -- frozen from brute_force_tree_count
        for (g, expected) in [
            (DualGraph::complete(3), 3u64),
            (DualGraph::cycle(4), 4),
            (DualGraph::complete(4), 16),
        ] {
            assert_eq!(brute_force_tree_count(&g), expected);
            let got = log_spanning_tree_count(&g, &all(&g)).unwrap();
            assert_relative_eq!(got, (expected as f64).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn single_vertex_is_one_tree() {
        let g = DualGraph::cycle(4);
        assert_eq!(log_spanning_tree_count(&g, &[2]).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_subset_is_an_error() {
        let g = DualGraph::path(4);
        assert_eq!(
            log_spanning_tree_count(&g, &[0, 2]),
            Err(TreeCountError::Disconnected)
        );
        assert_eq!(log_spanning_tree_count(&g, &[]), Err(TreeCountError::EmptySubset));
    }

    #[test]
    fn grid_counts_match_known_values() {
        // OEIS A007341: spanning trees of the n x n grid
        for (n, expected) in [(2usize, 4.0f64), (3, 192.0), (4, 100352.0), (5, 557568000.0)] {
            let g = DualGraph::grid(n, n);
            let got = log_spanning_tree_count(&g, &all(&g)).unwrap();
            assert_relative_eq!(got, expected.ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn huge_counts_stay_finite() {
        let g = DualGraph::grid(30, 30);
        let got = log_spanning_tree_count(&g, &all(&g)).unwrap();
        assert!(got.is_finite() && got > 900.0);
    }

    #[test]
    fn quotient_of_c4_halves() {
        let g = DualGraph::cycle(4);
        let p = Partition::from_labels(vec![0, 0, 1, 1]);
        let q = quotient_multigraph(&g, &p);
        assert_eq!(q.vertex_count(), 2);
        assert_eq!(q.multiplicity(0, 1), 2);
        assert_relative_eq!(q.log_tree_count().unwrap(), 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn path_of_parts_multiplies_parallel_classes() {
        let mut q = Multigraph::new(3);
        q.add_edges(0, 1, 2);
        q.add_edges(1, 2, 3);
        assert_relative_eq!(q.log_tree_count().unwrap(), 6f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn quotient_tree_count_is_cut_count_for_two_parts() {
        let g = DualGraph::grid(3, 3);
        let p = Partition::from_labels(vec![0, 0, 1, 0, 0, 1, 1, 1, 1]);
        let q = quotient_multigraph(&g, &p);
        let cut = g.edges().iter().filter(|&&(a, b)| p.label(a) != p.label(b)).count();
        assert_eq!(q.multiplicity(0, 1), cut as u64);
        assert_relative_eq!(q.log_tree_count().unwrap(), (cut as f64).ln(), max_relative = 1e-12);
    }
}
