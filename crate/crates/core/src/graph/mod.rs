//! Immutable dual graphs: vertices carrying population and vote attributes,
//! joined by undirected edges.
//!
//! Vertices are dense indices `0..n` in file order. External string ids are
//! kept in a side table and only used for output.

mod io;
mod trees;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_assignment, load_dual_graph, GraphFormat};
pub use trees::{
    laplacian_log_det, log_spanning_tree_count, quotient_multigraph, Multigraph, TreeCountError,
};

/// Index of an edge in the canonical edge list of a [`DualGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to parse dual graph: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read dual graph: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dual graph: {0}")]
    Malformed(String),
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertexId(String),
    #[error("edge references unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("edge endpoint {endpoint} out of range for {vertex_count} vertices")]
    EndpointOutOfRange { endpoint: usize, vertex_count: usize },
    #[error("self-loop at vertex {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {0:?} -- {1:?}")]
    DuplicateEdge(String, String),
    #[error("vertex {0:?} has no population attribute")]
    MissingPopulation(String),
    #[error("vertex {vertex:?} has invalid value for {name:?}")]
    InvalidAttribute { vertex: String, name: String },
    #[error("attribute {name:?} is present on some vertices but missing on {vertex:?}")]
    IncompleteAttribute { name: String, vertex: String },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
}

/// A connected, simple, undirected graph with per-vertex numeric attributes.
#[derive(Debug, Clone)]
pub struct DualGraph {
    ids: Vec<String>,
    population: Vec<f64>,
    attributes: BTreeMap<String, Vec<f64>>,
    edges: Vec<(usize, usize)>,
    // sorted by neighbor
    adjacency: Vec<Vec<(usize, EdgeId)>>,
}

impl DualGraph {
    /// Builds a graph with ids `"0".."n-1"` and the given populations.
    pub fn new(population: Vec<f64>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let ids = (0..population.len()).map(|i| i.to_string()).collect();
        Self::from_parts(ids, population, BTreeMap::new(), edges)
    }

    /// Builds and validates a graph from its components.
    pub fn from_parts(
        ids: Vec<String>,
        population: Vec<f64>,
        attributes: BTreeMap<String, Vec<f64>>,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let n = population.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if ids.len() != n {
            return Err(GraphError::Malformed(format!(
                "{} ids for {} vertices",
                ids.len(),
                n
            )));
        }
        for (v, &w) in population.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::InvalidAttribute {
                    vertex: ids[v].clone(),
                    name: "population".into(),
                });
            }
        }
        for (name, column) in &attributes {
            if column.len() != n {
                return Err(GraphError::Malformed(format!(
                    "attribute {name:?} has {} values for {n} vertices",
                    column.len()
                )));
            }
            if let Some(v) = column.iter().position(|x| !x.is_finite()) {
                return Err(GraphError::InvalidAttribute {
                    vertex: ids[v].clone(),
                    name: name.clone(),
                });
            }
        }

        let mut normalized = Vec::with_capacity(edges.len());
        let mut adjacency: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            for endpoint in [a, b] {
                if endpoint >= n {
                    return Err(GraphError::EndpointOutOfRange {
                        endpoint,
                        vertex_count: n,
                    });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(ids[a].clone()));
            }
            let e = EdgeId(normalized.len());
            normalized.push((a.min(b), a.max(b)));
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(GraphError::DuplicateEdge(ids[v].clone(), ids[w[0].0].clone()));
            }
        }

        let graph = Self {
            ids,
            population,
            attributes,
            edges: normalized,
            adjacency,
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(graph)
    }

    /// Attaches (or replaces) a per-vertex attribute column.
    pub fn with_attribute(mut self, name: &str, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != self.vertex_count() {
            return Err(GraphError::Malformed(format!(
                "attribute {name:?} has {} values for {} vertices",
                values.len(),
                self.vertex_count()
            )));
        }
        if name == "population" {
            self.population = values;
        } else {
            self.attributes.insert(name.to_string(), values);
        }
        Ok(self)
    }

    /// `rows x cols` grid graph with unit populations, vertex `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(vec![1.0; rows * cols], &edges).expect("grid graphs are valid")
    }

    /// Cycle on `n >= 3` vertices with unit populations.
    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(vec![1.0; n], &edges).expect("cycle graphs are valid")
    }

    /// Path on `n` vertices with unit populations.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(vec![1.0; n], &edges).expect("path graphs are valid")
    }

    /// Complete graph on `n` vertices with unit populations.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Self::new(vec![1.0; n], &edges).expect("complete graphs are valid")
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.population.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Normalized `(min, max)` endpoints of every edge, indexed by [`EdgeId`].
    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn endpoints(&self, e: EdgeId) -> (usize, usize) {
        self.edges[e.0]
    }

    /// Neighbors of `v` with the connecting edge, sorted by neighbor.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(usize, EdgeId)] {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<EdgeId> {
        let list = &self.adjacency[u];
        list.binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| list[i].1)
    }

    #[inline]
    pub fn population(&self, v: usize) -> f64 {
        self.population[v]
    }

    #[inline]
    pub fn populations(&self) -> &[f64] {
        &self.population
    }

    pub fn total_population(&self) -> f64 {
        self.population.iter().sum()
    }

    /// Column for a named attribute; `"population"` is always present.
    pub fn attribute(&self, name: &str) -> Option<&[f64]> {
        if name == "population" {
            Some(&self.population)
        } else {
            self.attributes.get(name).map(Vec::as_slice)
        }
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    /// External id of vertex `v`.
    #[inline]
    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Whether the subgraph induced on `subset` is connected (and non-empty).
    pub fn is_connected_subset(&self, subset: &[usize]) -> bool {
        if subset.is_empty() {
            return false;
        }
        let mut inside = vec![false; self.vertex_count()];
        for &v in subset {
            inside[v] = true;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![subset[0]];
        seen[subset[0]] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in self.neighbors(v) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        reached == count_distinct(subset, self.vertex_count())
    }

    fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(w, _) in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }
}

fn count_distinct(subset: &[usize], n: usize) -> usize {
    let mut seen = vec![false; n];
    subset
        .iter()
        .filter(|&&v| !std::mem::replace(&mut seen[v], true))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_has_degree_two_everywhere() {
        let g = DualGraph::cycle(4);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);
        assert!((0..4).all(|v| g.degree(v) == 2));
        assert_eq!(g.edge_between(3, 0), Some(EdgeId(3)));
        assert_eq!(g.endpoints(EdgeId(3)), (0, 3));
        assert_eq!(g.edge_between(0, 2), None);
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(matches!(
            DualGraph::new(vec![1.0; 3], &[(0, 1), (1, 1)]),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            DualGraph::new(vec![1.0; 3], &[(0, 1), (1, 2), (1, 0)]),
            Err(GraphError::DuplicateEdge(..))
        ));
    }

    #[test]
    fn rejects_disconnected() {
        let err = DualGraph::new(vec![1.0; 6], &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
            .unwrap_err();
        assert!(matches!(err, GraphError::Disconnected { components: 2 }));
    }

    #[test]
    fn grid_shape() {
        let g = DualGraph::grid(4, 4);
        assert_eq!(g.vertex_count(), 16);
        assert_eq!(g.edge_count(), 24);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(5), 4);
    }

    #[test]
    fn connected_subsets() {
        let g = DualGraph::path(4);
        assert!(g.is_connected_subset(&[1, 2]));
        assert!(!g.is_connected_subset(&[0, 2]));
        assert!(!g.is_connected_subset(&[]));
        assert!(g.is_connected_subset(&[3]));
    }
}
