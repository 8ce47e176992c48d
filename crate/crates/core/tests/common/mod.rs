//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the walk, state, or enumeration code paths it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use mew_core::graph::{DualGraph, EdgeId};
use rand::Rng;

pub type EdgeSet = BTreeSet<EdgeId>;

/// Random connected simple graph: a random tree plus extra random edges.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> DualGraph {
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v));
    }
    let max_edges = n * (n - 1) / 2;
    let target = (edges.len() + extra).min(max_edges);
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    DualGraph::new(vec![1.0; n], &edges).unwrap()
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    r
}

/// Whether `edges` (given as endpoint pairs) connect all `n` vertices without a cycle.
pub fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() + 1 != n {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Every spanning tree by checking all `(n-1)`-subsets of edges.
pub fn all_spanning_trees(g: &DualGraph) -> Vec<EdgeSet> {
    let n = g.vertex_count();
    let m = g.edge_count();
    assert!(m <= 20, "brute force limited to 20 edges");
    let mut out = Vec::new();
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let chosen: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let pairs: Vec<_> = chosen.iter().map(|&i| g.edges()[i]).collect();
        if is_spanning_tree(n, &pairs) {
            out.push(chosen.into_iter().map(EdgeId).collect());
        }
    }
    out
}

/// Components (as sorted vertex lists) of the forest `edges` on `n` vertices.
pub fn forest_components(g: &DualGraph, edges: impl IntoIterator<Item = EdgeId>) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in edges {
        let (a, b) = g.endpoints(e);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        groups.entry(find(&mut parent, v)).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Canonical labels (part of the smallest vertex gets 0, ...) from components.
pub fn labels_from_components(n: usize, comps: &[Vec<usize>]) -> Vec<usize> {
    let mut sorted: Vec<&Vec<usize>> = comps.iter().collect();
    sorted.sort_by_key(|c| c[0]);
    let mut labels = vec![0; n];
    for (l, c) in sorted.iter().enumerate() {
        for &v in c.iter() {
            labels[v] = l;
        }
    }
    labels
}

fn tree_path(g: &DualGraph, tree: &EdgeSet, from: usize, to: usize) -> Vec<EdgeId> {
    let n = g.vertex_count();
    let mut prev: Vec<Option<(usize, EdgeId)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        for &e in tree {
            let (a, b) = g.endpoints(e);
            let w = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut v = to;
    while v != from {
        let (p, e) = prev[v].expect("tree is spanning");
        path.push(e);
        v = p;
    }
    path
}

fn tree_neighbors(g: &DualGraph, tree: &EdgeSet, u: usize) -> Vec<(usize, EdgeId)> {
    tree.iter()
        .filter_map(|&e| {
            let (a, b) = g.endpoints(e);
            if a == u {
                Some((b, e))
            } else if b == u {
                Some((a, e))
            } else {
                None
            }
        })
        .collect()
}

/// Exact one-step law of the composite walk from `(tree, marked)`: every
/// draw `(e+, e-, m, u, v)` is enumerated and its probability added to the
/// resulting state. Draws that collide with another marked edge are dropped.
pub fn composite_transitions(
    g: &DualGraph,
    tree: &EdgeSet,
    marked: &EdgeSet,
) -> HashMap<(EdgeSet, EdgeSet), f64> {
    let non_tree: Vec<EdgeId> = (0..g.edge_count())
        .map(EdgeId)
        .filter(|e| !tree.contains(e))
        .collect();
    let mut out = HashMap::new();
    for &e_plus in &non_tree {
        let (a, b) = g.endpoints(e_plus);
        let mut cycle = tree_path(g, tree, a, b);
        cycle.push(e_plus);
        let free: Vec<EdgeId> = cycle.iter().copied().filter(|e| !marked.contains(e)).collect();
        for &e_minus in &free {
            let mut new_tree = tree.clone();
            new_tree.insert(e_plus);
            new_tree.remove(&e_minus);
            let p_tree = 1.0 / (non_tree.len() as f64 * free.len() as f64);
            for &m in marked {
                let (ma, mb) = g.endpoints(m);
                for u in [ma, mb] {
                    let nbrs = tree_neighbors(g, &new_tree, u);
                    for &(_, m_new) in &nbrs {
                        let mut new_marked = marked.clone();
                        new_marked.remove(&m);
                        if !new_marked.insert(m_new) {
                            continue;
                        }
                        let p = p_tree / marked.len() as f64 / 2.0 / nbrs.len() as f64;
                        *out.entry((new_tree.clone(), new_marked)).or_insert(0.0) += p;
                    }
                }
            }
        }
    }
    out
}

/// Exact one-step law of the single-step variant.
pub fn single_step_transitions(
    g: &DualGraph,
    tree: &EdgeSet,
    marked: &EdgeSet,
    p_cycle: f64,
) -> HashMap<(EdgeSet, EdgeSet), f64> {
    let non_tree: Vec<EdgeId> = (0..g.edge_count())
        .map(EdgeId)
        .filter(|e| !tree.contains(e))
        .collect();
    let mut out = HashMap::new();
    for &e_plus in &non_tree {
        let (a, b) = g.endpoints(e_plus);
        let mut cycle = tree_path(g, tree, a, b);
        cycle.push(e_plus);
        let free: Vec<EdgeId> = cycle.iter().copied().filter(|e| !marked.contains(e)).collect();
        for &e_minus in &free {
            let mut new_tree = tree.clone();
            new_tree.insert(e_plus);
            new_tree.remove(&e_minus);
            let p = p_cycle / (non_tree.len() as f64 * free.len() as f64);
            *out.entry((new_tree, marked.clone())).or_insert(0.0) += p;
        }
    }
    for &m in marked {
        let (ma, mb) = g.endpoints(m);
        for u in [ma, mb] {
            let nbrs = tree_neighbors(g, tree, u);
            for &(_, m_new) in &nbrs {
                let mut new_marked = marked.clone();
                new_marked.remove(&m);
                if !new_marked.insert(m_new) {
                    continue;
                }
                let p = (1.0 - p_cycle) / marked.len() as f64 / 2.0 / nbrs.len() as f64;
                *out.entry((tree.clone(), new_marked)).or_insert(0.0) += p;
            }
        }
    }
    out
}

/// All labelings of `n` vertices into exactly `d` connected parts whose
/// weights lie in `[lo, hi]`, canonicalized and deduplicated.
pub fn filtered_labelings(g: &DualGraph, d: usize, weight: impl Fn(usize) -> f64, lo: f64, hi: f64) -> BTreeSet<Vec<usize>> {
    let n = g.vertex_count();
    let mut out = BTreeSet::new();
    let mut labels = vec![0usize; n];
    // vertex 0 fixed to label 0 removes one symmetry
    let total = (d as u64).pow((n - 1) as u32);
    for code in 0..total {
        let mut c = code;
        for slot in labels.iter_mut().skip(1) {
            *slot = (c % d as u64) as usize;
            c /= d as u64;
        }
        let mut weights = vec![0.0; d];
        let mut members = vec![Vec::new(); d];
        for v in 0..n {
            weights[labels[v]] += weight(v);
            members[labels[v]].push(v);
        }
        if members.iter().any(|m| m.is_empty()) {
            continue;
        }
        if weights.iter().any(|&w| w < lo || w > hi) {
            continue;
        }
        if !members.iter().all(|m| g.is_connected_subset(m)) {
            continue;
        }
        out.insert(labels_from_components(n, &members));
    }
    out
}
