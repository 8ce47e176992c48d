//! Uniform spanning trees by Wilson's loop-erased random walk.

use rand::Rng;

use crate::graph::{DualGraph, EdgeId};

/// Draws a uniformly random spanning tree of `g`, returned as `n - 1` edge ids.
pub fn uniform_spanning_tree<R: Rng + ?Sized>(g: &DualGraph, rng: &mut R) -> Vec<EdgeId> {
    let n = g.vertex_count();
    let mut in_tree = vec![false; n];
    // next[v]: the step the most recent walk took out of v
    let mut next: Vec<Option<(usize, EdgeId)>> = vec![None; n];
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    for start in 0..n {
        let mut v = start;
        while !in_tree[v] {
            let neighbors = g.neighbors(v);
            let step = neighbors[rng.random_range(0..neighbors.len())];
            next[v] = Some(step);
            v = step.0;
        }
        // Retrace the loop-erased path.
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            let (w, e) = next[v].expect("walk visited v");
            edges.push(e);
            v = w;
        }
    }
    edges
}
