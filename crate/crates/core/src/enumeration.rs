//! Exact oracles at desk scale: balanced partition catalogs, lifted-state
//! enumeration, exact target laws, and the independent spanning-tree sampler
//! for two parts.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{Energy, EnergyError};
use crate::graph::{DualGraph, EdgeId};
use crate::spanning::uniform_spanning_tree;
use crate::state::{BalanceSpec, LiftedKey, Partition};
use crate::SCHEMA_VERSION;

/// Default cap on search-tree nodes.
pub const DEFAULT_WORK_LIMIT: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum EnumerationError {
    #[error("work limit of {0} search nodes exceeded")]
    WorkLimit(u64),
    #[error("need between 1 and {vertices} parts, got {parts}")]
    BadPartCount { parts: usize, vertices: usize },
    #[error("no balanced cut found in {0} spanning trees")]
    BaselineExhausted(usize),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Budget {
    used: u64,
    limit: u64,
}

impl Budget {
    fn tick(&mut self) -> Result<(), EnumerationError> {
        self.used += 1;
        if self.used > self.limit {
            Err(EnumerationError::WorkLimit(self.limit))
        } else {
            Ok(())
        }
    }
}

/// Canonical balanced partitions with an unnormalized log mass each.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCatalog {
    pub partitions: Vec<Partition>,
    /// `ln` of the unnormalized target mass; all zero until [`Self::weighted`].
    pub log_weights: Vec<f64>,
}

impl PartitionCatalog {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Position of each canonical assignment.
    pub fn index(&self) -> HashMap<Vec<usize>, usize> {
        self.partitions
            .iter()
            .enumerate()
            .map(|(i, p)| (p.assignment().to_vec(), i))
            .collect()
    }

    /// Copy with log weights `J(xi) + (s - gamma + 1) ln tau(xi)`.
    pub fn weighted(&self, g: &DualGraph, energy: &Energy) -> Result<Self, EnumerationError> {
        let log_weights = self
            .partitions
            .iter()
            .map(|p| energy.partition_log_mass(g, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            partitions: self.partitions.clone(),
            log_weights,
        })
    }

    /// JSON-lines export: one `{"schema_version", "assignment", "log_weight"}` per partition.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), EnumerationError> {
        #[derive(Serialize)]
        struct Line<'a> {
            schema_version: u32,
            assignment: &'a [usize],
            log_weight: f64,
        }
        for (p, &w) in self.partitions.iter().zip(&self.log_weights) {
            let line = Line {
                schema_version: SCHEMA_VERSION,
                assignment: p.assignment(),
                log_weight: w,
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Normalized probabilities from the catalog's log weights (log-sum-exp).
pub fn exact_target_distribution(catalog: &PartitionCatalog) -> Vec<f64> {
    let max = catalog
        .log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = catalog.log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    scaled.into_iter().map(|x| x / total).collect()
}

struct Search<'a> {
    g: &'a DualGraph,
    weight: Vec<f64>,
    d: usize,
    lo: f64,
    hi: f64,
    label: Vec<usize>,
    // per part level: 0 free, 1 in the growing set, 2 seen as candidate or excluded
    mark: Vec<Vec<u8>>,
    budget: Budget,
    out: Vec<Partition>,
}

const UNASSIGNED: usize = usize::MAX;

impl Search<'_> {
    fn part(&mut self, k: usize) -> Result<(), EnumerationError> {
        self.budget.tick()?;
        let n = self.g.vertex_count();
        let Some(start) = (0..n).find(|&v| self.label[v] == UNASSIGNED) else {
            return Ok(());
        };
        if k == self.d - 1 {
            let rest: Vec<usize> = (0..n).filter(|&v| self.label[v] == UNASSIGNED).collect();
            let w: f64 = rest.iter().map(|&v| self.weight[v]).sum();
            if self.lo <= w && w <= self.hi && self.g.is_connected_subset(&rest) {
                let mut labels = self.label.clone();
                for v in rest {
                    labels[v] = k;
                }
                self.out.push(Partition::from_labels(labels));
            }
            return Ok(());
        }
        self.label[start] = k;
        self.mark[k][start] = 1;
        let mut candidates = Vec::new();
        self.push_neighbors(k, start, &mut candidates);
        let w = self.weight[start];
        let result = self.grow(k, w, &mut candidates, 0);
        self.unmark_all(k, &candidates);
        self.mark[k][start] = 0;
        self.label[start] = UNASSIGNED;
        result
    }

    fn push_neighbors(&mut self, k: usize, v: usize, candidates: &mut Vec<usize>) {
        for &(w, _) in self.g.neighbors(v) {
            if self.label[w] == UNASSIGNED && self.mark[k][w] == 0 {
                self.mark[k][w] = 2;
                candidates.push(w);
            }
        }
    }

    fn unmark_all(&mut self, k: usize, vs: &[usize]) {
        for &v in vs {
            self.mark[k][v] = 0;
        }
    }

    /// Enumerates connected supersets of the current set using candidates
    /// from position `from` on; earlier candidates are excluded.
    fn grow(&mut self, k: usize, weight: f64, candidates: &mut Vec<usize>, from: usize) -> Result<(), EnumerationError> {
        self.budget.tick()?;
        if weight >= self.lo && weight <= self.hi && self.remainder_feasible(k) {
            self.part(k + 1)?;
        }
        for i in from..candidates.len() {
            let v = candidates[i];
            let w = weight + self.weight[v];
            if w > self.hi {
                continue;
            }
            self.label[v] = k;
            self.mark[k][v] = 1;
            let before = candidates.len();
            self.push_neighbors(k, v, candidates);
            self.grow(k, w, candidates, i + 1)?;
            let added: Vec<usize> = candidates.drain(before..).collect();
            self.unmark_all(k, &added);
            self.mark[k][v] = 2;
            self.label[v] = UNASSIGNED;
        }
        Ok(())
    }

    /// Every component of the unassigned vertices must hold a whole number
    /// of balanced parts, and those numbers must sum to the parts left.
    fn remainder_feasible(&self, k: usize) -> bool {
        let left = self.d - k - 1;
        let n = self.g.vertex_count();
        let mut seen = vec![false; n];
        let (mut min_parts, mut max_parts) = (0usize, 0usize);
        for s in 0..n {
            if self.label[s] != UNASSIGNED || seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let (mut w, mut size) = (0.0, 0usize);
            while let Some(v) = stack.pop() {
                w += self.weight[v];
                size += 1;
                for &(x, _) in self.g.neighbors(v) {
                    if self.label[x] == UNASSIGNED && !seen[x] {
                        seen[x] = true;
                        stack.push(x);
                    }
                }
            }
            let lo_j = if self.hi > 0.0 { (w / self.hi).ceil().max(1.0) as usize } else { 1 };
            let hi_j = if self.lo > 0.0 {
                (w / self.lo).floor() as usize
            } else {
                size
            };
            let hi_j = hi_j.min(size);
            if lo_j > hi_j {
                return false;
            }
            min_parts += lo_j;
            max_parts += hi_j;
        }
        min_parts <= left && left <= max_parts
    }
}

/// All connected `d`-partitions whose parts satisfy `balance`, found by
/// growing each part from the smallest unassigned vertex. Parts come out in
/// canonical order, so each partition appears once.
pub fn enumerate_partitions(
    g: &DualGraph,
    d: usize,
    balance: &BalanceSpec,
    work_limit: u64,
) -> Result<PartitionCatalog, EnumerationError> {
    let n = g.vertex_count();
    if d == 0 || d > n {
        return Err(EnumerationError::BadPartCount { parts: d, vertices: n });
    }
    let (lo, hi) = balance.bounds(balance.mode.total(g), d);
    let mut search = Search {
        g,
        weight: (0..n).map(|v| balance.mode.weight(g, v)).collect(),
        d,
        lo,
        hi,
        label: vec![UNASSIGNED; n],
        mark: vec![vec![0; n]; d],
        budget: Budget {
            used: 0,
            limit: work_limit,
        },
        out: Vec::new(),
    };
    search.part(0)?;
    let partitions = search.out;
    Ok(PartitionCatalog {
        log_weights: vec![0.0; partitions.len()],
        partitions,
    })
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
}

fn forest_labels(g: &DualGraph, edges: impl Iterator<Item = EdgeId>) -> Vec<usize> {
    let mut dsu = Dsu((0..g.vertex_count()).collect());
    for e in edges {
        let (a, b) = g.endpoints(e);
        let (ra, rb) = (dsu.find(a), dsu.find(b));
        dsu.0[ra] = rb;
    }
    (0..g.vertex_count()).map(|v| dsu.find(v)).collect()
}

/// Every spanning tree, by deciding edges in order: include when it closes no
/// cycle, exclude when the remaining edges still connect the graph.
pub fn enumerate_spanning_trees(g: &DualGraph, work_limit: u64) -> Result<Vec<Vec<EdgeId>>, EnumerationError> {
    fn rec(
        g: &DualGraph,
        i: usize,
        chosen: &mut Vec<EdgeId>,
        excluded: &mut Vec<bool>,
        budget: &mut Budget,
        out: &mut Vec<Vec<EdgeId>>,
    ) -> Result<(), EnumerationError> {
        budget.tick()?;
        let n = g.vertex_count();
        if chosen.len() + 1 == n {
            out.push(chosen.clone());
            return Ok(());
        }
        if i == g.edge_count() {
            return Ok(());
        }
        let e = EdgeId(i);
        let (a, b) = g.endpoints(e);
        let labels = forest_labels(g, chosen.iter().copied());
        if labels[a] != labels[b] {
            chosen.push(e);
            rec(g, i + 1, chosen, excluded, budget, out)?;
            chosen.pop();
        }
        excluded[i] = true;
        let available = (0..g.edge_count()).filter(|&j| !excluded[j]).map(EdgeId);
        let labels = forest_labels(g, available);
        if labels.iter().all(|&l| l == labels[0]) {
            rec(g, i + 1, chosen, excluded, budget, out)?;
        }
        excluded[i] = false;
        Ok(())
    }
    let mut budget = Budget { used: 0, limit: work_limit };
    let mut out = Vec::new();
    rec(g, 0, &mut Vec::new(), &mut vec![false; g.edge_count()], &mut budget, &mut out)?;
    Ok(out)
}

/// Every lifted state `(T, M)` with `|M| = d - 1` whose forest is balanced.
pub fn enumerate_lifted_states(
    g: &DualGraph,
    d: usize,
    balance: &BalanceSpec,
    work_limit: u64,
) -> Result<Vec<LiftedKey>, EnumerationError> {
    let n = g.vertex_count();
    if d == 0 || d > n {
        return Err(EnumerationError::BadPartCount { parts: d, vertices: n });
    }
    let mut budget = Budget { used: 0, limit: work_limit };
    let trees = enumerate_spanning_trees(g, work_limit)?;
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..d - 1).collect();
    for tree in trees {
        let k = tree.len();
        subset.clear();
        subset.extend(0..d - 1);
        loop {
            budget.tick()?;
            let marked: Vec<EdgeId> = subset.iter().map(|&i| tree[i]).collect();
            let forest = tree.iter().copied().filter(|e| !marked.contains(e));
            let partition = Partition::from_labels(forest_labels(g, forest));
            if crate::state::is_balanced(&partition, g, balance) {
                let mut t = tree.clone();
                t.sort_unstable();
                let mut m = marked;
                m.sort_unstable();
                out.push((t, m));
            }
            // next combination of d - 1 out of k tree edges
            let r = subset.len();
            let Some(i) = (0..r).rev().find(|&i| subset[i] != i + k - r) else { break };
            subset[i] += 1;
            for j in i + 1..r {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Two-part sample from the spanning tree distribution: a uniform spanning
/// tree, then a uniform choice among its balanced edges; trees with none are
/// redrawn, up to `max_attempts` trees.
///
/// Partitions are weighted by `sum_T 1[T realizes xi] / b(T)`, where `b(T)`
/// counts balanced edges of `T`. This equals `tau(xi)` when every tree has at
/// most one balanced edge, which holds for exact balance with positive
/// weights.
pub fn recom2_baseline_sample<R: Rng + ?Sized>(
    g: &DualGraph,
    balance: &BalanceSpec,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Partition, EnumerationError> {
    let n = g.vertex_count();
    let (lo, hi) = balance.bounds(balance.mode.total(g), 2);
    let total = balance.mode.total(g);
    for _ in 0..max_attempts {
        let tree = uniform_spanning_tree(g, rng);
        let mut adj = vec![Vec::new(); n];
        for &e in &tree {
            let (a, b) = g.endpoints(e);
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        // Root at 0; subtree weights in reverse BFS order.
        let mut order = vec![0];
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            i += 1;
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, e));
                    order.push(w);
                }
            }
        }
        let mut sub: Vec<f64> = (0..n).map(|v| balance.mode.weight(g, v)).collect();
        let mut balanced = Vec::new();
        for &v in order.iter().rev() {
            if let Some((p, e)) = parent[v] {
                let inside = sub[v];
                if (lo..=hi).contains(&inside) && (lo..=hi).contains(&(total - inside)) {
                    balanced.push(e);
                }
                sub[p] += inside;
            }
        }
        if balanced.is_empty() {
            continue;
        }
        let cut = balanced[rng.random_range(0..balanced.len())];
        let labels = forest_labels(g, tree.iter().copied().filter(|&e| e != cut));
        return Ok(Partition::from_labels(labels));
    }
    Err(EnumerationError::BaselineExhausted(max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergySpec;

    fn exact() -> BalanceSpec {
        BalanceSpec::node(0.0)
    }

    #[test]
    fn small_catalogs() {
        let c4 = enumerate_partitions(&DualGraph::cycle(4), 2, &exact(), 1000).unwrap();
        assert_eq!(c4.len(), 2);
        let p4 = enumerate_partitions(&DualGraph::path(4), 2, &exact(), 1000).unwrap();
        assert_eq!(p4.len(), 1);
        assert_eq!(p4.partitions[0].assignment(), &[0, 0, 1, 1]);
    }

    #[test]
    fn work_limit_is_enforced() {
        let g = DualGraph::grid(6, 6);
        assert!(matches!(
            enumerate_partitions(&g, 2, &exact(), 100),
            Err(EnumerationError::WorkLimit(100))
        ));
    }

    #[test]
    fn spanning_tree_counts() {
        assert_eq!(enumerate_spanning_trees(&DualGraph::complete(4), 1000).unwrap().len(), 16);
        assert_eq!(enumerate_spanning_trees(&DualGraph::grid(3, 3), 100_000).unwrap().len(), 192);
    }

    #[test]
    fn lifted_states_of_c4() {
        // 4 trees (paths), each has exactly one middle edge giving a 2|2 split
        let states = enumerate_lifted_states(&DualGraph::cycle(4), 2, &exact(), 1000).unwrap();
        assert_eq!(states.len(), 4);
        let tree_graph = enumerate_lifted_states(&DualGraph::path(6), 2, &BalanceSpec::node(0.34), 1000).unwrap();
        // one tree; removing edges 1-2, 2-3, 3-4 leaves sides within 3 * (1 +- 0.34)
        assert_eq!(tree_graph.len(), 3);
    }

    #[test]
    fn exact_distributions() {
        let g = DualGraph::cycle(4);
        let catalog = enumerate_partitions(&g, 2, &exact(), 1000).unwrap();
        assert_eq!(exact_target_distribution(&catalog), vec![0.5, 0.5]);
        let energy = Energy::new(&g, 2, &EnergySpec::spanning_tree(), &[]).unwrap();
        let w = catalog.weighted(&g, &energy).unwrap();
        assert_eq!(w.log_weights, vec![2f64.ln(), 2f64.ln()]);
    }

    #[test]
    fn baseline_on_path_is_the_middle_split() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g = DualGraph::path(4);
        for _ in 0..20 {
            let p = recom2_baseline_sample(&g, &exact(), &mut rng, 10).unwrap();
            assert_eq!(p.assignment(), &[0, 0, 1, 1]);
        }
        assert!(matches!(
            recom2_baseline_sample(&DualGraph::path(3), &exact(), &mut rng, 5),
            Err(EnumerationError::BaselineExhausted(5))
        ));
    }
}
