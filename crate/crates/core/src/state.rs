//! The lifted walk state: a spanning tree `T` with `d - 1` marked edges `M`.
//! Deleting the marked edges leaves a forest whose components are the parts
//! of a connected partition.
//!
//! Parts are stored in *slots*. A slot keeps its identity across moves that do
//! not touch it, so per-part caches stay valid; [`MarkedTreeState::partition`]
//! converts slots to canonical labels.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DualGraph, EdgeId};
use crate::spanning::uniform_spanning_tree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("tree has {got} edges, expected {expected}")]
    WrongTreeSize { got: usize, expected: usize },
    #[error("tree edges contain a cycle or do not span the graph")]
    NotSpanningTree,
    #[error("marked edge {0:?} is not a tree edge")]
    MarkedNotInTree(EdgeId),
    #[error("marked edge {0:?} listed twice")]
    DuplicateMarked(EdgeId),
    #[error("need at least 2 parts, got {0}")]
    TooFewParts(usize),
    #[error("cannot split {vertices} vertices into {parts} parts")]
    TooManyParts { parts: usize, vertices: usize },
    #[error("no balanced configuration found after {attempts} spanning trees")]
    Infeasible { attempts: usize },
    #[error("invalid balance tolerance {0}; expected 0 <= epsilon < 1")]
    InvalidEpsilon(f64),
    #[error("invalid move: {0}")]
    InvalidMove(&'static str),
    #[error("state invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("assignment has {got} labels for {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },
    #[error("part {0} is not connected")]
    Disconnected(usize),
}

/// Assignment of every vertex to one of `d` parts, labeled canonically: the
/// part holding the smallest vertex id is `0`, the next new part seen in
/// vertex order is `1`, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    parts: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels. Does not check connectivity.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let mut remap = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            parts: remap.len(),
        }
    }

    /// Canonicalizes `labels` and checks that every part is connected in `g`.
    pub fn new(g: &DualGraph, labels: Vec<usize>) -> Result<Self, PartitionError> {
        if labels.len() != g.vertex_count() {
            return Err(PartitionError::LengthMismatch {
                got: labels.len(),
                expected: g.vertex_count(),
            });
        }
        let p = Self::from_labels(labels);
        for (i, members) in p.members().iter().enumerate() {
            if !g.is_connected_subset(members) {
                return Err(PartitionError::Disconnected(i));
            }
        }
        Ok(p)
    }

    #[inline]
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn label(&self, v: usize) -> usize {
        self.assignment[v]
    }

    #[inline]
    pub fn parts(&self) -> usize {
        self.parts
    }

    /// Vertices of each part, in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.parts];
        for (v, &l) in self.assignment.iter().enumerate() {
            out[l].push(v);
        }
        out
    }

    pub fn part_weights(&self, g: &DualGraph, mode: BalanceMode) -> Vec<f64> {
        let mut out = vec![0.0; self.parts];
        for (v, &l) in self.assignment.iter().enumerate() {
            out[l] += mode.weight(g, v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    #[default]
    Population,
    Node,
}

impl BalanceMode {
    #[inline]
    pub fn weight(self, g: &DualGraph, v: usize) -> f64 {
        match self {
            BalanceMode::Population => g.population(v),
            BalanceMode::Node => 1.0,
        }
    }

    pub fn total(self, g: &DualGraph) -> f64 {
        match self {
            BalanceMode::Population => g.total_population(),
            BalanceMode::Node => g.vertex_count() as f64,
        }
    }
}

/// Hard balance constraint: each part's weight must lie within a relative
/// tolerance `epsilon` of the ideal `W / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    #[serde(default)]
    pub mode: BalanceMode,
    pub epsilon: f64,
}

impl BalanceSpec {
    pub fn population(epsilon: f64) -> Self {
        Self {
            mode: BalanceMode::Population,
            epsilon,
        }
    }

    pub fn node(epsilon: f64) -> Self {
        Self {
            mode: BalanceMode::Node,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if (0.0..1.0).contains(&self.epsilon) {
            Ok(())
        } else {
            Err(StateError::InvalidEpsilon(self.epsilon))
        }
    }

    /// Inclusive `[lo, hi]` bounds on a part's weight. A tiny slack absorbs
    /// floating-point noise in the ideal `W / d`.
    pub fn bounds(&self, total: f64, parts: usize) -> (f64, f64) {
        let ideal = total / parts as f64;
        let slack = 1e-9 * ideal.abs();
        (
            ideal * (1.0 - self.epsilon) - slack,
            ideal * (1.0 + self.epsilon) + slack,
        )
    }
}

/// Whether every part of `partition` satisfies `spec`.
pub fn is_balanced(partition: &Partition, g: &DualGraph, spec: &BalanceSpec) -> bool {
    let (lo, hi) = spec.bounds(spec.mode.total(g), partition.parts());
    partition
        .part_weights(g, spec.mode)
        .iter()
        .all(|&w| (lo..=hi).contains(&w))
}

/// Sorted tree and marked edge lists; identifies a lifted state.
pub type LiftedKey = (Vec<EdgeId>, Vec<EdgeId>);

/// A change to the lifted state: an optional tree-edge swap and an optional
/// move of one marked edge. Identity components are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepDelta {
    /// `(added, removed)` with `added != removed`.
    pub swap: Option<(EdgeId, EdgeId)>,
    /// `(position in the marked list, new edge)`, new edge differs from the old.
    pub remark: Option<(usize, EdgeId)>,
}

/// A connected component of the new forest and the slot it will occupy.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentUpdate {
    pub slot: usize,
    pub vertices: Vec<usize>,
    pub population: f64,
    pub min_vertex: usize,
}

/// Effect of a [`StepDelta`] on the induced partition.
#[derive(Debug, Clone, PartialEq)]
pub enum ForestChange {
    Unchanged,
    Changed(Vec<ComponentUpdate>),
}

impl ForestChange {
    pub fn is_unchanged(&self) -> bool {
        matches!(self, ForestChange::Unchanged)
    }

    pub fn components(&self) -> &[ComponentUpdate] {
        match self {
            ForestChange::Unchanged => &[],
            ForestChange::Changed(c) => c,
        }
    }

    /// Checks only the rebuilt components; the rest of the partition is unchanged.
    pub fn is_balanced(&self, g: &DualGraph, spec: &BalanceSpec, parts: usize) -> bool {
        let (lo, hi) = spec.bounds(spec.mode.total(g), parts);
        self.components().iter().all(|c| {
            let w = match spec.mode {
                BalanceMode::Population => c.population,
                BalanceMode::Node => c.vertices.len() as f64,
            };
            (lo..=hi).contains(&w)
        })
    }
}

/// Reusable buffers for forest traversals.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    stamp: Vec<u32>,
    epoch: u32,
    stack: Vec<usize>,
}

impl Workspace {
    fn begin(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    fn visit(&mut self, v: usize) -> bool {
        if self.stamp[v] == self.epoch {
            false
        } else {
            self.stamp[v] = self.epoch;
            true
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarkedTreeState {
    in_tree: Vec<bool>,
    tree_adj: Vec<Vec<(usize, EdgeId)>>,
    // rooted at vertex 0
    parent: Vec<Option<(usize, EdgeId)>>,
    depth: Vec<usize>,
    non_tree: Vec<EdgeId>,
    non_tree_pos: Vec<usize>,
    marked: Vec<EdgeId>,
    is_marked: Vec<bool>,
    part_of: Vec<usize>,
    part_size: Vec<usize>,
    part_population: Vec<f64>,
    part_min: Vec<usize>,
}

impl MarkedTreeState {
    pub fn new(g: &DualGraph, tree: &[EdgeId], marked: &[EdgeId]) -> Result<Self, StateError> {
        let n = g.vertex_count();
        let m = g.edge_count();
        if tree.len() + 1 != n {
            return Err(StateError::WrongTreeSize {
                got: tree.len(),
                expected: n - 1,
            });
        }
        let mut in_tree = vec![false; m];
        let mut tree_adj = vec![Vec::new(); n];
        for &e in tree {
            if e.0 >= m || std::mem::replace(&mut in_tree[e.0], true) {
                return Err(StateError::NotSpanningTree);
            }
            let (a, b) = g.endpoints(e);
            tree_adj[a].push((b, e));
            tree_adj[b].push((a, e));
        }
        let mut is_marked = vec![false; m];
        for &e in marked {
            if e.0 >= m || !in_tree[e.0] {
                return Err(StateError::MarkedNotInTree(e));
            }
            if std::mem::replace(&mut is_marked[e.0], true) {
                return Err(StateError::DuplicateMarked(e));
            }
        }

        // Root at 0; n - 1 edges reaching every vertex means a spanning tree.
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &(w, e) in &tree_adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    parent[w] = Some((v, e));
                    depth[w] = depth[v] + 1;
                    stack.push(w);
                }
            }
        }
        if reached != n {
            return Err(StateError::NotSpanningTree);
        }

        let mut non_tree = Vec::with_capacity(m + 1 - n);
        let mut non_tree_pos = vec![usize::MAX; m];
        for e in 0..m {
            if !in_tree[e] {
                non_tree_pos[e] = non_tree.len();
                non_tree.push(EdgeId(e));
            }
        }

        let mut state = Self {
            in_tree,
            tree_adj,
            parent,
            depth,
            non_tree,
            non_tree_pos,
            marked: marked.to_vec(),
            is_marked,
            part_of: vec![usize::MAX; n],
            part_size: Vec::new(),
            part_population: Vec::new(),
            part_min: Vec::new(),
        };
        state.relabel_all(g);
        Ok(state)
    }

    /// Recomputes every part from scratch; slots follow canonical order.
    fn relabel_all(&mut self, g: &DualGraph) {
        let (part_of, size, population, min) = self.forest_components(g);
        self.part_of = part_of;
        self.part_size = size;
        self.part_population = population;
        self.part_min = min;
    }

    #[allow(clippy::type_complexity)]
    fn forest_components(&self, g: &DualGraph) -> (Vec<usize>, Vec<usize>, Vec<f64>, Vec<usize>) {
        let n = g.vertex_count();
        let mut part_of = vec![usize::MAX; n];
        let (mut size, mut population, mut min) = (Vec::new(), Vec::new(), Vec::new());
        let mut stack = Vec::new();
        for start in 0..n {
            if part_of[start] != usize::MAX {
                continue;
            }
            let slot = size.len();
            part_of[start] = slot;
            stack.push(start);
            let (mut count, mut pop) = (0, 0.0);
            while let Some(v) = stack.pop() {
                count += 1;
                pop += g.population(v);
                for &(w, e) in &self.tree_adj[v] {
                    if !self.is_marked[e.0] && part_of[w] == usize::MAX {
                        part_of[w] = slot;
                        stack.push(w);
                    }
                }
            }
            size.push(count);
            population.push(pop);
            min.push(start);
        }
        (part_of, size, population, min)
    }

    /// Number of parts `d = |M| + 1`.
    #[inline]
    pub fn parts(&self) -> usize {
        self.marked.len() + 1
    }

    #[inline]
    pub fn marked(&self) -> &[EdgeId] {
        &self.marked
    }

    #[inline]
    pub fn is_marked(&self, e: EdgeId) -> bool {
        self.is_marked[e.0]
    }

    #[inline]
    pub fn in_tree(&self, e: EdgeId) -> bool {
        self.in_tree[e.0]
    }

    pub fn tree_edges(&self) -> Vec<EdgeId> {
        (0..self.in_tree.len())
            .filter(|&e| self.in_tree[e])
            .map(EdgeId)
            .collect()
    }

    /// Edges of `E \ T`, in no particular order.
    #[inline]
    pub fn non_tree_edges(&self) -> &[EdgeId] {
        &self.non_tree
    }

    #[inline]
    pub fn tree_neighbors(&self, v: usize) -> &[(usize, EdgeId)] {
        &self.tree_adj[v]
    }

    #[inline]
    pub fn tree_degree(&self, v: usize) -> usize {
        self.tree_adj[v].len()
    }

    /// Slot currently holding vertex `v`.
    #[inline]
    pub fn slot_of(&self, v: usize) -> usize {
        self.part_of[v]
    }

    pub fn slots(&self) -> &[usize] {
        &self.part_of
    }

    #[inline]
    pub fn slot_size(&self, slot: usize) -> usize {
        self.part_size[slot]
    }

    #[inline]
    pub fn slot_population(&self, slot: usize) -> f64 {
        self.part_population[slot]
    }

    #[inline]
    pub fn slot_min_vertex(&self, slot: usize) -> usize {
        self.part_min[slot]
    }

    /// Slots ordered by canonical label.
    pub fn canonical_slots(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = (0..self.part_min.len()).collect();
        slots.sort_unstable_by_key(|&s| self.part_min[s]);
        slots
    }

    /// The partition induced by `T \ M`, canonically labeled.
    pub fn partition(&self) -> Partition {
        let order = self.canonical_slots();
        let mut label_of_slot = vec![0; order.len()];
        for (label, &slot) in order.iter().enumerate() {
            label_of_slot[slot] = label;
        }
        Partition {
            assignment: self.part_of.iter().map(|&s| label_of_slot[s]).collect(),
            parts: order.len(),
        }
    }

    /// The partition obtained by a full traversal of the forest, ignoring the
    /// incrementally maintained slots.
    pub fn partition_from_scratch(&self, g: &DualGraph) -> Partition {
        let (part_of, ..) = self.forest_components(g);
        Partition::from_labels(part_of)
    }

    pub fn key(&self) -> LiftedKey {
        let mut marked = self.marked.clone();
        marked.sort_unstable();
        (self.tree_edges(), marked)
    }

    /// Tree path between `a` and `b` as edge ids.
    pub fn tree_path(&self, a: usize, b: usize) -> Vec<EdgeId> {
        let (mut x, mut y) = (a, b);
        let mut up = Vec::new();
        let mut down = Vec::new();
        while self.depth[x] > self.depth[y] {
            let (p, e) = self.parent[x].expect("non-root has parent");
            up.push(e);
            x = p;
        }
        while self.depth[y] > self.depth[x] {
            let (p, e) = self.parent[y].expect("non-root has parent");
            down.push(e);
            y = p;
        }
        while x != y {
            let (px, ex) = self.parent[x].expect("non-root has parent");
            let (py, ey) = self.parent[y].expect("non-root has parent");
            up.push(ex);
            down.push(ey);
            x = px;
            y = py;
        }
        up.extend(down.into_iter().rev());
        up
    }

    fn is_descendant(&self, mut x: usize, ancestor: usize) -> bool {
        while self.depth[x] > self.depth[ancestor] {
            x = self.parent[x].expect("non-root has parent").0;
        }
        x == ancestor
    }

    /// Computes the partition that `delta` would produce without modifying
    /// the state. Only parts touched by the changed edges are traversed.
    pub fn evaluate(
        &self,
        g: &DualGraph,
        delta: &StepDelta,
        ws: &mut Workspace,
    ) -> Result<ForestChange, StateError> {
        let (added, removed) = match delta.swap {
            Some((a, r)) => {
                if self.in_tree[a.0] || !self.in_tree[r.0] || a == r {
                    return Err(StateError::InvalidMove("swap must add a non-tree edge and remove a tree edge"));
                }
                if self.is_marked[r.0] {
                    return Err(StateError::InvalidMove("marked edges cannot be removed"));
                }
                (Some(a), Some(r))
            }
            None => (None, None),
        };
        let (old_mark, new_mark) = match delta.remark {
            Some((idx, new)) => {
                let old = *self
                    .marked
                    .get(idx)
                    .ok_or(StateError::InvalidMove("marked index out of range"))?;
                let in_new_tree = (self.in_tree[new.0] && Some(new) != removed) || Some(new) == added;
                if !in_new_tree {
                    return Err(StateError::InvalidMove("new marked edge is not in the new tree"));
                }
                if new != old && self.is_marked[new.0] {
                    return Err(StateError::InvalidMove("marked edge collision"));
                }
                (Some(old), Some(new))
            }
            None => (None, None),
        };
        if delta.remark.is_none() {
            match added {
                None => return Ok(ForestChange::Unchanged),
                Some(a) => {
                    let (x, y) = g.endpoints(a);
                    // The cycle lies inside one part, so the vertex sets are unchanged.
                    if self.part_of[x] == self.part_of[y] {
                        return Ok(ForestChange::Unchanged);
                    }
                }
            }
        }

        let is_marked_after = |e: EdgeId| -> bool {
            Some(e) == new_mark || (self.is_marked[e.0] && Some(e) != old_mark)
        };

        let mut seeds: Vec<usize> = Vec::with_capacity(8);
        for e in [added, removed, old_mark, new_mark].into_iter().flatten() {
            let (a, b) = g.endpoints(e);
            seeds.push(a);
            seeds.push(b);
        }
        let mut touched: Vec<usize> = seeds.iter().map(|&v| self.part_of[v]).collect();
        touched.sort_unstable();
        touched.dedup();

        ws.begin(g.vertex_count());
        let mut components: Vec<Vec<usize>> = Vec::with_capacity(touched.len());
        for &seed in &seeds {
            if !ws.visit(seed) {
                continue;
            }
            let mut comp = vec![seed];
            ws.stack.clear();
            ws.stack.push(seed);
            while let Some(v) = ws.stack.pop() {
                for &(w, e) in &self.tree_adj[v] {
                    if Some(e) == removed || is_marked_after(e) {
                        continue;
                    }
                    if ws.visit(w) {
                        comp.push(w);
                        ws.stack.push(w);
                    }
                }
                if let Some(a) = added {
                    if !is_marked_after(a) {
                        let (x, y) = g.endpoints(a);
                        let other = if v == x {
                            Some(y)
                        } else if v == y {
                            Some(x)
                        } else {
                            None
                        };
                        if let Some(w) = other {
                            if ws.visit(w) {
                                comp.push(w);
                                ws.stack.push(w);
                            }
                        }
                    }
                }
            }
            components.push(comp);
        }
        if components.len() != touched.len() {
            return Err(StateError::Invariant(format!(
                "{} touched parts rebuilt into {} components",
                touched.len(),
                components.len()
            )));
        }

        // Greedy assignment of components to slots by overlap.
        let k = touched.len();
        let mut overlap = vec![0usize; k * k];
        for (c, comp) in components.iter().enumerate() {
            for &v in comp {
                let s = touched.binary_search(&self.part_of[v]).map_err(|_| {
                    StateError::Invariant("component escaped the touched parts".into())
                })?;
                overlap[c * k + s] += 1;
            }
        }
        let mut pairs: Vec<(usize, usize, usize)> = (0..k)
            .flat_map(|c| (0..k).map(move |s| (c, s)))
            .map(|(c, s)| (overlap[c * k + s], c, s))
            .collect();
        pairs.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut slot_of_comp = vec![usize::MAX; k];
        let mut slot_taken = vec![false; k];
        for (_, c, s) in pairs {
            if slot_of_comp[c] == usize::MAX && !slot_taken[s] {
                slot_of_comp[c] = s;
                slot_taken[s] = true;
            }
        }

        let unchanged = components.iter().enumerate().all(|(c, comp)| {
            let slot = touched[slot_of_comp[c]];
            comp.len() == self.part_size[slot] && comp.iter().all(|&v| self.part_of[v] == slot)
        });
        if unchanged {
            return Ok(ForestChange::Unchanged);
        }

        let updates = components
            .into_iter()
            .enumerate()
            .map(|(c, vertices)| ComponentUpdate {
                slot: touched[slot_of_comp[c]],
                population: vertices.iter().map(|&v| g.population(v)).sum(),
                min_vertex: *vertices.iter().min().expect("non-empty component"),
                vertices,
            })
            .collect();
        Ok(ForestChange::Changed(updates))
    }

    /// Applies `delta` with its evaluated `change`.
    pub fn commit(&mut self, g: &DualGraph, delta: &StepDelta, change: &ForestChange) {
        if let Some((added, removed)) = delta.swap {
            self.swap_tree_edge(g, added, removed);
        }
        if let Some((idx, new)) = delta.remark {
            let old = std::mem::replace(&mut self.marked[idx], new);
            self.is_marked[old.0] = false;
            self.is_marked[new.0] = true;
        }
        for c in change.components() {
            for &v in &c.vertices {
                self.part_of[v] = c.slot;
            }
            self.part_size[c.slot] = c.vertices.len();
            self.part_population[c.slot] = c.population;
            self.part_min[c.slot] = c.min_vertex;
        }
    }

    /// Evaluates and commits `delta` in one go.
    pub fn apply(&mut self, g: &DualGraph, delta: &StepDelta) -> Result<ForestChange, StateError> {
        let mut ws = Workspace::default();
        let change = self.evaluate(g, delta, &mut ws)?;
        self.commit(g, delta, &change);
        Ok(change)
    }

    fn swap_tree_edge(&mut self, g: &DualGraph, added: EdgeId, removed: EdgeId) {
        let (r0, r1) = g.endpoints(removed);
        let child = if self.parent[r0].map(|(_, e)| e) == Some(removed) {
            r0
        } else {
            r1
        };
        let (a, b) = g.endpoints(added);
        let (inner, outer) = if self.is_descendant(a, child) { (a, b) } else { (b, a) };

        self.tree_adj[r0].retain(|&(_, e)| e != removed);
        self.tree_adj[r1].retain(|&(_, e)| e != removed);
        self.tree_adj[a].push((b, added));
        self.tree_adj[b].push((a, added));
        self.in_tree[removed.0] = false;
        self.in_tree[added.0] = true;
        let pos = self.non_tree_pos[added.0];
        self.non_tree[pos] = removed;
        self.non_tree_pos[removed.0] = pos;
        self.non_tree_pos[added.0] = usize::MAX;

        // Reverse parent pointers on the path inner -> child, then hang the
        // detached subtree from `outer`.
        let mut prev = Some((outer, added));
        let mut cur = inner;
        loop {
            let up = self.parent[cur];
            self.parent[cur] = prev;
            if cur == child {
                break;
            }
            let (p, e) = up.expect("path reaches the detached root");
            prev = Some((cur, e));
            cur = p;
        }
        self.depth[inner] = self.depth[outer] + 1;
        let mut stack = vec![inner];
        while let Some(v) = stack.pop() {
            let pv = self.parent[v].map(|(p, _)| p);
            for i in 0..self.tree_adj[v].len() {
                let w = self.tree_adj[v][i].0;
                if Some(w) != pv {
                    self.depth[w] = self.depth[v] + 1;
                    stack.push(w);
                }
            }
        }
    }

    /// Full invariant check, `O(n + m)`.
    pub fn validate(&self, g: &DualGraph) -> Result<(), StateError> {
        let fresh = Self::new(g, &self.tree_edges(), &self.marked)?;
        for v in 0..g.vertex_count() {
            if let Some((p, e)) = self.parent[v] {
                if g.endpoints(e) != (p.min(v), p.max(v)) || !self.in_tree[e.0] {
                    return Err(StateError::Invariant(format!("bad parent edge at {v}")));
                }
                if self.depth[v] != self.depth[p] + 1 {
                    return Err(StateError::Invariant(format!("bad depth at {v}")));
                }
            } else if v != 0 {
                return Err(StateError::Invariant(format!("vertex {v} has no parent")));
            }
        }
        if self.non_tree.len() != fresh.non_tree.len()
            || self
                .non_tree
                .iter()
                .enumerate()
                .any(|(i, e)| self.in_tree[e.0] || self.non_tree_pos[e.0] != i)
        {
            return Err(StateError::Invariant("non-tree edge index out of sync".into()));
        }
        if self.partition() != fresh.partition() {
            return Err(StateError::Invariant("slots disagree with forest components".into()));
        }
        for s in 0..self.part_size.len() {
            let members: Vec<usize> = (0..g.vertex_count()).filter(|&v| self.part_of[v] == s).collect();
            let pop: f64 = members.iter().map(|&v| g.population(v)).sum();
            if members.len() != self.part_size[s]
                || members.first() != Some(&self.part_min[s])
                || (pop - self.part_population[s]).abs() > 1e-9 * pop.abs().max(1.0)
            {
                return Err(StateError::Invariant(format!("slot {s} summary out of date")));
            }
        }
        Ok(())
    }
}

/// Draws a starting state: a uniform spanning tree (Wilson's algorithm) and
/// `d - 1` marked edges found by recursive balanced bipartition of that tree.
/// Retries with a fresh tree up to `max_attempts` times.
pub fn initial_state<R: Rng + ?Sized>(
    g: &DualGraph,
    d: usize,
    spec: &BalanceSpec,
    rng: &mut R,
    max_attempts: usize,
) -> Result<MarkedTreeState, StateError> {
    if d < 2 {
        return Err(StateError::TooFewParts(d));
    }
    if d > g.vertex_count() {
        return Err(StateError::TooManyParts {
            parts: d,
            vertices: g.vertex_count(),
        });
    }
    spec.validate()?;
    for _ in 0..max_attempts {
        let tree = uniform_spanning_tree(g, rng);
        if let Some(marked) = balanced_cuts(g, &tree, d, spec, rng) {
            return MarkedTreeState::new(g, &tree, &marked);
        }
    }
    Err(StateError::Infeasible {
        attempts: max_attempts,
    })
}

fn balanced_cuts<R: Rng + ?Sized>(
    g: &DualGraph,
    tree: &[EdgeId],
    d: usize,
    spec: &BalanceSpec,
    rng: &mut R,
) -> Option<Vec<EdgeId>> {
    let n = g.vertex_count();
    let (lo, hi) = spec.bounds(spec.mode.total(g), d);
    let mut adj: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); n];
    for &e in tree {
        let (a, b) = g.endpoints(e);
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut cut = vec![false; g.edge_count()];
    let mut marked = Vec::with_capacity(d - 1);
    let mut root = 0;
    let mut parent: Vec<Option<(usize, EdgeId)>> = vec![None; n];
    let mut subtree = vec![0.0; n];
    let mut in_region = vec![false; n];

    for remaining in (2..=d).rev() {
        // Preorder of the current region.
        let mut order = vec![root];
        in_region.fill(false);
        in_region[root] = true;
        parent[root] = None;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            i += 1;
            for &(w, e) in &adj[v] {
                if !cut[e.0] && !in_region[w] {
                    in_region[w] = true;
                    parent[w] = Some((v, e));
                    order.push(w);
                }
            }
        }
        for &v in order.iter().rev() {
            subtree[v] = spec.mode.weight(g, v);
            for &(w, e) in &adj[v] {
                if !cut[e.0] && parent[w].map(|(p, _)| p) == Some(v) && in_region[w] {
                    subtree[v] += subtree[w];
                }
            }
        }
        let total = subtree[root];
        let rest = (remaining - 1) as f64;
        let fits_one = |w: f64| (lo..=hi).contains(&w);
        let fits_rest = |w: f64| (rest * lo..=rest * hi).contains(&w);

        // (edge, child, whether the child side becomes the finished part)
        let mut candidates = Vec::new();
        for &v in &order[1..] {
            let (_, e) = parent[v].expect("non-root");
            let below = subtree[v];
            let above = total - below;
            if fits_one(below) && fits_rest(above) {
                candidates.push((e, v, true));
            }
            if fits_one(above) && fits_rest(below) {
                candidates.push((e, v, false));
            }
        }
        let &(e, child, child_done) = candidates.choose(rng)?;
        cut[e.0] = true;
        marked.push(e);
        if !child_done {
            root = child;
        }
    }
    Some(marked)
}
