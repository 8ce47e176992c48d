//! The marked edge walk proposal kernel.
//!
//! A composite step first swaps a non-tree edge `e+` into the tree and removes
//! an unmarked edge `e-` from the cycle it closes, then moves one marked edge
//! `m = {u, w}` to `m' = {u, v}` for a tree neighbor `v` of `u`. All selection
//! distributions are uniform.
//!
//! [`transition_ratio`] returns `P(x | x') / P(x' | x)` summed over every way
//! of drawing the move. For moves where the tree or the marked set actually
//! changes, the drawing is unique and the ratio is
//!
//! ```text
//! 1[m' != e+] * |C \ M| / |C \ M'| * deg_T'(u) / deg_T(u)
//! ```
//!
//! When one half of the move is the identity (`e- = e+`, or `m' = m`) many
//! draws lead to the same state, and the ratio sums over all of them.
//! [`Proposal::tuple_ratio`] keeps the per-draw form for comparison.

use rand::Rng;
use thiserror::Error;

use crate::graph::{DualGraph, EdgeId};
use crate::state::{ForestChange, MarkedTreeState, StateError, StepDelta};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalkError {
    #[error("edge {0:?} is already a tree edge")]
    EdgeInTree(EdgeId),
}

/// Why a proposal was discarded before evaluating the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rejection {
    /// `m'` is another marked edge; the marked set would shrink.
    Collision,
    /// The graph is a tree, so there is no cycle step.
    NoCycle,
}

/// Sums of draw probabilities (up to shared constants) for a move whose
/// component is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LazyMass {
    pub forward: f64,
    pub reverse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeMove {
    pub e_plus: EdgeId,
    pub e_minus: EdgeId,
    /// Fundamental cycle of `e_plus` in `T`, including `e_plus`.
    pub cycle: Vec<EdgeId>,
    /// `|C \ M|`
    pub free_before: usize,
    /// `|C \ M'|`
    pub free_after: usize,
    /// Set when `e_minus == e_plus` and the marked set changes.
    pub lazy_mass: Option<LazyMass>,
}

impl TreeMove {
    pub fn is_identity(&self) -> bool {
        self.e_plus == self.e_minus
    }
}

/// Tree degrees of the marked-step endpoints before (`T`) and after (`T'`)
/// the cycle step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndpointDegrees {
    pub u_before: usize,
    pub v_before: usize,
    pub u_after: usize,
    pub v_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedMove {
    /// Position of `m_old` in the state's marked list.
    pub index: usize,
    pub m_old: EdgeId,
    pub endpoint_u: usize,
    pub neighbor_v: usize,
    pub m_new: EdgeId,
    pub degrees: EndpointDegrees,
    /// Set when `m_new == m_old` and the tree changes.
    pub lazy_mass: Option<LazyMass>,
}

impl MarkedMove {
    pub fn is_identity(&self) -> bool {
        self.m_new == self.m_old
    }
}

/// A drawn move. Composite proposals carry both halves; the single-step
/// variant carries exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub tree: Option<TreeMove>,
    pub marked: Option<MarkedMove>,
}

impl Proposal {
    pub fn is_composite(&self) -> bool {
        self.tree.is_some() && self.marked.is_some()
    }

    /// The state change, with identity halves dropped.
    pub fn delta(&self) -> StepDelta {
        StepDelta {
            swap: self
                .tree
                .as_ref()
                .filter(|t| !t.is_identity())
                .map(|t| (t.e_plus, t.e_minus)),
            remark: self
                .marked
                .as_ref()
                .filter(|m| !m.is_identity())
                .map(|m| (m.index, m.m_new)),
        }
    }

    /// Whether the reverse move is impossible because `m'` is the edge just
    /// added to the tree and would have to be removed again.
    pub fn reverse_blocked(&self) -> bool {
        match (&self.tree, &self.marked) {
            (Some(t), Some(m)) => !t.is_identity() && m.m_new == t.e_plus,
            _ => false,
        }
    }

    /// The ratio for this particular draw of `(e+, e-, m, u, v)`, marginalizing
    /// only over the endpoint when `m' = m`.
    pub fn tuple_ratio(&self) -> f64 {
        let (t, m) = match (&self.tree, &self.marked) {
            (Some(t), Some(m)) => (t, m),
            _ => return 1.0,
        };
        if self.reverse_blocked() {
            return 0.0;
        }
        let d = &m.degrees;
        let mut ratio = t.free_before as f64 / t.free_after as f64 * d.u_after as f64 / d.u_before as f64;
        if m.is_identity() {
            ratio *= (d.u_before + d.v_before) as f64 / (d.u_after + d.v_after) as f64 * d.v_after as f64
                / d.v_before as f64;
        }
        ratio
    }
}

/// Cycle closed by adding `e_plus` to the tree: the tree path between its
/// endpoints, followed by `e_plus`.
pub fn fundamental_cycle(
    state: &MarkedTreeState,
    g: &DualGraph,
    e_plus: EdgeId,
) -> Result<Vec<EdgeId>, WalkError> {
    if state.in_tree(e_plus) {
        return Err(WalkError::EdgeInTree(e_plus));
    }
    let (a, b) = g.endpoints(e_plus);
    let mut cycle = state.tree_path(a, b);
    cycle.push(e_plus);
    Ok(cycle)
}

fn draw_tree_move<R: Rng + ?Sized>(
    state: &MarkedTreeState,
    g: &DualGraph,
    rng: &mut R,
) -> Result<TreeMove, Rejection> {
    let non_tree = state.non_tree_edges();
    if non_tree.is_empty() {
        return Err(Rejection::NoCycle);
    }
    let e_plus = non_tree[rng.random_range(0..non_tree.len())];
    let cycle = fundamental_cycle(state, g, e_plus).expect("drawn from non-tree edges");
    let free: Vec<EdgeId> = cycle.iter().copied().filter(|&e| !state.is_marked(e)).collect();
    let e_minus = free[rng.random_range(0..free.len())];
    Ok(TreeMove {
        e_plus,
        e_minus,
        free_before: free.len(),
        free_after: free.len(),
        cycle,
        lazy_mass: None,
    })
}

/// Neighbors of `u` in `T' = T + added - removed`.
fn neighbors_after(
    state: &MarkedTreeState,
    g: &DualGraph,
    u: usize,
    swap: Option<(EdgeId, EdgeId)>,
) -> Vec<(usize, EdgeId)> {
    let mut out: Vec<(usize, EdgeId)> = state
        .tree_neighbors(u)
        .iter()
        .copied()
        .filter(|&(_, e)| swap.is_none_or(|(_, removed)| e != removed))
        .collect();
    if let Some((added, _)) = swap {
        let (a, b) = g.endpoints(added);
        if u == a {
            out.push((b, added));
        } else if u == b {
            out.push((a, added));
        }
    }
    out
}

fn degree_after(state: &MarkedTreeState, g: &DualGraph, x: usize, swap: Option<(EdgeId, EdgeId)>) -> usize {
    let mut deg = state.tree_degree(x);
    if let Some((added, removed)) = swap {
        let (a, b) = g.endpoints(added);
        if x == a || x == b {
            deg += 1;
        }
        let (a, b) = g.endpoints(removed);
        if x == a || x == b {
            deg -= 1;
        }
    }
    deg
}

fn draw_marked_move<R: Rng + ?Sized>(
    state: &MarkedTreeState,
    g: &DualGraph,
    rng: &mut R,
    swap: Option<(EdgeId, EdgeId)>,
) -> Result<MarkedMove, Rejection> {
    let marked = state.marked();
    let index = rng.random_range(0..marked.len());
    let m_old = marked[index];
    let (a, b) = g.endpoints(m_old);
    let u = if rng.random_bool(0.5) { a } else { b };
    let candidates = neighbors_after(state, g, u, swap);
    let (v, m_new) = candidates[rng.random_range(0..candidates.len())];
    if m_new != m_old && state.is_marked(m_new) {
        return Err(Rejection::Collision);
    }
    Ok(MarkedMove {
        index,
        m_old,
        endpoint_u: u,
        neighbor_v: v,
        m_new,
        degrees: EndpointDegrees {
            u_before: state.tree_degree(u),
            v_before: state.tree_degree(v),
            u_after: degree_after(state, g, u, swap),
            v_after: degree_after(state, g, v, swap),
        },
        lazy_mass: None,
    })
}

/// Draws one composite step: a cycle basis step followed by a marked edge
/// step on the new tree.
///
/// Returns a rejection when the marked edge would land on another marked
/// edge. Balance is left to the caller.
pub fn propose<R: Rng + ?Sized>(
    state: &MarkedTreeState,
    g: &DualGraph,
    rng: &mut R,
) -> Result<Proposal, Rejection> {
    let mut tree = draw_tree_move(state, g, rng)?;
    let swap = (!tree.is_identity()).then_some((tree.e_plus, tree.e_minus));
    let mut marked = draw_marked_move(state, g, rng, swap)?;

    // |C \ M'| with M' = M - m + m'.
    let in_cycle = |e: EdgeId| tree.cycle.contains(&e);
    let mut free_after = tree.free_before;
    if !marked.is_identity() {
        if in_cycle(marked.m_old) {
            free_after += 1;
        }
        if in_cycle(marked.m_new) {
            free_after -= 1;
        }
    }
    tree.free_after = free_after;

    if tree.is_identity() && !marked.is_identity() {
        tree.lazy_mass = Some(lazy_tree_mass(state, g, marked.m_old, marked.m_new));
    }
    if marked.is_identity() && !tree.is_identity() {
        marked.lazy_mass = Some(lazy_marked_mass(state, g, swap));
    }
    Ok(Proposal {
        tree: Some(tree),
        marked: Some(marked),
    })
}

/// With probability `p_cycle` a cycle basis step alone, otherwise a marked
/// edge step alone on the current tree. Both are symmetric proposals.
pub fn propose_single_step<R: Rng + ?Sized>(
    state: &MarkedTreeState,
    g: &DualGraph,
    rng: &mut R,
    p_cycle: f64,
) -> Result<Proposal, Rejection> {
    if rng.random::<f64>() < p_cycle {
        Ok(Proposal {
            tree: Some(draw_tree_move(state, g, rng)?),
            marked: None,
        })
    } else {
        Ok(Proposal {
            tree: None,
            marked: Some(draw_marked_move(state, g, rng, None)?),
        })
    }
}

/// `sum_e 1/|C_e \ M|` over non-tree edges, forward with `M`, reverse with
/// `M' = M - m_old + m_new`. Costs one tree path per non-tree edge.
fn lazy_tree_mass(state: &MarkedTreeState, g: &DualGraph, m_old: EdgeId, m_new: EdgeId) -> LazyMass {
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for &e in state.non_tree_edges() {
        let (a, b) = g.endpoints(e);
        let path = state.tree_path(a, b);
        let len = path.len() + 1;
        let marked_on = path.iter().filter(|&&f| state.is_marked(f)).count();
        let marked_after = marked_on - path.contains(&m_old) as usize + path.contains(&m_new) as usize;
        forward += 1.0 / (len - marked_on) as f64;
        reverse += 1.0 / (len - marked_after) as f64;
    }
    LazyMass { forward, reverse }
}

/// `sum_{m in M} (1/deg(a_m) + 1/deg(b_m))`, forward on `T'`, reverse on `T`.
fn lazy_marked_mass(state: &MarkedTreeState, g: &DualGraph, swap: Option<(EdgeId, EdgeId)>) -> LazyMass {
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for &m in state.marked() {
        let (a, b) = g.endpoints(m);
        forward += 1.0 / degree_after(state, g, a, swap) as f64 + 1.0 / degree_after(state, g, b, swap) as f64;
        reverse += 1.0 / state.tree_degree(a) as f64 + 1.0 / state.tree_degree(b) as f64;
    }
    LazyMass { forward, reverse }
}

/// `P(x | x') / P(x' | x)` for the proposal's move, summed over all draws
/// producing it. Exactly `0` when `m' = e+` with a real tree swap.
/// Single-step proposals are symmetric and return `1`.
pub fn transition_ratio(p: &Proposal) -> f64 {
    let (t, m) = match (&p.tree, &p.marked) {
        (Some(t), Some(m)) => (t, m),
        _ => return 1.0,
    };
    if p.reverse_blocked() {
        return 0.0;
    }
    let tree_factor = if t.is_identity() {
        t.lazy_mass.map_or(1.0, |l| l.reverse / l.forward)
    } else {
        t.free_before as f64 / t.free_after as f64
    };
    let marked_factor = if m.is_identity() {
        m.lazy_mass.map_or(1.0, |l| l.reverse / l.forward)
    } else {
        m.degrees.u_after as f64 / m.degrees.u_before as f64
    };
    tree_factor * marked_factor
}

/// Applies the proposal to `state`, returning the partition change.
pub fn apply(state: &mut MarkedTreeState, g: &DualGraph, p: &Proposal) -> Result<ForestChange, StateError> {
    state.apply(g, &p.delta())
}
