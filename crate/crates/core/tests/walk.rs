mod common;

use std::collections::BTreeSet;

use common::{composite_transitions, single_step_transitions, EdgeSet};
use mew_core::graph::{DualGraph, EdgeId};
use mew_core::state::{MarkedTreeState, StepDelta};
use mew_core::walk::{apply, fundamental_cycle, propose, propose_single_step, transition_ratio, Proposal};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn as_sets(s: &MarkedTreeState) -> (EdgeSet, EdgeSet) {
    (s.tree_edges().into_iter().collect(), s.marked().iter().copied().collect())
}

fn random_state<R: Rng>(rng: &mut R, g: &DualGraph, trees: &[EdgeSet], d: usize) -> MarkedTreeState {
    let tree: Vec<EdgeId> = trees[rng.random_range(0..trees.len())].iter().copied().collect();
    let marked: Vec<EdgeId> = sample(rng, tree.len(), d - 1).into_iter().map(|i| tree[i]).collect();
    MarkedTreeState::new(g, &tree, &marked).unwrap()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn ratio_matches_exhaustive_tuple_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut asymmetric = 0;
    let mut blocked = 0;
    while checked < 1000 {
        let n = rng.random_range(4..=6);
        let extra = rng.random_range(1..=4);
        let g = common::random_connected_graph(&mut rng, n, extra);
        let trees = common::all_spanning_trees(&g);
        let d = rng.random_range(2..=3.min(n - 1));
        let state = random_state(&mut rng, &g, &trees, d);
        let (t0, m0) = as_sets(&state);
        let forward = composite_transitions(&g, &t0, &m0);
        for _ in 0..20 {
            let Ok(p) = propose(&state, &g, &mut rng) else { continue };
            let mut next = state.clone();
            apply(&mut next, &g, &p).unwrap();
            next.validate(&g).unwrap();
            let (t1, m1) = as_sets(&next);
            let p_fwd = forward[&(t1.clone(), m1.clone())];
            let backward = composite_transitions(&g, &t1, &m1);
            let p_rev = backward.get(&(t0.clone(), m0.clone())).copied().unwrap_or(0.0);
            let expected = p_rev / p_fwd;
            let got = transition_ratio(&p);
            assert!(
                relative_gap(got, expected) <= 1e-12,
                "ratio {got} vs oracle {expected} for {p:?}"
            );
            if got == 0.0 {
                blocked += 1;
            } else if (got - 1.0).abs() > 1e-9 {
                asymmetric += 1;
            }
            checked += 1;
        }
    }
    assert!(asymmetric > 0 && blocked > 0, "sample exercised too few cases");
}

#[test]
fn single_step_proposals_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.random_range(4..=6);
        let g = common::random_connected_graph(&mut rng, n, 2);
        let trees = common::all_spanning_trees(&g);
        let state = random_state(&mut rng, &g, &trees, 2);
        let (t0, m0) = as_sets(&state);
        let forward = single_step_transitions(&g, &t0, &m0, 0.3);
        let Ok(p) = propose_single_step(&state, &g, &mut rng, 0.3) else { continue };
        let mut next = state.clone();
        apply(&mut next, &g, &p).unwrap();
        let (t1, m1) = as_sets(&next);
        let backward = single_step_transitions(&g, &t1, &m1, 0.3);
        let ratio = backward[&(t0.clone(), m0.clone())] / forward[&(t1, m1)];
        assert!(relative_gap(ratio, transition_ratio(&p)) <= 1e-12);
    }
}

/// A six-vertex configuration where the marked endpoint gains a tree neighbor
/// through the cycle step: deg_T(u) = 2, deg_T'(u) = 3.
#[test]
fn asymmetric_degree_fixture() {
    // u = 0 with tree neighbors 1 and 2; e+ = {0,3} closes 0-1-4-3.
    let edges = [(0, 1), (0, 2), (1, 4), (3, 4), (0, 3), (2, 5)];
    let g = DualGraph::new(vec![1.0; 6], &edges).unwrap();
    let e = |a: usize, b: usize| g.edge_between(a, b).unwrap();
    let tree = [e(0, 1), e(0, 2), e(1, 4), e(3, 4), e(2, 5)];
    let state = MarkedTreeState::new(&g, &tree, &[e(0, 2)]).unwrap();

    // Search draws for e+ = 03, e- = 34, m = 02, u = 0, v = 1.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p: Proposal = loop {
        if let Ok(p) = propose(&state, &g, &mut rng) {
            let (t, m) = (p.tree.as_ref().unwrap(), p.marked.as_ref().unwrap());
            if t.e_plus == e(0, 3) && t.e_minus == e(3, 4) && m.endpoint_u == 0 && m.m_new == e(0, 1) {
                break p;
            }
        }
    };
    let m = p.marked.as_ref().unwrap();
    assert_eq!((m.degrees.u_before, m.degrees.u_after), (2, 3));
    let marked_factor = m.degrees.u_after as f64 / m.degrees.u_before as f64;
    assert_eq!(marked_factor, 1.5);
    // m' = 01 lies on the 4-cycle, so |C \ M| = 4 and |C \ M'| = 3.
    let t = p.tree.as_ref().unwrap();
    assert_eq!((t.free_before, t.free_after), (4, 3));
    assert!(relative_gap(transition_ratio(&p), 2.0) < 1e-15);

    let (t0, m0) = as_sets(&state);
    let mut next = state.clone();
    apply(&mut next, &g, &p).unwrap();
    let (t1, m1) = as_sets(&next);
    let fwd = composite_transitions(&g, &t0, &m0)[&(t1.clone(), m1.clone())];
    let rev = composite_transitions(&g, &t1, &m1)[&(t0, m0)];
    assert!(relative_gap(rev / fwd, 2.0) < 1e-12);
}

#[test]
fn cycles_contain_e_plus_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = DualGraph::grid(5, 5);
    let mut state = mew_core::state::initial_state(&g, 3, &mew_core::state::BalanceSpec::node(0.5), &mut rng, 100).unwrap();
    for _ in 0..500 {
        for &e in state.non_tree_edges() {
            let c = fundamental_cycle(&state, &g, e).unwrap();
            assert_eq!(c.last(), Some(&e));
            assert!(c.len() >= 3);
            let unique: BTreeSet<_> = c.iter().collect();
            assert_eq!(unique.len(), c.len());
        }
        if let Ok(p) = propose(&state, &g, &mut rng) {
            apply(&mut state, &g, &p).unwrap();
        }
    }
}

/// The reverse draw: e+ and e- trade places, the marked edge steps back.
fn reverse_delta(p: &Proposal) -> StepDelta {
    let t = p.tree.as_ref().unwrap();
    let m = p.marked.as_ref().unwrap();
    StepDelta {
        swap: (!t.is_identity()).then_some((t.e_minus, t.e_plus)),
        remark: (!m.is_identity()).then_some((m.index, m.m_old)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_walks_keep_invariants(seed in any::<u64>(), rows in 2usize..5, cols in 2usize..5, d in 2usize..4) {
        let g = DualGraph::grid(rows, cols);
        prop_assume!(d <= g.vertex_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = mew_core::state::initial_state(&g, d, &mew_core::state::BalanceSpec::node(0.9), &mut rng, 200).unwrap();
        for _ in 0..60 {
            let Ok(p) = propose(&state, &g, &mut rng) else { continue };
            let before = state.clone();
            let change = apply(&mut state, &g, &p).unwrap();
            state.validate(&g).unwrap();
            prop_assert_eq!(state.partition(), state.partition_from_scratch(&g));
            prop_assert_eq!(change.is_unchanged(), before.partition() == state.partition());

            if transition_ratio(&p) > 0.0 {
                let mut back = state.clone();
                back.apply(&g, &reverse_delta(&p)).unwrap();
                prop_assert_eq!(back.key(), before.key());
            }
        }
    }
}
