mod common;

use std::collections::{BTreeMap, BTreeSet};

use mew_core::energy::{log_degeneracy, Energy, EnergySpec};
use mew_core::enumeration::{
    enumerate_lifted_states, enumerate_partitions, exact_target_distribution, recom2_baseline_sample,
    DEFAULT_WORK_LIMIT,
};
use mew_core::graph::{log_spanning_tree_count, DualGraph};
use mew_core::state::{BalanceSpec, Partition};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog_set(g: &DualGraph, d: usize, spec: &BalanceSpec) -> BTreeSet<Vec<usize>> {
    enumerate_partitions(g, d, spec, DEFAULT_WORK_LIMIT)
        .unwrap()
        .partitions
        .iter()
        .map(|p| p.assignment().to_vec())
        .collect()
}

fn oracle_set(g: &DualGraph, d: usize, spec: &BalanceSpec) -> BTreeSet<Vec<usize>> {
    let (lo, hi) = spec.bounds(spec.mode.total(g), d);
    common::filtered_labelings(g, d, |v| spec.mode.weight(g, v), lo, hi)
}

#[test]
fn grid_4x4_bisections_match_labeling_oracle() {
    let g = DualGraph::grid(4, 4);
    let spec = BalanceSpec::node(0.0);
    let ours = catalog_set(&g, 2, &spec);
    assert_eq!(ours, oracle_set(&g, 2, &spec));
    assert!(!ours.is_empty());
}

#[test]
fn random_graphs_match_labeling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..40 {
        let n = rng.random_range(4..=9);
        let extra = rng.random_range(0..=6);
        let g = common::random_connected_graph(&mut rng, n, extra);
        let pops: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        let g = DualGraph::new(pops, g.edges()).unwrap();
        let d = rng.random_range(2..=3);
        let spec = BalanceSpec::population(rng.random_range(0.0..0.6));
        assert_eq!(catalog_set(&g, d, &spec), oracle_set(&g, d, &spec), "n={n} d={d}");
    }
}

#[test]
fn canonical_labels_are_label_permutation_invariant() {
    let g = DualGraph::grid(3, 3);
    for p in enumerate_partitions(&g, 3, &BalanceSpec::node(0.0), DEFAULT_WORK_LIMIT).unwrap().partitions {
        let mut perm = [0, 1, 2];
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(p.assignment().iter().sum::<usize>() as u64));
        let relabeled: Vec<usize> = p.assignment().iter().map(|&l| perm[l] + 7).collect();
        let again = Partition::from_labels(relabeled);
        assert_eq!(again, p);
        assert_eq!(Partition::from_labels(again.assignment().to_vec()), again);
    }
}

#[test]
fn tree_counts_match_brute_force_and_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.random_range(2..=6);
        let extra = rng.random_range(0..=6);
        let g = common::random_connected_graph(&mut rng, n, extra);
        let brute = common::all_spanning_trees(&g).len() as f64;
        let all: Vec<usize> = (0..n).collect();
        let got = log_spanning_tree_count(&g, &all).unwrap();
        assert!((got.exp() - brute).abs() <= 1e-9 * brute);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let edges: Vec<_> = g.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let h = DualGraph::new(vec![1.0; n], &edges).unwrap();
        let relabeled = log_spanning_tree_count(&h, &all).unwrap();
        assert!((relabeled - got).abs() <= 1e-9 * got.abs().max(1.0));
    }
}

/// Lifted states by the oracle: every acyclic spanning subset crossed with
/// every balanced choice of marked edges, grouped by induced partition.
fn lifted_by_partition(g: &DualGraph, d: usize, spec: &BalanceSpec) -> BTreeMap<Vec<usize>, usize> {
    let (lo, hi) = spec.bounds(spec.mode.total(g), d);
    let mut out = BTreeMap::new();
    for tree in common::all_spanning_trees(g) {
        let tree: Vec<_> = tree.into_iter().collect();
        let k = tree.len();
        for mask in 0u32..(1 << k) {
            if mask.count_ones() as usize != d - 1 {
                continue;
            }
            let forest = (0..k).filter(|i| mask >> i & 1 == 0).map(|i| tree[i]);
            let comps = common::forest_components(g, forest);
            let ok = comps.iter().all(|c| {
                let w: f64 = c.iter().map(|&v| spec.mode.weight(g, v)).sum();
                lo <= w && w <= hi
            });
            if ok {
                *out.entry(common::labels_from_components(g.vertex_count(), &comps)).or_insert(0) += 1;
            }
        }
    }
    out
}

#[test]
fn degeneracy_counts_lifted_states_per_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..15 {
        let n = rng.random_range(4..=6);
        let extra = rng.random_range(1..=5);
        let g = common::random_connected_graph(&mut rng, n, extra);
        let d = rng.random_range(2..=3);
        let spec = BalanceSpec::node(0.5);
        let oracle = lifted_by_partition(&g, d, &spec);
        let catalog = enumerate_partitions(&g, d, &spec, DEFAULT_WORK_LIMIT).unwrap();
        assert_eq!(catalog.len(), oracle.len());
        for p in &catalog.partitions {
            let tau = log_degeneracy(&g, p).unwrap().exp();
            assert_eq!(tau.round() as usize, oracle[p.assignment()]);
            assert!((tau - tau.round()).abs() < 1e-9 * tau);
        }
        let lifted = enumerate_lifted_states(&g, d, &spec, DEFAULT_WORK_LIMIT).unwrap();
        assert_eq!(lifted.len(), oracle.values().sum::<usize>());
    }
}

#[test]
fn triangle_degeneracy_is_two() {
    // {0}|{1,2}: trees {01,12} and {02,12} mark the edge at 0; 2 states
    let g = DualGraph::complete(3);
    let p = Partition::from_labels(vec![0, 1, 1]);
    assert!((log_degeneracy(&g, &p).unwrap() - 2f64.ln()).abs() < 1e-12);
    let spec = BalanceSpec::node(0.34);
    assert_eq!(lifted_by_partition(&g, 2, &spec)[&vec![0, 1, 1]], 2);
}

#[test]
fn spanning_tree_law_is_proportional_to_tau() {
    let g = DualGraph::grid(3, 3);
    let spec = BalanceSpec::node(0.2);
    let catalog = enumerate_partitions(&g, 3, &spec, DEFAULT_WORK_LIMIT).unwrap();
    let energy = Energy::new(&g, 3, &EnergySpec::spanning_tree(), &[]).unwrap();
    let probs = exact_target_distribution(&catalog.weighted(&g, &energy).unwrap());
    let oracle = lifted_by_partition(&g, 3, &spec);
    let total: usize = oracle.values().sum();
    for (p, pr) in catalog.partitions.iter().zip(&probs) {
        let expected = oracle[p.assignment()] as f64 / total as f64;
        assert!((pr - expected).abs() < 1e-12);
    }
}

#[test]
fn baseline_on_c4_is_even() {
    let g = DualGraph::cycle(4);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = BalanceSpec::node(0.0);
    let draws = 10_000;
    let mut first = 0;
    for _ in 0..draws {
        let p = recom2_baseline_sample(&g, &spec, &mut rng, 100).unwrap();
        first += (p.assignment() == [0, 0, 1, 1]) as usize;
    }
    let f = first as f64 / draws as f64;
    assert!((f - 0.5).abs() < 0.02, "frequency {f}");
}
