//! Incremental per-part sums for one chain.
//!
//! A [`Tally`] mirrors the slots of a [`MarkedTreeState`]. For a proposed
//! [`ForestChange`] only the rebuilt slots are re-summed, and cut edges and
//! quotient multiplicities are adjusted over edges incident to vertices that
//! changed slot. Per-part `ln t` values are cached by a 128-bit fingerprint of
//! the part's vertex set.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{exp_transform_from_sum, mean_minus_median, vote_share, Compiled, Energy, EnergyError, Evaluation};
use super::{DEM_VOTES, REP_VOTES};
use crate::graph::{laplacian_log_det, log_spanning_tree_count};
use crate::graph::DualGraph;
use crate::state::{ForestChange, MarkedTreeState};

const CACHE_CAP: usize = 1 << 20;
const ZOBRIST_SEED: u64 = 0x005E_ED0F_7EE5;

#[derive(Debug, Clone, PartialEq)]
struct SlotTally {
    size: usize,
    min_vertex: usize,
    dem: f64,
    rep: f64,
    exp: Vec<f64>,
    fingerprint: u128,
    log_trees: f64,
}

/// Sums for a proposed move, ready to be committed.
#[derive(Debug, Clone)]
pub struct Candidate {
    slots: Vec<(usize, SlotTally)>,
    cut: usize,
    quotient: Vec<u64>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Tally {
    slots: Vec<SlotTally>,
    cut: usize,
    // d x d multiplicities between slots; empty when tau is not needed
    quotient: Vec<u64>,
    zobrist: Vec<u128>,
    cache: HashMap<u128, f64>,
    new_slot: Vec<usize>,
    evaluation: Evaluation,
}

impl Tally {
    pub fn new(energy: &Energy, g: &DualGraph, state: &MarkedTreeState) -> Result<Self, EnergyError> {
        let n = g.vertex_count();
        let d = state.parts();
        let mut rng = ChaCha8Rng::seed_from_u64(ZOBRIST_SEED);
        let zobrist = (0..n).map(|_| rng.random::<u128>()).collect();
        let mut members = vec![Vec::new(); d];
        for v in 0..n {
            members[state.slot_of(v)].push(v);
        }
        let mut tally = Tally {
            slots: Vec::with_capacity(d),
            cut: 0,
            quotient: Vec::new(),
            zobrist,
            cache: HashMap::new(),
            new_slot: vec![usize::MAX; n],
            evaluation: Evaluation {
                observables: Vec::new(),
                cut_edges: 0,
                log_tau: None,
                clamped: 0,
            },
        };
        for vertices in &members {
            let s = tally.summarize(energy, g, vertices)?;
            tally.slots.push(s);
        }
        if energy.needs_tau() {
            tally.quotient = vec![0; d * d];
        }
        for &(a, b) in g.edges() {
            let (sa, sb) = (state.slot_of(a), state.slot_of(b));
            if sa != sb {
                tally.cut += 1;
                if !tally.quotient.is_empty() {
                    tally.quotient[sa * d + sb] += 1;
                    tally.quotient[sb * d + sa] += 1;
                }
            }
        }
        let slots: Vec<&SlotTally> = tally.slots.iter().collect();
        tally.evaluation = evaluate(energy, &slots, tally.cut, &tally.quotient)?;
        Ok(tally)
    }

    fn summarize(&mut self, energy: &Energy, g: &DualGraph, vertices: &[usize]) -> Result<SlotTally, EnergyError> {
        let mut s = SlotTally {
            size: vertices.len(),
            min_vertex: *vertices.iter().min().expect("parts are non-empty"),
            dem: 0.0,
            rep: 0.0,
            exp: vec![0.0; energy.weight_columns().len()],
            fingerprint: 0,
            log_trees: 0.0,
        };
        if energy.uses_votes() {
            let dem = g.attribute(DEM_VOTES).expect("validated");
            let rep = g.attribute(REP_VOTES).expect("validated");
            for &v in vertices {
                s.dem += dem[v];
                s.rep += rep[v];
            }
        }
        for (k, col) in energy.weight_columns().iter().enumerate() {
            s.exp[k] = vertices.iter().map(|&v| col[v]).sum();
        }
        if energy.needs_tau() {
            s.fingerprint = vertices.iter().fold(0, |acc, &v| acc ^ self.zobrist[v]);
            s.log_trees = match self.cache.get(&s.fingerprint) {
                Some(&t) => t,
                None => {
                    let t = log_spanning_tree_count(g, vertices)?;
                    if self.cache.len() >= CACHE_CAP {
                        self.cache.clear();
                    }
                    self.cache.insert(s.fingerprint, t);
                    t
                }
            };
        }
        Ok(s)
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.evaluation
    }

    /// Evaluates the partition `state` would have after `change`.
    pub fn propose(
        &mut self,
        energy: &Energy,
        g: &DualGraph,
        state: &MarkedTreeState,
        change: &ForestChange,
    ) -> Result<Candidate, EnergyError> {
        let d = state.parts();
        let mut slots = Vec::with_capacity(change.components().len());
        let mut moved = Vec::new();
        for c in change.components() {
            slots.push((c.slot, self.summarize(energy, g, &c.vertices)?));
            for &v in &c.vertices {
                if state.slot_of(v) != c.slot {
                    self.new_slot[v] = c.slot;
                    moved.push(v);
                }
            }
        }

        let mut cut = self.cut as isize;
        let mut quotient = self.quotient.clone();
        for &v in &moved {
            let (old_v, new_v) = (state.slot_of(v), self.new_slot[v]);
            for &(w, _) in g.neighbors(v) {
                let w_moved = self.new_slot[w] != usize::MAX;
                if w_moved && w < v {
                    continue;
                }
                let old_w = state.slot_of(w);
                let new_w = if w_moved { self.new_slot[w] } else { old_w };
                if old_v != old_w {
                    cut -= 1;
                    if !quotient.is_empty() {
                        quotient[old_v * d + old_w] -= 1;
                        quotient[old_w * d + old_v] -= 1;
                    }
                }
                if new_v != new_w {
                    cut += 1;
                    if !quotient.is_empty() {
                        quotient[new_v * d + new_w] += 1;
                        quotient[new_w * d + new_v] += 1;
                    }
                }
            }
        }
        for &v in &moved {
            self.new_slot[v] = usize::MAX;
        }
        let cut = cut as usize;

        let mut view: Vec<&SlotTally> = self.slots.iter().collect();
        for (slot, s) in &slots {
            view[*slot] = s;
        }
        let evaluation = evaluate(energy, &view, cut, &quotient)?;
        Ok(Candidate {
            slots,
            cut,
            quotient,
            evaluation,
        })
    }

    pub fn commit(&mut self, candidate: Candidate) {
        for (slot, s) in candidate.slots {
            self.slots[slot] = s;
        }
        self.cut = candidate.cut;
        self.quotient = candidate.quotient;
        self.evaluation = candidate.evaluation;
    }

    /// Compares the incremental evaluation with a from-scratch one.
    pub fn verify(&self, energy: &Energy, g: &DualGraph, state: &MarkedTreeState) -> Result<(), String> {
        let fresh = energy.evaluate(g, &state.partition()).map_err(|e| e.to_string())?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        let ours = &self.evaluation;
        if ours.cut_edges != fresh.cut_edges {
            return Err(format!("cut edges {} vs {}", ours.cut_edges, fresh.cut_edges));
        }
        for (i, (a, b)) in ours.observables.iter().zip(&fresh.observables).enumerate() {
            if !close(*a, *b) {
                return Err(format!("observable {} is {a}, expected {b}", energy.names()[i]));
            }
        }
        match (ours.log_tau, fresh.log_tau) {
            (Some(a), Some(b)) if !close(a, b) => Err(format!("ln tau {a} vs {b}")),
            (None, None) | (Some(_), Some(_)) => Ok(()),
            _ => Err("ln tau presence differs".into()),
        }
    }
}

fn evaluate(energy: &Energy, slots: &[&SlotTally], cut: usize, quotient: &[u64]) -> Result<Evaluation, EnergyError> {
    let d = slots.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by_key(|&s| slots[s].min_vertex);
    let part = |p: usize| slots[order[p]];

    let mut clamped = 0;
    let mut observables = Vec::with_capacity(energy.compiled().len());
    for o in energy.compiled() {
        let value = match *o {
            Compiled::CutEdges => cut as f64,
            Compiled::DemShare(p) => vote_share(part(p).dem, part(p).rep, p)?,
            Compiled::MeanMedian => {
                let shares = (0..d)
                    .map(|p| vote_share(part(p).dem, part(p).rep, p))
                    .collect::<Result<Vec<_>, _>>()?;
                mean_minus_median(&shares)
            }
            Compiled::ExpTransform { lambda, part: p, weights } => {
                let z = exp_transform_from_sum(part(p).exp[weights], part(p).size, lambda);
                clamped += z.clamped as usize;
                z.value
            }
            Compiled::ConstantZero => 0.0,
        };
        observables.push(value);
    }

    let log_tau = if energy.needs_tau() {
        let mut edges = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                let k = quotient[a * d + b];
                if k > 0 {
                    edges.push((a, b, k as f64));
                }
            }
        }
        let parts: f64 = slots.iter().map(|s| s.log_trees).sum();
        Some(parts + laplacian_log_det(d, edges)?)
    } else {
        None
    };
    Ok(Evaluation {
        observables,
        cut_edges: cut,
        log_tau,
        clamped,
    })
}
