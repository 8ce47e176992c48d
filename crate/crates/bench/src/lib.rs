//! Shared benchmark fixtures.

use mew_core::chain::ChainConfig;
use mew_core::energy::{EnergySpec, ObservableKind, Term};
use mew_core::graph::DualGraph;
use mew_core::state::BalanceSpec;

/// Square grid with unit populations.
pub fn grid(side: usize) -> DualGraph {
    DualGraph::grid(side, side)
}

/// Flat target, population balance `epsilon`, `d` parts.
pub fn flat_config(d: usize, epsilon: f64, steps: u64) -> ChainConfig {
    ChainConfig::new(d, BalanceSpec::population(epsilon), EnergySpec::flat(), steps, 1)
}

/// Cut-edge energy with a `ln tau` correction, exercising the incremental tally.
pub fn cut_edge_config(d: usize, epsilon: f64, steps: u64, center: f64) -> ChainConfig {
    let energy = EnergySpec::from_terms(vec![Term {
        observable: ObservableKind::CutEdges,
        beta: 0.1,
        center,
    }]);
    ChainConfig::new(d, BalanceSpec::population(epsilon), energy, steps, 1)
}
