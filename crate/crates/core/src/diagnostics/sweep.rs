use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ks_2d, thinned, DiagnosticsError};
use crate::chain::{derive_seed, par_map, run_ensemble, ChainConfig, EnsembleError};
use crate::graph::DualGraph;
use crate::SCHEMA_VERSION;

/// One sweep axis: the centers tried for energy term `term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub term: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("cell ({row}, {col}): {source}")]
    Ensemble {
        row: usize,
        col: usize,
        #[source]
        source: EnsembleError,
    },
    #[error("cell ({row}, {col}): {source}")]
    Statistic {
        row: usize,
        col: usize,
        #[source]
        source: DiagnosticsError,
    },
}

/// Mean pairwise 2D KS distance per pair of term centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Record names of the two swept observables.
    pub names: (String, String),
    pub axis1: Axis,
    pub axis2: Axis,
    pub steps: u64,
    pub chains: usize,
    pub thin: usize,
    /// `cells[i][j]` belongs to `axis1.values[i]`, `axis2.values[j]`.
    pub cells: Vec<Vec<f64>>,
}

impl SweepGrid {
    /// One row per cell: `schema_version,<name1>,<name2>,mean_pairwise_ks`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "schema_version,{}_center,{}_center,mean_pairwise_ks", self.names.0, self.names.1)?;
        for (i, x) in self.axis1.values.iter().enumerate() {
            for (j, y) in self.axis2.values.iter().enumerate() {
                writeln!(out, "{SCHEMA_VERSION},{x},{y},{}", self.cells[i][j])?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            #[serde(flatten)]
            grid: &'a SweepGrid,
        }
        serde_json::to_string_pretty(&Doc {
            schema_version: SCHEMA_VERSION,
            grid: self,
        })
        .expect("grids serialize")
    }
}

/// Per-cell run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Steps per chain.
    pub budget: u64,
    pub chains: usize,
    pub thin: usize,
    pub threads: Option<usize>,
}

/// Runs an ensemble at every pair of centers. Cell `(i, j)` uses master seed
/// `derive_seed(base.seed, i * cols + j)`.
pub fn sweep(
    g: &DualGraph,
    base: &ChainConfig,
    axis1: &Axis,
    axis2: &Axis,
    options: &SweepOptions,
) -> Result<SweepGrid, SweepError> {
    let SweepOptions {
        budget,
        chains,
        thin,
        threads,
    } = *options;
    let terms = &base.energy.terms;
    for axis in [axis1, axis2] {
        if axis.term >= terms.len() {
            return Err(SweepError::Invalid(format!(
                "term {} out of range for {} terms",
                axis.term,
                terms.len()
            )));
        }
        if axis.values.is_empty() {
            return Err(SweepError::Invalid(format!("axis for term {} has no values", axis.term)));
        }
    }
    if axis1.term == axis2.term {
        return Err(SweepError::Invalid("both axes sweep the same term".into()));
    }
    if chains < 2 {
        return Err(SweepError::Invalid(format!("need at least 2 chains, got {chains}")));
    }
    if thin == 0 {
        return Err(SweepError::Invalid("thinning must be positive".into()));
    }
    let names = (terms[axis1.term].observable.name(), terms[axis2.term].observable.name());
    let cols = axis2.values.len();
    let cells = par_map(axis1.values.len() * cols, threads, |cell| {
        let (row, col) = (cell / cols, cell % cols);
        let mut config = base.clone();
        config.steps = budget;
        config.burn_in = config.burn_in.min(budget);
        config.seed = derive_seed(base.seed, cell);
        config.energy.terms[axis1.term].center = axis1.values[row];
        config.energy.terms[axis2.term].center = axis2.values[col];
        let outputs = run_ensemble(g, &config, chains, None)
            .map_err(|source| SweepError::Ensemble { row, col, source })?;
        let samples: Vec<Vec<(f64, f64)>> = outputs
            .iter()
            .map(|o| {
                let pairs: Vec<(f64, f64)> = o
                    .records
                    .iter()
                    .map(|r| (r.observables[&names.0], r.observables[&names.1]))
                    .collect();
                thinned(&pairs, thin)
            })
            .collect();
        let mut sum = 0.0;
        for i in 0..chains {
            for j in i + 1..chains {
                sum += ks_2d(&samples[i], &samples[j]).map_err(|source| SweepError::Statistic { row, col, source })?;
            }
        }
        Ok(sum / (chains * (chains - 1) / 2) as f64)
    });
    let flat = cells.into_iter().collect::<Result<Vec<f64>, SweepError>>()?;
    Ok(SweepGrid {
        names,
        axis1: axis1.clone(),
        axis2: axis2.clone(),
        steps: budget,
        chains,
        thin,
        cells: flat.chunks(cols).map(<[f64]>::to_vec).collect(),
    })
}
