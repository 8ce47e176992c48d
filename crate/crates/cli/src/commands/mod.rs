use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use mew_core::energy::{EnergySpec, ObservableKind};
use mew_core::graph::{load_dual_graph, DualGraph, GraphFormat};
use serde_json::Value;

use crate::args::Command;
use crate::error::{graph_error, read_error, CliError, Result};
use crate::manifest::{FileDigest, Finished, OutDir};

pub mod baseline;
pub mod diagnose;
pub mod enumerate;
pub mod run;
pub mod sweep;
pub mod toy_tilt;
pub mod tree_count;

/// The echoed command, its input digests and its start time.
pub struct Context {
    pub config: Command,
    pub inputs: Vec<FileDigest>,
    pub started: Instant,
}

impl Context {
    pub fn finish(self, out: OutDir, steps: Option<u64>, acceptance_rate: Option<f64>, details: Value) -> Result<()> {
        out.finish(Finished {
            config: self.config,
            inputs: self.inputs,
            started: self.started,
            steps,
            acceptance_rate,
            details,
        })
    }
}

pub fn load_graph(path: &Path) -> Result<DualGraph> {
    let file = File::open(path).map_err(|e| read_error(path, e))?;
    load_dual_graph(BufReader::new(file), GraphFormat::Json).map_err(|e| graph_error(path, e))
}

pub fn load_energy(path: &Path) -> Result<EnergySpec> {
    let text = fs::read_to_string(path).map_err(|e| read_error(path, e))?;
    EnergySpec::from_json(&text).map_err(|e| read_error(path, e))
}

/// Observables addressable by record name alone.
pub fn parse_observable(name: &str) -> Option<ObservableKind> {
    match name {
        "cut_edges" => Some(ObservableKind::CutEdges),
        "mean_median" => Some(ObservableKind::MeanMedian),
        "constant_zero" => Some(ObservableKind::ConstantZero),
        _ => name
            .strip_prefix("dem_share_")
            .and_then(|k| k.parse().ok())
            .map(|part| ObservableKind::DemShare { part }),
    }
}

pub fn parse_observables(names: &[String]) -> Result<Vec<ObservableKind>> {
    names
        .iter()
        .map(|n| {
            parse_observable(n).ok_or_else(|| {
                CliError::usage(format!(
                    "unknown observable {n:?}; expected cut_edges, mean_median, constant_zero or dem_share_<k>"
                ))
            })
        })
        .collect()
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(CliError::usage(format!("--epsilon must satisfy 0 <= epsilon < 1, got {epsilon}")))
    }
}
