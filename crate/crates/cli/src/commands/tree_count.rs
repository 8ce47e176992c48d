use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use mew_core::graph::{load_assignment, log_spanning_tree_count, quotient_multigraph};
use mew_core::state::Partition;
use serde::Serialize;
use serde_json::json;

use super::{load_graph, Context};
use crate::args::TreeCountArgs;
use crate::error::{graph_error, read_error, CliError, Result};
use crate::manifest::OutDir;

pub const JSON_NAME: &str = "tree_count.json";

#[derive(Debug, Serialize)]
struct Counts {
    schema_version: u32,
    /// `ln t` of each part's induced subgraph.
    parts: Vec<f64>,
    /// `ln t` of the quotient multigraph.
    quotient: f64,
    /// `ln tau`: the sum of the above.
    total: f64,
}

fn line(label: &str, ln: f64) -> String {
    format!("{label}: ln_tau {ln:.12} log10_tau {:.12}", ln / std::f64::consts::LN_10)
}

pub fn run(args: &TreeCountArgs, ctx: Context) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let path: &Path = &args.assignment;
    let file = File::open(path).map_err(|e| read_error(path, e))?;
    let labels = load_assignment(BufReader::new(file), &g).map_err(|e| graph_error(path, e))?;
    let partition = Partition::new(&g, labels).map_err(|e| read_error(path, e))?;
    let parts = partition
        .members()
        .iter()
        .map(|m| log_spanning_tree_count(&g, m))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let quotient = quotient_multigraph(&g, &partition)
        .log_tree_count()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let total = parts.iter().sum::<f64>() + quotient;

    let mut text = String::new();
    for (k, &ln) in parts.iter().enumerate() {
        text += &line(&format!("part {k}"), ln);
        text.push('\n');
    }
    text += &line("quotient", quotient);
    text.push('\n');
    text += &line("total", total);
    text.push('\n');
    print!("{text}");

    if let Some(dir) = &args.out {
        let counts = Counts {
            schema_version: mew_core::SCHEMA_VERSION,
            parts,
            quotient,
            total,
        };
        let mut out = OutDir::create(dir)?;
        out.write(JSON_NAME, (serde_json::to_string_pretty(&counts).expect("counts serialize") + "\n").as_bytes())?;
        ctx.finish(out, None, None, json!({ "ln_tau": total }))?;
    }
    Ok(())
}
