use std::io::Write;

use mew_core::energy::Energy;
use mew_core::enumeration::{enumerate_lifted_states, enumerate_partitions};
use mew_core::graph::DualGraph;
use mew_core::SCHEMA_VERSION;
use serde_json::json;

use super::{check_epsilon, load_energy, load_graph, Context};
use crate::args::EnumerateArgs;
use crate::error::{enumeration_error, write_error, CliError, Result};
use crate::manifest::OutDir;

pub const CATALOG_NAME: &str = "catalog.jsonl";
pub const LIFTED_NAME: &str = "lifted.jsonl";

fn edge_ids<'a>(g: &'a DualGraph, edges: &[mew_core::graph::EdgeId]) -> Vec<[&'a str; 2]> {
    edges
        .iter()
        .map(|&e| {
            let (a, b) = g.endpoints(e);
            [g.id(a), g.id(b)]
        })
        .collect()
}

pub fn run(args: &EnumerateArgs, ctx: Context) -> Result<()> {
    check_epsilon(args.balance.epsilon)?;
    if args.work_limit == 0 {
        return Err(CliError::usage("--work-limit must be positive"));
    }
    let g = load_graph(&args.graph)?;
    let balance = args.balance.spec();
    let mut out = OutDir::create(&args.out)?;
    let count = if args.lifted {
        let states = enumerate_lifted_states(&g, args.districts, &balance, args.work_limit).map_err(enumeration_error)?;
        let path = out.path(LIFTED_NAME);
        let mut w = out.open(LIFTED_NAME)?;
        for (tree, marked) in &states {
            let line = json!({
                "schema_version": SCHEMA_VERSION,
                "tree": edge_ids(&g, tree),
                "marked": edge_ids(&g, marked),
            });
            writeln!(w, "{line}").map_err(|e| write_error(&path, e))?;
        }
        w.flush().map_err(|e| write_error(&path, e))?;
        states.len()
    } else {
        let mut catalog = enumerate_partitions(&g, args.districts, &balance, args.work_limit).map_err(enumeration_error)?;
        if let Some(path) = &args.energy {
            let spec = load_energy(path)?;
            let energy = Energy::new(&g, args.districts, &spec, &[]).map_err(|e| crate::error::read_error(path, e))?;
            catalog = catalog.weighted(&g, &energy).map_err(enumeration_error)?;
        }
        let path = out.path(CATALOG_NAME);
        let mut w = out.open(CATALOG_NAME)?;
        catalog.write_jsonl(&mut w).map_err(|e| write_error(&path, e))?;
        w.flush().map_err(|e| write_error(&path, e))?;
        catalog.len()
    };
    println!("{count}");
    ctx.finish(out, None, None, json!({ "count": count }))
}
