use mew_core::diagnostics::{sweep, Axis, SweepOptions};
use serde_json::json;

use super::run::chain_config;
use super::{check_epsilon, load_energy, load_graph, Context};
use crate::args::SweepArgs;
use crate::error::{chain_error, sweep_error, CliError, Result};
use crate::manifest::OutDir;

pub const CSV_NAME: &str = "sweep.csv";
pub const JSON_NAME: &str = "sweep.json";

/// Parses `TERM:c1,c2,...`.
pub fn parse_axis(flag: &str, spec: &str) -> Result<Axis> {
    let bad = || CliError::usage(format!("invalid --{flag} {spec:?}; expected TERM:c1,c2,..."));
    let (term, values) = spec.split_once(':').ok_or_else(bad)?;
    let term = term.trim().parse().map_err(|_| bad())?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad))
        .collect::<Result<Vec<_>>>()?;
    Ok(Axis { term, values })
}

pub fn run(args: &SweepArgs, ctx: Context) -> Result<()> {
    check_epsilon(args.balance.epsilon)?;
    let axis1 = parse_axis("axis1", &args.axis1)?;
    let axis2 = parse_axis("axis2", &args.axis2)?;
    let g = load_graph(&args.graph)?;
    let energy = load_energy(&args.energy)?;
    let base = chain_config(args.districts, &args.chain, args.balance.spec(), energy);
    base.validate(&g).map_err(chain_error)?;
    let options = SweepOptions {
        budget: args.chain.steps,
        chains: args.chains,
        thin: args.thin,
        threads: args.chain.threads,
    };
    let grid = sweep(&g, &base, &axis1, &axis2, &options).map_err(sweep_error)?;

    let mut out = OutDir::create(&args.out)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).expect("in-memory write");
    out.write(CSV_NAME, &csv)?;
    out.write(JSON_NAME, (grid.to_json() + "\n").as_bytes())?;
    let cells = (axis1.values.len() * axis2.values.len()) as u64;
    let steps = cells * args.chains as u64 * args.chain.steps;
    ctx.finish(out, Some(steps), None, json!({ "cells": cells }))
}
