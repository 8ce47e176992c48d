use std::collections::BTreeMap;
use std::io::Write;

use mew_core::chain::EnsembleRecord;
use mew_core::energy::{Energy, EnergySpec};
use mew_core::enumeration::recom2_baseline_sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{check_epsilon, load_graph, parse_observables, Context};
use crate::args::BaselineArgs;
use crate::error::{enumeration_error, write_error, CliError, Result};
use crate::manifest::OutDir;

pub const RECORDS_NAME: &str = "baseline.jsonl";

pub fn run(args: &BaselineArgs, ctx: Context) -> Result<()> {
    check_epsilon(args.balance.epsilon)?;
    if args.max_attempts == 0 {
        return Err(CliError::usage("--max-attempts must be positive"));
    }
    let extra = parse_observables(&args.record)?;
    let g = load_graph(&args.graph)?;
    if g.vertex_count() < 2 {
        return Err(CliError::input("a two-part split needs at least 2 vertices"));
    }
    let energy = Energy::new(&g, 2, &EnergySpec::flat(), &extra).map_err(|e| CliError::input(e.to_string()))?;
    let balance = args.balance.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let mut out = OutDir::create(&args.out)?;
    let path = out.path(RECORDS_NAME);
    let mut w = out.open(RECORDS_NAME)?;
    for i in 0..args.samples {
        let partition =
            recom2_baseline_sample(&g, &balance, &mut rng, args.max_attempts).map_err(enumeration_error)?;
        let eval = energy.evaluate(&g, &partition).map_err(|e| CliError::runtime(e.to_string()))?;
        let mut observables: BTreeMap<String, f64> =
            energy.names().iter().cloned().zip(eval.observables.iter().copied()).collect();
        observables.insert("cut_edges".into(), eval.cut_edges as f64);
        let record = EnsembleRecord {
            step: i + 1,
            accepted: true,
            observables,
            assignment: args.record_assignments.then(|| partition.assignment().to_vec()),
        };
        writeln!(w, "{}", record.to_json_line()).map_err(|e| write_error(&path, e))?;
    }
    w.flush().map_err(|e| write_error(&path, e))?;
    ctx.finish(out, None, None, json!({ "samples": args.samples }))
}
