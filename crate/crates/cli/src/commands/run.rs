use std::io::Write;
use std::sync::Mutex;

use mew_core::chain::{run_ensemble_with, ChainConfig};
use serde_json::json;

use super::{check_epsilon, load_energy, load_graph, parse_observables, Context};
use crate::args::{ChainArgs, RunArgs};
use crate::error::{ensemble_error, write_error, CliError, Result};
use crate::manifest::OutDir;

pub fn chain_config(districts: usize, args: &ChainArgs, balance: mew_core::state::BalanceSpec, energy: mew_core::energy::EnergySpec) -> ChainConfig {
    let mut config = ChainConfig::new(districts, balance, energy, args.steps, args.seed);
    config.burn_in = args.burn_in;
    config.record_every = args.record_every;
    config.mode = args.mode.into();
    config.p_cycle = args.p_cycle;
    config.init_attempts = args.init_attempts;
    config
}

pub fn chain_file_name(chain: usize) -> String {
    format!("chain_{chain:03}.jsonl")
}

pub fn run(args: &RunArgs, ctx: Context) -> Result<()> {
    check_epsilon(args.balance.epsilon)?;
    if args.chains == 0 {
        return Err(CliError::usage("--chains must be positive"));
    }
    let record_observables = parse_observables(&args.record)?;
    let g = load_graph(&args.graph)?;
    let energy = load_energy(&args.energy)?;
    let mut config = chain_config(args.districts, &args.chain, args.balance.spec(), energy);
    config.record_assignments = args.record_assignments;
    config.record_observables = record_observables;
    config.verify_every = args.verify_every;
    config.validate(&g).map_err(crate::error::chain_error)?;

    let mut out = OutDir::create(&args.out)?;
    let names: Vec<String> = (0..args.chains).map(chain_file_name).collect();
    let writers = names
        .iter()
        .map(|n| out.open(n).map(Mutex::new))
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<Mutex<Option<std::io::Error>>> = (0..args.chains).map(|_| Mutex::new(None)).collect();

    let summaries = run_ensemble_with(&g, &config, args.chains, args.chain.threads, |i| {
        let (writer, failure) = (&writers[i], &failures[i]);
        move |record: mew_core::chain::EnsembleRecord| {
            let mut w = writer.lock().unwrap();
            if let Err(e) = writeln!(w, "{}", record.to_json_line()) {
                failure.lock().unwrap().get_or_insert(e);
            }
        }
    })
    .map_err(ensemble_error)?;

    for (i, (writer, failure)) in writers.into_iter().zip(failures).enumerate() {
        let path = out.path(&names[i]);
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(write_error(&path, e));
        }
        writer.into_inner().unwrap().flush().map_err(|e| write_error(&path, e))?;
    }

    let steps: u64 = summaries.iter().map(|s| s.steps).sum();
    let accepted: u64 = summaries.iter().map(|s| s.accepted).sum();
    let acceptance = if steps == 0 { 0.0 } else { accepted as f64 / steps as f64 };
    let details = json!({ "chain_config": config, "chains": summaries });
    ctx.finish(out, Some(steps), Some(acceptance), details)
}
