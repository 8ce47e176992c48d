use std::fmt::Write as _;

use mew_core::chain::derive_seed;
use mew_core::diagnostics::{least_squares, tilt_prediction, toy_tilt, toy_tilt_corrected};
use mew_core::SCHEMA_VERSION;
use serde_json::json;

use super::Context;
use crate::args::ToyTiltArgs;
use crate::error::{diagnostics_error, CliError, Result};
use crate::manifest::OutDir;

pub const CSV_NAME: &str = "toy_tilt.csv";

pub fn run(args: &ToyTiltArgs, ctx: Context) -> Result<()> {
    if args.steps == 0 {
        return Err(CliError::usage("--steps must be positive"));
    }
    let mut text = String::new();
    let mut csv = String::from("schema_version,lambda,mean,variance,acceptance_rate,predicted_mean,predicted_variance\n");
    let mut means = Vec::with_capacity(args.lambda.len());
    for (i, &lambda) in args.lambda.iter().enumerate() {
        let seed = derive_seed(args.seed, i);
        let sampler = if args.corrected { toy_tilt_corrected } else { toy_tilt };
        let m = sampler(lambda, args.beta, args.mu, args.steps, seed).map_err(diagnostics_error)?;
        let p = tilt_prediction(lambda, args.beta, args.mu);
        writeln!(
            text,
            "lambda {lambda}: mean {:.6} variance {:.6} acceptance {:.4} predicted_mean {:.6} predicted_variance {:.6}",
            m.mean, m.variance, m.acceptance_rate, p.mean, p.variance
        )
        .unwrap();
        writeln!(
            csv,
            "{SCHEMA_VERSION},{lambda},{},{},{},{},{}",
            m.mean, m.variance, m.acceptance_rate, p.mean, p.variance
        )
        .unwrap();
        means.push(m.mean);
    }
    let fit = if args.lambda.len() >= 2 {
        let fit = least_squares(&args.lambda, &means).map_err(diagnostics_error)?;
        writeln!(
            text,
            "slope {:.6} predicted_slope {:.6}",
            fit.slope,
            -1.0 / (2.0 * args.beta)
        )
        .unwrap();
        Some(fit)
    } else {
        None
    };
    print!("{text}");

    if let Some(dir) = &args.out {
        let mut out = OutDir::create(dir)?;
        out.write(CSV_NAME, csv.as_bytes())?;
        let steps = args.steps * args.lambda.len() as u64;
        ctx.finish(out, Some(steps), None, json!({ "fit": fit }))?;
    }
    Ok(())
}
