use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use mew_core::diagnostics::{pairwise_curves, pairwise_curves_2d, DiscreteCdf, Reference1d};
use mew_core::energy::{Energy, EnergySpec, ObservableKind};
use mew_core::enumeration::{exact_target_distribution, PartitionCatalog};
use mew_core::graph::DualGraph;
use mew_core::state::Partition;
use mew_core::SCHEMA_VERSION;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{load_graph, parse_observable, Context};
use crate::args::DiagnoseArgs;
use crate::error::{diagnostics_error, read_error, CliError, Result};
use crate::manifest::OutDir;

pub const CSV_NAME: &str = "ks_curve.csv";
pub const JSON_NAME: &str = "ks_curve.json";

#[derive(Deserialize)]
struct RecordLine {
    schema_version: u32,
    observables: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct CatalogLine {
    schema_version: u32,
    assignment: Vec<usize>,
    log_weight: f64,
}

fn check_version(path: &Path, line: usize, version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "{}:{line}: schema version {version} is not supported (expected {SCHEMA_VERSION})",
            path.display()
        )))
    }
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| read_error(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| read_error(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Observable columns of a record file, all lines sharing one key set.
struct Records {
    keys: Vec<String>,
    rows: Vec<BTreeMap<String, f64>>,
}

impl Records {
    fn column(&self, name: &str) -> Vec<f64> {
        self.rows.iter().map(|r| r[name]).collect()
    }
}

fn read_records(path: &Path, text: Vec<(usize, String)>) -> Result<Records> {
    let mut keys: Option<Vec<String>> = None;
    let mut rows = Vec::with_capacity(text.len());
    for (n, line) in text {
        let record: RecordLine =
            serde_json::from_str(&line).map_err(|e| CliError::input(format!("{}:{n}: {e}", path.display())))?;
        check_version(path, n, record.schema_version)?;
        let these: Vec<String> = record.observables.keys().cloned().collect();
        match &keys {
            Some(k) if *k != these => {
                return Err(CliError::input(format!(
                    "{}:{n}: observables {these:?} differ from earlier lines {k:?}",
                    path.display()
                )))
            }
            Some(_) => {}
            None => keys = Some(these),
        }
        rows.push(record.observables);
    }
    let keys = keys.ok_or_else(|| CliError::input(format!("{}: no records", path.display())))?;
    Ok(Records { keys, rows })
}

/// Record counts from `a,b,c`, `log:FROM:TO:COUNT` or `linear:FROM:TO:COUNT`.
pub fn parse_checkpoints(spec: &str) -> Result<Vec<usize>> {
    let bad = || CliError::usage(format!("invalid --checkpoints {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let mut points: Vec<usize> = match parts.as_slice() {
        [list] => list.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?,
        [kind, from, to, count] => {
            let from: f64 = from.parse().map_err(|_| bad())?;
            let to: f64 = to.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            if count < 2 || !(from >= 1.0 && to > from) {
                return Err(bad());
            }
            let at = |i: usize| i as f64 / (count - 1) as f64;
            match *kind {
                "log" => (0..count).map(|i| (from * (to / from).powf(at(i))).round() as usize).collect(),
                "linear" => (0..count).map(|i| (from + (to - from) * at(i)).round() as usize).collect(),
                _ => return Err(bad()),
            }
        }
        _ => return Err(bad()),
    };
    points.dedup();
    Ok(points)
}

fn observable_value(energy: &Energy, g: &DualGraph, partition: &Partition, name: &str) -> Result<f64> {
    let eval = energy.evaluate(g, partition).map_err(|e| CliError::input(e.to_string()))?;
    if name == "cut_edges" {
        return Ok(eval.cut_edges as f64);
    }
    let i = energy.names().iter().position(|n| n == name).expect("observable compiled");
    Ok(eval.observables[i])
}

/// Law of `name` under an enumerated catalog's normalized weights.
fn catalog_law(path: &Path, text: Vec<(usize, String)>, graph: Option<&Path>, name: &str) -> Result<DiscreteCdf> {
    let graph = graph.ok_or_else(|| CliError::usage("a catalog --target needs --graph"))?;
    let kind: ObservableKind = parse_observable(name)
        .ok_or_else(|| CliError::usage(format!("observable {name:?} cannot be evaluated on a catalog target")))?;
    let g = load_graph(graph)?;
    let mut partitions = Vec::with_capacity(text.len());
    let mut log_weights = Vec::with_capacity(text.len());
    for (n, line) in text {
        let entry: CatalogLine =
            serde_json::from_str(&line).map_err(|e| CliError::input(format!("{}:{n}: {e}", path.display())))?;
        check_version(path, n, entry.schema_version)?;
        let p = Partition::new(&g, entry.assignment)
            .map_err(|e| CliError::input(format!("{}:{n}: {e}", path.display())))?;
        partitions.push(p);
        log_weights.push(entry.log_weight);
    }
    let d = partitions.iter().map(Partition::parts).max().unwrap_or(0);
    if partitions.iter().any(|p| p.parts() != d) {
        return Err(CliError::input(format!("{}: partitions have differing part counts", path.display())));
    }
    let energy = Energy::new(&g, d, &EnergySpec::flat(), &[kind]).map_err(|e| CliError::input(e.to_string()))?;
    let catalog = PartitionCatalog { partitions, log_weights };
    let probabilities = exact_target_distribution(&catalog);
    let atoms = catalog
        .partitions
        .iter()
        .zip(probabilities)
        .map(|(p, w)| Ok((observable_value(&energy, &g, p, name)?, w)))
        .collect::<Result<Vec<_>>>()?;
    DiscreteCdf::new(atoms).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

enum Target {
    Catalog(Vec<(usize, String)>),
    Samples(Records),
}

fn read_target(path: &Path) -> Result<Target> {
    let text = lines(path)?;
    let first: Value = match text.first() {
        Some((n, l)) => serde_json::from_str(l).map_err(|e| CliError::input(format!("{}:{n}: {e}", path.display())))?,
        None => return Err(CliError::input(format!("{}: empty target", path.display()))),
    };
    if first.get("log_weight").is_some() && first.get("assignment").is_some() {
        Ok(Target::Catalog(text))
    } else {
        Ok(Target::Samples(read_records(path, text)?))
    }
}

fn require(records: &Records, path: &Path, name: &str) -> Result<()> {
    if records.keys.iter().any(|k| k == name) {
        Ok(())
    } else {
        Err(CliError::input(format!("{}: target has no observable {name:?}", path.display())))
    }
}

pub fn run(args: &DiagnoseArgs, ctx: Context) -> Result<()> {
    let checkpoints = parse_checkpoints(&args.checkpoints)?;
    if args.chains.len() < 2 {
        return Err(CliError::usage("--chains needs at least two files"));
    }
    let chains = args
        .chains
        .iter()
        .map(|p| read_records(p, lines(p)?))
        .collect::<Result<Vec<_>>>()?;
    for (p, c) in args.chains.iter().zip(&chains).skip(1) {
        if c.keys != chains[0].keys {
            return Err(CliError::input(format!(
                "{} records observables {:?} but {} records {:?}",
                p.display(),
                c.keys,
                args.chains[0].display(),
                chains[0].keys
            )));
        }
    }
    let names: Vec<&str> = std::iter::once(args.observable.as_str()).chain(args.observable2.as_deref()).collect();
    for name in &names {
        if !chains[0].keys.iter().any(|k| k == name) {
            return Err(CliError::usage(format!(
                "unknown observable {name:?}; chain files record {:?}",
                chains[0].keys
            )));
        }
    }
    let target = args.target.as_deref().map(|p| Ok::<_, CliError>((p, read_target(p)?))).transpose()?;

    let curve = match args.observable2.as_deref() {
        None => {
            let name = &args.observable;
            let series: Vec<Vec<f64>> = chains.iter().map(|c| c.column(name)).collect();
            let reference = match target {
                None => None,
                Some((p, Target::Samples(r))) => {
                    require(&r, p, name)?;
                    Some(Reference1d::Samples(r.column(name)))
                }
                Some((p, Target::Catalog(text))) => {
                    Some(Reference1d::Law(catalog_law(p, text, args.graph.as_deref(), name)?))
                }
            };
            pairwise_curves(&series, &checkpoints, args.thin, reference.as_ref())
        }
        Some(name2) => {
            let name1 = &args.observable;
            let pairs = |r: &Records| -> Vec<(f64, f64)> { r.column(name1).into_iter().zip(r.column(name2)).collect() };
            let series: Vec<Vec<(f64, f64)>> = chains.iter().map(pairs).collect();
            let reference = match target {
                None => None,
                Some((p, Target::Samples(r))) => {
                    require(&r, p, name1)?;
                    require(&r, p, name2)?;
                    Some(pairs(&r))
                }
                Some((_, Target::Catalog(_))) => {
                    return Err(CliError::usage("two-observable diagnostics need a samples --target, not a catalog"))
                }
            };
            pairwise_curves_2d(&series, &checkpoints, args.thin, reference.as_deref())
        }
    }
    .map_err(diagnostics_error)?;

    let mut out = OutDir::create(&args.out)?;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).expect("in-memory write");
    out.write(CSV_NAME, &csv)?;
    out.write(JSON_NAME, (curve.to_json() + "\n").as_bytes())?;
    let details = json!({
        "final_pairwise_mean": curve.pairwise_mean.last(),
        "final_to_target_mean": curve.to_target_mean.as_ref().and_then(|t| t.last()),
    });
    ctx.finish(out, None, None, details)
}
