//! Convergence diagnostics: two-sample KS distances in one and two
//! dimensions, pairwise-chain curves, parameter sweeps, and the exponential
//! tilt toy model.

mod sweep;
mod toy;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::par_map;
use crate::SCHEMA_VERSION;

pub use sweep::{sweep, Axis, SweepError, SweepGrid, SweepOptions};
pub use toy::{least_squares, tilt_prediction, toy_tilt, toy_tilt_corrected, LineFit, Moments};

/// Default thinning: every 100th record enters a KS comparison.
pub const DEFAULT_THIN: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("checkpoint {checkpoint} exceeds the {available} records available")]
    CheckpointBeyondData { checkpoint: usize, available: usize },
    #[error("checkpoints must be positive and increasing")]
    BadCheckpoints,
    #[error("thinning must be positive")]
    BadThin,
    #[error("{0}")]
    Invalid(String),
}

/// Sorted copy under the IEEE total order.
fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample KS statistic: `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_1d(a: &[f64], b: &[f64]) -> Result<f64, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// A reference distribution for one-sample KS.
pub trait ReferenceCdf {
    fn cdf(&self, x: f64) -> f64;

    /// `lim_{y -> x-} F(y)`; equals `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// Jump points that must be checked besides the sample points.
    fn atoms(&self) -> &[f64] {
        &[]
    }
}

impl<F: Fn(f64) -> f64> ReferenceCdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A finitely supported law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteCdf {
    /// From (value, mass) pairs; masses are normalized, repeated values merged.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self, DiagnosticsError> {
        if atoms.iter().any(|&(x, p)| !x.is_finite() || p.is_nan() || p < 0.0) {
            return Err(DiagnosticsError::Invalid("atoms need finite values and nonnegative masses".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || total <= 0.0 {
            return Err(DiagnosticsError::Empty);
        }
        let mut values: Vec<f64> = Vec::new();
        let mut cumulative: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for (x, p) in atoms {
            acc += p / total;
            if values.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = acc;
            } else {
                values.push(x);
                cumulative.push(acc);
            }
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { values, cumulative })
    }

    /// Empirical law of a sample.
    pub fn from_samples(samples: &[f64]) -> Result<Self, DiagnosticsError> {
        Self::new(samples.iter().map(|&x| (x, 1.0)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn count_le(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }
}

impl ReferenceCdf for DiscreteCdf {
    fn cdf(&self, x: f64) -> f64 {
        match self.count_le(x) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v < x) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    fn atoms(&self) -> &[f64] {
        &self.values
    }
}

/// One-sample KS: `sup |F_a(x) - F(x)|` over sample points, the reference's
/// atoms, and left limits at both.
pub fn ks_1d_to_cdf<R: ReferenceCdf + ?Sized>(a: &[f64], reference: &R) -> Result<f64, DiagnosticsError> {
    if a.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let a = sorted(a);
    let n = a.len() as f64;
    let mut points = a.clone();
    points.extend_from_slice(reference.atoms());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut d: f64 = 0.0;
    for x in points {
        let le = a.partition_point(|&v| v <= x) as f64 / n;
        let lt = a.partition_point(|&v| v < x) as f64 / n;
        d = d.max((le - reference.cdf(x)).abs()).max((lt - reference.cdf_left(x)).abs());
    }
    Ok(d)
}

/// Largest discrepancy over quadrant regions centered at `centers`.
///
/// Each axis is split at the center four ways (`<`, `<=`, `>=`, `>`), so
/// ties on the center lines are counted both in and out of a region.
fn ff_max(centers: &[(f64, f64)], a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    // cell index 0: below, 1: equal, 2: above
    let cell = |v: f64, c: f64| if v < c { 0 } else if v == c { 1 } else { 2 };
    let table = |pts: &[(f64, f64)], c: (f64, f64)| {
        let mut t = [[0usize; 3]; 3];
        for &(x, y) in pts {
            t[cell(x, c.0)][cell(y, c.1)] += 1;
        }
        t
    };
    // the half-lines as sets of cells
    const SIDES: [&[usize]; 4] = [&[0], &[0, 1], &[1, 2], &[2]];
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut best: f64 = 0.0;
    for &c in centers {
        let (ta, tb) = (table(a, c), table(b, c));
        for sx in SIDES {
            for sy in SIDES {
                let (mut ca, mut cb) = (0, 0);
                for &i in sx {
                    for &j in sy {
                        ca += ta[i][j];
                        cb += tb[i][j];
                    }
                }
                best = best.max((ca as f64 / na - cb as f64 / nb).abs());
            }
        }
    }
    best
}

/// Fasano–Franceschini two-sample statistic: the quadrant maximum centered on
/// each sample's points, averaged over the two samples.
pub fn ks_2d(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    Ok(0.5 * (ff_max(a, a, b) + ff_max(b, a, b)))
}

/// Pairwise KS distances by checkpoint, optionally with distance to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCurve {
    pub checkpoints: Vec<u64>,
    pub pairwise_mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_target_mean: Option<Vec<f64>>,
}

impl KsCurve {
    /// Header `schema_version,checkpoint,pairwise_mean[,to_target_mean]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let target = self.to_target_mean.as_ref();
        write!(out, "schema_version,checkpoint,pairwise_mean")?;
        if target.is_some() {
            write!(out, ",to_target_mean")?;
        }
        writeln!(out)?;
        for (i, c) in self.checkpoints.iter().enumerate() {
            write!(out, "{SCHEMA_VERSION},{c},{}", self.pairwise_mean[i])?;
            if let Some(t) = target {
                write!(out, ",{}", t[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            #[serde(flatten)]
            curve: &'a KsCurve,
        }
        serde_json::to_string_pretty(&Doc {
            schema_version: SCHEMA_VERSION,
            curve: self,
        })
        .expect("curves serialize")
    }
}

/// Reference law for one-dimensional distance-to-target curves.
#[derive(Debug, Clone)]
pub enum Reference1d {
    Samples(Vec<f64>),
    Law(DiscreteCdf),
}

impl Reference1d {
    fn distance(&self, a: &[f64]) -> Result<f64, DiagnosticsError> {
        match self {
            Reference1d::Samples(s) => ks_1d(a, s),
            Reference1d::Law(l) => ks_1d_to_cdf(a, l),
        }
    }
}

fn thinned<T: Clone>(prefix: &[T], thin: usize) -> Vec<T> {
    prefix.iter().step_by(thin).cloned().collect()
}

fn check_curve_input<T>(chains: &[Vec<T>], checkpoints: &[usize], thin: usize) -> Result<(), DiagnosticsError> {
    if chains.len() < 2 {
        return Err(DiagnosticsError::TooFewChains(chains.len()));
    }
    if thin == 0 {
        return Err(DiagnosticsError::BadThin);
    }
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::BadCheckpoints);
    }
    let available = chains.iter().map(Vec::len).min().unwrap_or(0);
    let last = *checkpoints.last().unwrap();
    if last > available {
        return Err(DiagnosticsError::CheckpointBeyondData { checkpoint: last, available });
    }
    Ok(())
}

/// Mean pairwise and mean to-target distance at each checkpoint. A checkpoint
/// `k` compares each chain's first `k` records, thinned to every `thin`-th.
pub fn pairwise_curves_with<T, D, R>(
    chains: &[Vec<T>],
    checkpoints: &[usize],
    thin: usize,
    distance: D,
    to_target: Option<R>,
) -> Result<KsCurve, DiagnosticsError>
where
    T: Clone + Sync,
    D: Fn(&[T], &[T]) -> Result<f64, DiagnosticsError> + Sync,
    R: Fn(&[T]) -> Result<f64, DiagnosticsError> + Sync,
{
    check_curve_input(chains, checkpoints, thin)?;
    let k = chains.len();
    let pairs = (k * (k - 1) / 2) as f64;
    let rows = par_map(checkpoints.len(), None, |ci| {
        let prefixes: Vec<Vec<T>> = chains.iter().map(|c| thinned(&c[..checkpoints[ci]], thin)).collect();
        let mut sum = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                sum += distance(&prefixes[i], &prefixes[j])?;
            }
        }
        let target = match &to_target {
            Some(f) => {
                let mut t = 0.0;
                for p in &prefixes {
                    t += f(p)?;
                }
                Some(t / k as f64)
            }
            None => None,
        };
        Ok((sum / pairs, target))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, DiagnosticsError>>()?;
    Ok(KsCurve {
        checkpoints: checkpoints.iter().map(|&c| c as u64).collect(),
        pairwise_mean: rows.iter().map(|r| r.0).collect(),
        to_target_mean: to_target.is_some().then(|| rows.iter().map(|r| r.1.unwrap()).collect()),
    })
}

/// [`pairwise_curves_with`] for scalar observables.
pub fn pairwise_curves(
    chains: &[Vec<f64>],
    checkpoints: &[usize],
    thin: usize,
    reference: Option<&Reference1d>,
) -> Result<KsCurve, DiagnosticsError> {
    pairwise_curves_with(chains, checkpoints, thin, ks_1d, reference.map(|r| |a: &[f64]| r.distance(a)))
}

/// [`pairwise_curves_with`] for pairs of observables, against reference samples.
pub fn pairwise_curves_2d(
    chains: &[Vec<(f64, f64)>],
    checkpoints: &[usize],
    thin: usize,
    reference: Option<&[(f64, f64)]>,
) -> Result<KsCurve, DiagnosticsError> {
    pairwise_curves_with(chains, checkpoints, thin, ks_2d, reference.map(|r| move |a: &[(f64, f64)]| ks_2d(a, r)))
}
