//! Observables over partitions, the degeneracy factor `tau`, and target
//! energies.
//!
//! The lifted target is `p(x) ∝ exp(J(xi)) * tau(xi)^(s - gamma)`, where
//! `J = -sum_i beta_i (obs_i - center_i)^2` and `s = 1` for the spanning-tree
//! special form, else `0`. With `s = gamma = 1` the `tau` factors cancel and
//! are never computed.

mod tally;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::graph::{log_spanning_tree_count, quotient_multigraph, TreeCountError};
use crate::graph::DualGraph;
use crate::state::Partition;

pub use tally::{Candidate, Tally};

pub const DEM_VOTES: &str = "dem_votes";
pub const REP_VOTES: &str = "rep_votes";

/// Largest value `U` may take before the inverse exponential transform.
pub const U_CLAMP: f64 = 1.0 - 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid energy spec: {0}")]
    Parse(String),
    #[error("energy spec needs at least one term or a special form")]
    Empty,
    #[error("term {0}: beta and center must be finite")]
    NonFinite(usize),
    #[error("gamma must be finite, got {0}")]
    InvalidGamma(f64),
    #[error("part index {part} out of range for {parts} parts")]
    PartOutOfRange { part: usize, parts: usize },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("observable {0} needs vertex attribute {1:?}")]
    MissingAttribute(String, &'static str),
    #[error("mean-median needs at least 2 parts")]
    TooFewParts,
    #[error("observable {0} appears twice")]
    DuplicateObservable(String),
    #[error("part {0} has no votes")]
    ZeroVotes(usize),
    #[error(transparent)]
    TreeCount(#[from] TreeCountError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "observable", rename_all = "snake_case")]
pub enum ObservableKind {
    CutEdges,
    DemShare {
        part: usize,
    },
    MeanMedian,
    ExpTransform {
        lambda: f64,
        part: usize,
        #[serde(default)]
        weight_seed: u64,
    },
    ConstantZero,
}

impl ObservableKind {
    /// Key used in ensemble records.
    pub fn name(&self) -> String {
        match self {
            ObservableKind::CutEdges => "cut_edges".into(),
            ObservableKind::DemShare { part } => format!("dem_share_{part}"),
            ObservableKind::MeanMedian => "mean_median".into(),
            ObservableKind::ExpTransform { part, .. } => format!("exp_transform_{part}"),
            ObservableKind::ConstantZero => "constant_zero".into(),
        }
    }

    fn needs_votes(&self) -> bool {
        matches!(self, ObservableKind::DemShare { .. } | ObservableKind::MeanMedian)
    }

    /// Checks parameters and attribute availability for a `d`-part run.
    pub fn validate(&self, g: &DualGraph, d: usize) -> Result<(), EnergyError> {
        match *self {
            ObservableKind::DemShare { part } | ObservableKind::ExpTransform { part, .. } if part >= d => {
                return Err(EnergyError::PartOutOfRange { part, parts: d });
            }
            ObservableKind::ExpTransform { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(EnergyError::NonPositiveLambda(lambda));
            }
            ObservableKind::MeanMedian if d < 2 => return Err(EnergyError::TooFewParts),
            _ => {}
        }
        if self.needs_votes() {
            for attr in [DEM_VOTES, REP_VOTES] {
                if g.attribute(attr).is_none() {
                    return Err(EnergyError::MissingAttribute(self.name(), attr));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub observable: ObservableKind,
    pub beta: f64,
    pub center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialForm {
    /// `J = ln tau`: uniform on lifted states.
    SpanningTree,
}

fn default_gamma() -> f64 {
    1.0
}

/// Declarative energy: `{"terms": [...], "special": "spanning_tree", "gamma": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpec {
    #[serde(default)]
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<SpecialForm>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl EnergySpec {
    /// `J = 0`: uniform over partitions.
    pub fn flat() -> Self {
        Self::from_terms(vec![Term {
            observable: ObservableKind::ConstantZero,
            beta: 0.0,
            center: 0.0,
        }])
    }

    /// `J = ln tau`: uniform over lifted states.
    pub fn spanning_tree() -> Self {
        Self {
            terms: Vec::new(),
            special: Some(SpecialForm::SpanningTree),
            gamma: 1.0,
        }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Self {
            terms,
            special: None,
            gamma: 1.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, EnergyError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| EnergyError::Parse(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), EnergyError> {
        if self.terms.is_empty() && self.special.is_none() {
            return Err(EnergyError::Empty);
        }
        if !self.gamma.is_finite() {
            return Err(EnergyError::InvalidGamma(self.gamma));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !t.beta.is_finite() || !t.center.is_finite() {
                return Err(EnergyError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Coefficient of `ln tau` in the log target.
    pub fn tau_exponent(&self) -> f64 {
        let s = if self.special.is_some() { 1.0 } else { 0.0 };
        s - self.gamma
    }
}

/// Per-vertex weights in `[0, 1)` for the exponential transform, drawn from a
/// ChaCha8 stream seeded with `seed`.
pub fn exp_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Standard normal CDF through the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Result of the exponential transform; `clamped` is set when `U` hit
/// [`U_CLAMP`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTransformValue {
    pub value: f64,
    pub clamped: bool,
}

/// `Z = -ln(1 - U) / lambda` with `U = Phi((s - n/2) / sqrt(n/12))`, where `s`
/// is the weight sum over a part of `n` vertices.
pub fn exp_transform_from_sum(s: f64, n: usize, lambda: f64) -> ExpTransformValue {
    let n = n as f64;
    let u = std_normal_cdf((s - n / 2.0) / (n / 12.0).sqrt());
    let clamped = u > U_CLAMP;
    let u = u.min(U_CLAMP);
    ExpTransformValue {
        value: -(-u).ln_1p() / lambda,
        clamped,
    }
}

fn vote_share(dem: f64, rep: f64, part: usize) -> Result<f64, EnergyError> {
    let total = dem + rep;
    if total > 0.0 {
        Ok(dem / total)
    } else {
        Err(EnergyError::ZeroVotes(part))
    }
}

/// Mean minus median; the median of an even count is the midpoint of the two
/// central values.
pub fn mean_minus_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    sorted.iter().sum::<f64>() / k as f64 - median
}

/// Number of edges whose endpoints lie in different parts.
pub fn cut_edges(g: &DualGraph, partition: &Partition) -> usize {
    g.edges()
        .iter()
        .filter(|&&(a, b)| partition.label(a) != partition.label(b))
        .count()
}

fn votes(g: &DualGraph) -> Result<(&[f64], &[f64]), EnergyError> {
    let dem = g
        .attribute(DEM_VOTES)
        .ok_or_else(|| EnergyError::MissingAttribute("dem_share".into(), DEM_VOTES))?;
    let rep = g
        .attribute(REP_VOTES)
        .ok_or_else(|| EnergyError::MissingAttribute("dem_share".into(), REP_VOTES))?;
    Ok((dem, rep))
}

fn part_vote_sums(g: &DualGraph, partition: &Partition) -> Result<Vec<(f64, f64)>, EnergyError> {
    let (dem, rep) = votes(g)?;
    let mut sums = vec![(0.0, 0.0); partition.parts()];
    for (v, &l) in partition.assignment().iter().enumerate() {
        sums[l].0 += dem[v];
        sums[l].1 += rep[v];
    }
    Ok(sums)
}

/// Democratic share of the two-party vote in `part`.
pub fn dem_share(g: &DualGraph, partition: &Partition, part: usize) -> Result<f64, EnergyError> {
    if part >= partition.parts() {
        return Err(EnergyError::PartOutOfRange {
            part,
            parts: partition.parts(),
        });
    }
    let (d, r) = part_vote_sums(g, partition)?[part];
    vote_share(d, r, part)
}

/// Mean of the parts' democratic shares minus their median. Positive values
/// favor the democratic party.
pub fn mean_median(g: &DualGraph, partition: &Partition) -> Result<f64, EnergyError> {
    if partition.parts() < 2 {
        return Err(EnergyError::TooFewParts);
    }
    let shares = part_vote_sums(g, partition)?
        .into_iter()
        .enumerate()
        .map(|(i, (d, r))| vote_share(d, r, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_minus_median(&shares))
}

pub fn exp_transform(
    partition: &Partition,
    lambda: f64,
    part: usize,
    weights: &[f64],
) -> Result<ExpTransformValue, EnergyError> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(EnergyError::NonPositiveLambda(lambda));
    }
    if part >= partition.parts() {
        return Err(EnergyError::PartOutOfRange {
            part,
            parts: partition.parts(),
        });
    }
    let (mut s, mut n) = (0.0, 0);
    for (v, &l) in partition.assignment().iter().enumerate() {
        if l == part {
            s += weights[v];
            n += 1;
        }
    }
    Ok(exp_transform_from_sum(s, n, lambda))
}

/// `ln tau = sum_i ln t(part_i) + ln t(Q)`.
pub fn log_degeneracy(g: &DualGraph, partition: &Partition) -> Result<f64, EnergyError> {
    let mut total = 0.0;
    for members in partition.members() {
        total += log_spanning_tree_count(g, &members)?;
    }
    total += quotient_multigraph(g, partition).log_tree_count()?;
    Ok(total)
}

/// One observable resolved against a graph: exp-transform weights drawn.
#[derive(Debug, Clone)]
pub(crate) enum Compiled {
    CutEdges,
    DemShare(usize),
    MeanMedian,
    ExpTransform { lambda: f64, part: usize, weights: usize },
    ConstantZero,
}

/// An [`EnergySpec`] bound to a graph and part count, plus any observables
/// that are only recorded.
#[derive(Debug, Clone)]
pub struct Energy {
    spec: EnergySpec,
    names: Vec<String>,
    observables: Vec<Compiled>,
    weight_columns: Vec<Vec<f64>>,
    // (observable index, beta, center)
    terms: Vec<(usize, f64, f64)>,
    uses_votes: bool,
}

/// Observable values and `ln tau` of one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub observables: Vec<f64>,
    pub cut_edges: usize,
    /// `None` when the target does not depend on `tau`.
    pub log_tau: Option<f64>,
    pub clamped: usize,
}

impl Energy {
    pub fn new(g: &DualGraph, d: usize, spec: &EnergySpec, extra: &[ObservableKind]) -> Result<Self, EnergyError> {
        spec.check()?;
        let mut energy = Energy {
            spec: spec.clone(),
            names: Vec::new(),
            observables: Vec::new(),
            weight_columns: Vec::new(),
            terms: Vec::new(),
            uses_votes: false,
        };
        for t in &spec.terms {
            let idx = energy.add(g, d, &t.observable)?;
            energy.terms.push((idx, t.beta, t.center));
        }
        for o in extra {
            if !energy.names.contains(&o.name()) {
                energy.add(g, d, o)?;
            }
        }
        Ok(energy)
    }

    fn add(&mut self, g: &DualGraph, d: usize, o: &ObservableKind) -> Result<usize, EnergyError> {
        o.validate(g, d)?;
        let name = o.name();
        if self.names.contains(&name) {
            return Err(EnergyError::DuplicateObservable(name));
        }
        self.uses_votes |= o.needs_votes();
        let compiled = match *o {
            ObservableKind::CutEdges => Compiled::CutEdges,
            ObservableKind::DemShare { part } => Compiled::DemShare(part),
            ObservableKind::MeanMedian => Compiled::MeanMedian,
            ObservableKind::ExpTransform {
                lambda,
                part,
                weight_seed,
            } => {
                self.weight_columns.push(exp_weights(g.vertex_count(), weight_seed));
                Compiled::ExpTransform {
                    lambda,
                    part,
                    weights: self.weight_columns.len() - 1,
                }
            }
            ObservableKind::ConstantZero => Compiled::ConstantZero,
        };
        self.names.push(name);
        self.observables.push(compiled);
        Ok(self.names.len() - 1)
    }

    pub fn spec(&self) -> &EnergySpec {
        &self.spec
    }

    /// Record keys of the evaluated observables, in evaluation order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn needs_tau(&self) -> bool {
        self.spec.tau_exponent() != 0.0
    }

    pub(crate) fn uses_votes(&self) -> bool {
        self.uses_votes
    }

    pub(crate) fn weight_columns(&self) -> &[Vec<f64>] {
        &self.weight_columns
    }

    pub(crate) fn compiled(&self) -> &[Compiled] {
        &self.observables
    }

    /// Evaluates from scratch.
    pub fn evaluate(&self, g: &DualGraph, partition: &Partition) -> Result<Evaluation, EnergyError> {
        let mut observables = Vec::with_capacity(self.observables.len());
        let mut clamped = 0;
        let sums = if self.uses_votes {
            part_vote_sums(g, partition)?
        } else {
            Vec::new()
        };
        let shares = || {
            sums.iter()
                .enumerate()
                .map(|(i, &(d, r))| vote_share(d, r, i))
                .collect::<Result<Vec<_>, _>>()
        };
        for o in &self.observables {
            let value = match *o {
                Compiled::CutEdges => cut_edges(g, partition) as f64,
                Compiled::DemShare(part) => vote_share(sums[part].0, sums[part].1, part)?,
                Compiled::MeanMedian => mean_minus_median(&shares()?),
                Compiled::ExpTransform { lambda, part, weights } => {
                    let z = exp_transform(partition, lambda, part, &self.weight_columns[weights])?;
                    clamped += z.clamped as usize;
                    z.value
                }
                Compiled::ConstantZero => 0.0,
            };
            observables.push(value);
        }
        let log_tau = if self.needs_tau() {
            Some(log_degeneracy(g, partition)?)
        } else {
            None
        };
        Ok(Evaluation {
            observables,
            cut_edges: cut_edges(g, partition),
            log_tau,
            clamped,
        })
    }

    /// `J = -sum beta (obs - center)^2`, excluding the special form.
    pub fn energy(&self, eval: &Evaluation) -> f64 {
        -self
            .terms
            .iter()
            .map(|&(i, beta, center)| {
                let x = eval.observables[i] - center;
                beta * x * x
            })
            .sum::<f64>()
    }

    /// `ln p(new) - ln p(old)` for the lifted target.
    pub fn log_target_ratio(&self, old: &Evaluation, new: &Evaluation) -> f64 {
        let dj = self.energy(new) - self.energy(old);
        match (self.needs_tau(), old.log_tau, new.log_tau) {
            (true, Some(a), Some(b)) => dj + self.spec.tau_exponent() * (b - a),
            (true, ..) => panic!("evaluation is missing ln tau"),
            (false, ..) => dj,
        }
    }

    /// Unnormalized log mass of a partition under the induced partition law.
    /// Each partition carries `tau` lifted states, so this is
    /// `J(xi) + (s - gamma + 1) * ln tau(xi)`.
    pub fn partition_log_mass(&self, g: &DualGraph, partition: &Partition) -> Result<f64, EnergyError> {
        let eval = self.evaluate(g, partition)?;
        let k = self.spec.tau_exponent() + 1.0;
        let j = self.energy(&eval);
        if k == 0.0 {
            return Ok(j);
        }
        let log_tau = match eval.log_tau {
            Some(t) => t,
            None => log_degeneracy(g, partition)?,
        };
        Ok(j + k * log_tau)
    }
}
