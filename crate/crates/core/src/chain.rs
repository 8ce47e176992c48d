//! Metropolis-Hastings chains over lifted states, ensembles of chains, and
//! record streams.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Energy, EnergyError, EnergySpec, Evaluation, ObservableKind, Tally};
use crate::graph::DualGraph;
use crate::state::{initial_state, BalanceSpec, MarkedTreeState, StateError, Workspace};
use crate::walk::{propose, propose_single_step, transition_ratio, Rejection};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("the graph is a tree; the cycle basis step is undefined")]
    TreeGraph,
    #[error("initialization failed: {0}")]
    Init(StateError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("consistency check failed at step {step}: {message}")]
    Verify { step: u64, message: String },
}

#[derive(Debug, Error)]
#[error("chain {chain}: {source}")]
pub struct EnsembleError {
    pub chain: usize,
    #[source]
    pub source: ChainError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    /// Cycle basis step then marked edge step, every step.
    #[default]
    MetropolisComposite,
    /// One of the two steps, chosen with probability `p_cycle`.
    UniformSingleStep,
}

fn default_p_cycle() -> f64 {
    0.5
}

fn default_init_attempts() -> usize {
    1000
}

fn is_zero(x: &u64) -> bool {
    *x == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub steps: u64,
    #[serde(default)]
    pub burn_in: u64,
    pub record_every: u64,
    pub seed: u64,
    pub d: usize,
    pub balance: BalanceSpec,
    pub energy: EnergySpec,
    #[serde(default)]
    pub mode: ChainMode,
    #[serde(default = "default_p_cycle")]
    pub p_cycle: f64,
    #[serde(default)]
    pub record_assignments: bool,
    /// Observables recorded in addition to those of the energy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub record_observables: Vec<ObservableKind>,
    #[serde(default = "default_init_attempts")]
    pub init_attempts: usize,
    /// Cross-check incremental state against a full recomputation every this
    /// many steps; `0` disables.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub verify_every: u64,
}

impl ChainConfig {
    pub fn new(d: usize, balance: BalanceSpec, energy: EnergySpec, steps: u64, seed: u64) -> Self {
        Self {
            steps,
            burn_in: 0,
            record_every: 1,
            seed,
            d,
            balance,
            energy,
            mode: ChainMode::MetropolisComposite,
            p_cycle: default_p_cycle(),
            record_assignments: false,
            record_observables: Vec::new(),
            init_attempts: default_init_attempts(),
            verify_every: 0,
        }
    }

    pub fn validate(&self, g: &DualGraph) -> Result<(), ChainError> {
        let bad = |m: String| Err(ChainError::InvalidConfig(m));
        if self.burn_in > self.steps {
            return bad(format!("burn_in {} exceeds steps {}", self.burn_in, self.steps));
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        if self.d < 2 || self.d > g.vertex_count() {
            return bad(format!("cannot split {} vertices into {} parts", g.vertex_count(), self.d));
        }
        if self.mode == ChainMode::UniformSingleStep && !(self.p_cycle > 0.0 && self.p_cycle < 1.0) {
            return bad(format!("p_cycle must lie in (0, 1), got {}", self.p_cycle));
        }
        if self.init_attempts == 0 {
            return bad("init_attempts must be positive".into());
        }
        self.balance.validate().map_err(|e| ChainError::InvalidConfig(e.to_string()))?;
        if g.edge_count() + 1 == g.vertex_count() {
            return Err(ChainError::TreeGraph);
        }
        Ok(())
    }
}

/// Seed of chain `index`: SplitMix64 applied to
/// `master + (index + 1) * 0x9E3779B97F4A7C15` (wrapping). Chain streams are
/// `ChaCha8Rng::seed_from_u64` of that value.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// MH decision in log domain: accept iff `ln u <= min(0, ln_target + ln ratio)`.
pub fn mh_accept(log_target_ratio: f64, transition_ratio: f64, log_u: f64) -> bool {
    if transition_ratio.is_nan() || transition_ratio <= 0.0 {
        return false;
    }
    log_u <= (log_target_ratio + transition_ratio.ln()).min(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The moved marked edge landed on another marked edge.
    Collision,
    /// `m' = e+`: no reverse move exists.
    ReverseImpossible,
    Unbalanced,
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub collision: u64,
    pub reverse_impossible: u64,
    pub unbalanced: u64,
    pub metropolis: u64,
}

impl RejectionCounts {
    fn add(&mut self, r: RejectReason) {
        match r {
            RejectReason::Collision => self.collision += 1,
            RejectReason::ReverseImpossible => self.reverse_impossible += 1,
            RejectReason::Unbalanced => self.unbalanced += 1,
            RejectReason::Metropolis => self.metropolis += 1,
        }
    }
}

/// Inputs of one MH comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub log_target_ratio: f64,
    pub transition_ratio: f64,
    pub log_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub rejection: Option<RejectReason>,
    /// Present when the proposal reached the MH comparison.
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub step: u64,
    pub accepted: bool,
    pub observables: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<usize>>,
}

/// A record line as written to JSON-lines output.
#[derive(Serialize)]
struct RecordLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a EnsembleRecord,
}

impl EnsembleRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordLine {
            schema_version: SCHEMA_VERSION,
            record: self,
        })
        .expect("records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub seed: u64,
    pub steps: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub rejections: RejectionCounts,
    /// Evaluations where the exponential transform clamped `U`.
    pub clamp_events: u64,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub records: Vec<EnsembleRecord>,
    pub summary: ChainSummary,
}

/// One chain: state, incremental tallies, and its random stream.
pub struct Chain<'g> {
    g: &'g DualGraph,
    config: ChainConfig,
    energy: Energy,
    state: MarkedTreeState,
    tally: Tally,
    rng: ChaCha8Rng,
    ws: Workspace,
    step: u64,
    accepted: u64,
    rejections: RejectionCounts,
    clamp_events: u64,
    last_accepted: bool,
}

impl<'g> Chain<'g> {
    /// Builds chain `index` of an ensemble; chain 0 is what [`run_chain`] runs.
    pub fn new(g: &'g DualGraph, config: &ChainConfig, index: usize) -> Result<Self, ChainError> {
        config.validate(g)?;
        let energy = Energy::new(g, config.d, &config.energy, &config.record_observables)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, index));
        let state = initial_state(g, config.d, &config.balance, &mut rng, config.init_attempts).map_err(ChainError::Init)?;
        let tally = Tally::new(&energy, g, &state)?;
        let clamp_events = tally.evaluation().clamped as u64;
        Ok(Self {
            g,
            config: config.clone(),
            energy,
            state,
            tally,
            rng,
            ws: Workspace::default(),
            step: 0,
            accepted: 0,
            rejections: RejectionCounts::default(),
            clamp_events,
            last_accepted: false,
        })
    }

    pub fn state(&self) -> &MarkedTreeState {
        &self.state
    }

    pub fn evaluation(&self) -> &Evaluation {
        self.tally.evaluation()
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    fn reject(&mut self, reason: RejectReason, decision: Option<Decision>) -> StepOutcome {
        self.rejections.add(reason);
        StepOutcome {
            accepted: false,
            rejection: Some(reason),
            decision,
        }
    }

    /// One MH step. Rejections hold the current state.
    pub fn step(&mut self) -> Result<StepOutcome, ChainError> {
        self.step += 1;
        let outcome = self.step_inner()?;
        self.last_accepted = outcome.accepted;
        if outcome.accepted {
            self.accepted += 1;
        }
        if self.config.verify_every > 0 && self.step.is_multiple_of(self.config.verify_every) {
            let fail = |message| ChainError::Verify { step: self.step, message };
            self.state.validate(self.g).map_err(|e| fail(e.to_string()))?;
            self.tally.verify(&self.energy, self.g, &self.state).map_err(fail)?;
        }
        Ok(outcome)
    }

    fn step_inner(&mut self) -> Result<StepOutcome, ChainError> {
        let g = self.g;
        let proposal = match self.config.mode {
            ChainMode::MetropolisComposite => propose(&self.state, g, &mut self.rng),
            ChainMode::UniformSingleStep => propose_single_step(&self.state, g, &mut self.rng, self.config.p_cycle),
        };
        let proposal = match proposal {
            Ok(p) => p,
            Err(Rejection::Collision) => return Ok(self.reject(RejectReason::Collision, None)),
            Err(Rejection::NoCycle) => return Err(ChainError::TreeGraph),
        };
        let ratio = transition_ratio(&proposal);
        if ratio == 0.0 {
            return Ok(self.reject(RejectReason::ReverseImpossible, None));
        }
        let delta = proposal.delta();
        let change = self.state.evaluate(g, &delta, &mut self.ws)?;
        if !change.is_balanced(g, &self.config.balance, self.config.d) {
            return Ok(self.reject(RejectReason::Unbalanced, None));
        }
        let candidate = if change.is_unchanged() {
            None
        } else {
            let c = self.tally.propose(&self.energy, g, &self.state, &change)?;
            self.clamp_events += c.evaluation.clamped as u64;
            Some(c)
        };
        let log_target_ratio = match &candidate {
            Some(c) => self.energy.log_target_ratio(self.tally.evaluation(), &c.evaluation),
            None => 0.0,
        };
        let u: f64 = 1.0 - self.rng.random::<f64>();
        let decision = Decision {
            log_target_ratio,
            transition_ratio: ratio,
            log_u: u.ln(),
        };
        if !mh_accept(decision.log_target_ratio, decision.transition_ratio, decision.log_u) {
            return Ok(self.reject(RejectReason::Metropolis, Some(decision)));
        }
        self.state.commit(g, &delta, &change);
        if let Some(c) = candidate {
            self.tally.commit(c);
        }
        Ok(StepOutcome {
            accepted: true,
            rejection: None,
            decision: Some(decision),
        })
    }

    /// Record of the current state, labeled with the current step.
    pub fn record(&self) -> EnsembleRecord {
        let eval = self.tally.evaluation();
        let mut observables: BTreeMap<String, f64> = self
            .energy
            .names()
            .iter()
            .cloned()
            .zip(eval.observables.iter().copied())
            .collect();
        observables.insert("cut_edges".into(), eval.cut_edges as f64);
        EnsembleRecord {
            step: self.step,
            accepted: self.last_accepted,
            observables,
            assignment: self
                .config
                .record_assignments
                .then(|| self.state.partition().assignment().to_vec()),
        }
    }

    fn is_record_step(&self) -> bool {
        self.step > self.config.burn_in && (self.step - self.config.burn_in).is_multiple_of(self.config.record_every)
    }

    /// Runs all configured steps, handing each record to `sink`.
    pub fn run<F: FnMut(EnsembleRecord)>(&mut self, index: usize, mut sink: F) -> Result<ChainSummary, ChainError> {
        let mut records = 0;
        while self.step < self.config.steps {
            self.step()?;
            if self.is_record_step() {
                sink(self.record());
                records += 1;
            }
        }
        Ok(self.summary(index, records))
    }

    fn summary(&self, index: usize, records: u64) -> ChainSummary {
        ChainSummary {
            chain: index,
            seed: derive_seed(self.config.seed, index),
            steps: self.step,
            accepted: self.accepted,
            acceptance_rate: if self.step == 0 {
                0.0
            } else {
                self.accepted as f64 / self.step as f64
            },
            rejections: self.rejections,
            clamp_events: self.clamp_events,
            records,
        }
    }
}

/// Runs chain 0 of the ensemble defined by `config`.
pub fn run_chain(g: &DualGraph, config: &ChainConfig) -> Result<ChainOutput, ChainError> {
    let mut records = Vec::new();
    let summary = Chain::new(g, config, 0)?.run(0, |r| records.push(r))?;
    Ok(ChainOutput { records, summary })
}

/// Maps `f` over chain indices on a pool of `threads` workers (rayon's
/// default when `None`), keeping index order.
pub(crate) fn par_map<T, F>(count: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let work = || (0..count).into_par_iter().map(&f).collect::<Vec<_>>();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

/// Runs `chains` chains in parallel, each streaming to its own sink from
/// `make_sink`. Summaries are ordered by chain index.
pub fn run_ensemble_with<S, F>(
    g: &DualGraph,
    config: &ChainConfig,
    chains: usize,
    threads: Option<usize>,
    make_sink: F,
) -> Result<Vec<ChainSummary>, EnsembleError>
where
    S: FnMut(EnsembleRecord),
    F: Fn(usize) -> S + Sync,
{
    par_map(chains, threads, |i| {
        let wrap = |source| EnsembleError { chain: i, source };
        Chain::new(g, config, i).map_err(wrap)?.run(i, make_sink(i)).map_err(wrap)
    })
    .into_iter()
    .collect()
}

/// Like [`run_ensemble_with`], collecting every chain's records in memory.
pub fn run_ensemble(
    g: &DualGraph,
    config: &ChainConfig,
    chains: usize,
    threads: Option<usize>,
) -> Result<Vec<ChainOutput>, EnsembleError> {
    par_map(chains, threads, |i| {
        let wrap = |source| EnsembleError { chain: i, source };
        let mut records = Vec::new();
        let summary = Chain::new(g, config, i)
            .map_err(wrap)?
            .run(i, |r| records.push(r))
            .map_err(wrap)?;
        Ok(ChainOutput { records, summary })
    })
    .into_iter()
    .collect()
}
