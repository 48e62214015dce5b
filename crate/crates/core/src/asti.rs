//! The adaptive select-observe-update loop, its untruncated baseline, and
//! the multi-realization experiment driver.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::{observe_step, ActiveSet, Realization};
use crate::error::{contract, Result};
use crate::graph::{induce_residual_mask, NodeId, NodeMap, ProbGraph};
use crate::rng::{derive_seed, derived};
use crate::trim::{trim, trim_round, RoundOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Maximizes truncated spread with mRR-sets (ASTI / ASTI-b).
    Truncated,
    /// Maximizes plain expected spread with single-root RR-sets.
    Vanilla,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    pub kind: PolicyKind,
    pub batch: usize,
}

impl Policy {
    pub fn asti(batch: usize) -> Self {
        Policy {
            kind: PolicyKind::Truncated,
            batch,
        }
    }

    pub fn vanilla(batch: usize) -> Self {
        Policy {
            kind: PolicyKind::Vanilla,
            batch,
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            PolicyKind::Truncated => "asti",
            PolicyKind::Vanilla => "vanilla",
        };
        if self.batch == 1 {
            f.write_str(name)
        } else {
            write!(f, "{name}-{}", self.batch)
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    /// Accepts `asti`, `vanilla`, and batched forms such as `asti-4`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (name, batch) = match s.split_once('-') {
            Some((name, b)) => {
                let b: usize = b.parse().map_err(|_| format!("bad batch size in policy '{s}'"))?;
                if b == 0 {
                    return Err(format!("batch size must be positive in policy '{s}'"));
                }
                (name, b)
            }
            None => (s.as_str(), 1),
        };
        match name {
            "asti" => Ok(Policy::asti(batch)),
            "vanilla" => Ok(Policy::vanilla(batch)),
            _ => Err(format!("unknown policy '{s}' (expected asti, asti-<b>, vanilla, vanilla-<b>)")),
        }
    }
}

/// State between rounds: who is active, the residual graph over the rest,
/// and the remaining target.
#[derive(Clone, Debug)]
pub struct ResidualState {
    active: ActiveSet,
    residual: ProbGraph,
    map: NodeMap,
    eta: usize,
    round: usize,
    seeds: Vec<NodeId>,
}

impl ResidualState {
    pub fn new(g: &ProbGraph, eta: usize) -> Result<Self> {
        if eta == 0 || eta > g.n() {
            return Err(contract(format!("eta must lie in 1..={}, got {eta}", g.n())));
        }
        Ok(ResidualState {
            active: ActiveSet::new(g.n()),
            residual: g.clone(),
            map: NodeMap::identity(g.n()),
            eta,
            round: 0,
            seeds: Vec::new(),
        })
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn residual(&self) -> &ProbGraph {
        &self.residual
    }

    pub fn map(&self) -> &NodeMap {
        &self.map
    }

    pub fn n_i(&self) -> usize {
        self.residual.n()
    }

    pub fn m_i(&self) -> usize {
        self.residual.m()
    }

    /// Remaining shortfall `eta - (n - n_i)`, zero once the target is met.
    pub fn eta_i(&self) -> usize {
        self.eta.saturating_sub(self.active.len())
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.seeds
    }

    pub fn is_done(&self) -> bool {
        self.active.len() >= self.eta
    }

    /// Records the round's seeds and the nodes they activated, then
    /// re-induces the residual graph from `g`.
    pub fn advance(&mut self, g: &ProbGraph, seeds: &[NodeId], newly: &[NodeId]) {
        self.seeds.extend_from_slice(seeds);
        self.active.activate(newly);
        self.round += 1;
        let keep: Vec<bool> = self.active.mask().iter().map(|&a| !a).collect();
        let (residual, map) = induce_residual_mask(g, &keep);
        self.residual = residual;
        self.map = map;
    }
}

#[derive(Clone, Debug)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub n_i: usize,
    pub m_i: usize,
    pub eta_i: usize,
    /// Seeds chosen this round, as parent-graph ids.
    pub seeds: Vec<NodeId>,
    pub newly_activated: usize,
    pub outcome: RoundOutcome,
    pub select_time: Duration,
    pub observe_time: Duration,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub policy: Policy,
    pub eta: usize,
    pub seeds: Vec<NodeId>,
    pub final_spread: usize,
    pub rounds: Vec<RoundRecord>,
    pub total_samples: usize,
    pub wall: Duration,
    pub select_time: Duration,
    pub observe_time: Duration,
    pub update_time: Duration,
}

impl RunReport {
    /// Checks feasibility, seed distinctness, the batch-size sum and the
    /// per-round `eta_i = eta - (n - n_i)` bookkeeping against `n`.
    pub fn validate(&self, n: usize) -> std::result::Result<(), String> {
        if self.final_spread < self.eta {
            return Err(format!("final spread {} below eta {}", self.final_spread, self.eta));
        }
        let mut seen = vec![false; n];
        for &s in &self.seeds {
            if std::mem::replace(&mut seen[s as usize], true) {
                return Err(format!("seed {s} selected twice"));
            }
        }
        let batch_total: usize = self.rounds.iter().map(|r| r.seeds.len()).sum();
        if batch_total != self.seeds.len() {
            return Err(format!("{} seeds but rounds selected {batch_total}", self.seeds.len()));
        }
        let mut active = 0;
        for r in &self.rounds {
            if r.n_i != n - active {
                return Err(format!("round {}: n_i={} but {} nodes inactive", r.round, r.n_i, n - active));
            }
            if r.eta_i != self.eta - (n - r.n_i) {
                return Err(format!("round {}: eta_i={} breaks eta - (n - n_i)", r.round, r.eta_i));
            }
            if r.eta_i < 1 || r.eta_i > r.n_i {
                return Err(format!("round {}: eta_i={} outside 1..={}", r.round, r.eta_i, r.n_i));
            }
            if r.newly_activated < r.seeds.len() {
                return Err(format!("round {}: seeds did not activate themselves", r.round));
            }
            active += r.newly_activated;
        }
        if active != self.final_spread {
            return Err(format!("rounds activated {active}, final spread {}", self.final_spread));
        }
        Ok(())
    }
}

/// Runs `policy` against the fixed realization `phi` until at least `eta`
/// nodes are active.
pub fn run_policy<R: Rng + ?Sized>(
    g: &ProbGraph,
    eta: usize,
    eps: f64,
    policy: Policy,
    phi: &Realization,
    rng: &mut R,
) -> Result<RunReport> {
    let start = Instant::now();
    phi.check_matches(g)?;
    if policy.batch == 0 {
        return Err(contract("batch size must be positive"));
    }
    let mut state = ResidualState::new(g, eta)?;
    let mut rounds = Vec::new();
    let (mut select_time, mut observe_time, mut update_time) = Default::default();
    while !state.is_done() {
        let (n_i, m_i, eta_i) = (state.n_i(), state.m_i(), state.eta_i());
        let target = match policy.kind {
            PolicyKind::Truncated => eta_i,
            PolicyKind::Vanilla => n_i,
        };
        let t0 = Instant::now();
        let outcome = if policy.batch == 1 {
            trim(state.residual(), target, eps, rng)?
        } else {
            trim_round(state.residual(), target, eps, policy.batch, rng)?
        };
        let seeds: Vec<NodeId> = outcome.selected.iter().map(|&v| state.map().to_parent(v)).collect();
        let t1 = Instant::now();
        let newly = observe_step(g, phi, state.active(), &seeds)?;
        let t2 = Instant::now();
        state.advance(g, &seeds, &newly);
        let t3 = Instant::now();
        select_time += t1 - t0;
        observe_time += t2 - t1;
        update_time += t3 - t2;
        log::debug!(
            "{policy} round {}: n_i={n_i} eta_i={eta_i} seeds={seeds:?} newly={}",
            state.round(),
            newly.len()
        );
        rounds.push(RoundRecord {
            round: state.round(),
            n_i,
            m_i,
            eta_i,
            seeds,
            newly_activated: newly.len(),
            outcome,
            select_time: t1 - t0,
            observe_time: t2 - t1,
        });
    }
    Ok(RunReport {
        policy,
        eta,
        seeds: state.seeds().to_vec(),
        final_spread: state.active().len(),
        total_samples: rounds.iter().map(|r| r.outcome.samples_used).sum(),
        rounds,
        wall: start.elapsed(),
        select_time,
        observe_time,
        update_time,
    })
}

/// ASTI with batch size `b` (`b = 1` is plain ASTI).
pub fn run_asti<R: Rng + ?Sized>(
    g: &ProbGraph,
    eta: usize,
    eps: f64,
    b: usize,
    phi: &Realization,
    rng: &mut R,
) -> Result<RunReport> {
    run_policy(g, eta, eps, Policy::asti(b), phi, rng)
}

/// The same loop maximizing untruncated spread: every round targets `n_i`,
/// so each sample has exactly one root.
pub fn run_vanilla_baseline<R: Rng + ?Sized>(
    g: &ProbGraph,
    eta: usize,
    eps: f64,
    b: usize,
    phi: &Realization,
    rng: &mut R,
) -> Result<RunReport> {
    run_policy(g, eta, eps, Policy::vanilla(b), phi, rng)
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub eta: usize,
    pub eps: f64,
    pub realizations: usize,
    pub policies: Vec<Policy>,
    pub master_seed: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub realization_id: usize,
    pub report: RunReport,
}

#[derive(Clone, Debug)]
pub struct PolicySummary {
    pub policy: Policy,
    pub runs: usize,
    pub mean_seeds: f64,
    pub min_seeds: usize,
    pub max_seeds: usize,
    pub mean_spread: f64,
    pub mean_samples: f64,
    pub mean_wall: Duration,
    /// Final spread value -> number of runs ending with it.
    pub spread_distribution: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug)]
pub struct ExperimentTable {
    /// Runs ordered by policy, then realization.
    pub runs: Vec<ExperimentRun>,
    pub summaries: Vec<PolicySummary>,
}

const REALIZATION_KEY: u64 = 1;
const POLICY_KEY: u64 = 2;

/// Realization `i` of an experiment is drawn from a seed derived from the
/// master seed and `i` alone.
pub fn sample_realizations(g: &ProbGraph, count: usize, master_seed: u64) -> Vec<Realization> {
    (0..count)
        .into_par_iter()
        .map(|i| Realization::from_seed(g, derive_seed(master_seed, &[REALIZATION_KEY, i as u64])))
        .collect()
}

/// Pre-samples the realizations once and replays every policy against each.
pub fn run_experiment(g: &ProbGraph, config: &ExperimentConfig) -> Result<ExperimentTable> {
    if config.realizations == 0 {
        return Err(contract("need at least one realization"));
    }
    let phis = sample_realizations(g, config.realizations, config.master_seed);
    run_experiment_on(g, config.eta, config.eps, &config.policies, &phis, config.master_seed)
}

/// One `(policy, realization)` run of an experiment.
#[derive(Debug)]
pub struct Job {
    pub policy_index: usize,
    pub realization_id: usize,
    pub result: Result<RunReport>,
}

/// Runs every policy against every realization and keeps failures in
/// place. Run `(p, r)` uses a random stream derived from the master seed,
/// `p` and `r`, so results do not depend on scheduling. Jobs come back
/// ordered by policy, then realization.
pub fn run_jobs(
    g: &ProbGraph,
    eta: usize,
    eps: f64,
    policies: &[Policy],
    phis: &[Realization],
    master_seed: u64,
) -> Vec<Job> {
    let pairs: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..phis.len()).map(move |r| (p, r)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(p, r)| {
            let mut rng = derived(master_seed, &[POLICY_KEY, p as u64, r as u64]);
            Job {
                policy_index: p,
                realization_id: r,
                result: run_policy(g, eta, eps, policies[p], &phis[r], &mut rng),
            }
        })
        .collect()
}

/// Replays every policy against the given realizations; fails on the first
/// failed run.
pub fn run_experiment_on(
    g: &ProbGraph,
    eta: usize,
    eps: f64,
    policies: &[Policy],
    phis: &[Realization],
    master_seed: u64,
) -> Result<ExperimentTable> {
    let runs = run_jobs(g, eta, eps, policies, phis, master_seed)
        .into_iter()
        .map(|job| {
            Ok(ExperimentRun {
                realization_id: job.realization_id,
                report: job.result?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = policies
        .iter()
        .enumerate()
        .map(|(p, &policy)| summarize(policy, &runs[p * phis.len()..(p + 1) * phis.len()]))
        .collect();
    Ok(ExperimentTable { runs, summaries })
}

/// Aggregates the runs of one policy.
pub fn summarize(policy: Policy, runs: &[ExperimentRun]) -> PolicySummary {
    let count = runs.len().max(1) as f64;
    let seeds = runs.iter().map(|r| r.report.seeds.len());
    let mut spread_distribution = BTreeMap::new();
    for r in runs {
        *spread_distribution.entry(r.report.final_spread).or_insert(0) += 1;
    }
    PolicySummary {
        policy,
        runs: runs.len(),
        mean_seeds: seeds.clone().sum::<usize>() as f64 / count,
        min_seeds: seeds.clone().min().unwrap_or(0),
        max_seeds: seeds.max().unwrap_or(0),
        mean_spread: runs.iter().map(|r| r.report.final_spread).sum::<usize>() as f64 / count,
        mean_samples: runs.iter().map(|r| r.report.total_samples).sum::<usize>() as f64 / count,
        mean_wall: runs.iter().map(|r| r.report.wall).sum::<Duration>().div_f64(count),
        spread_distribution,
    }
}
