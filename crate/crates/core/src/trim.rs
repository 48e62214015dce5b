//! Per-round seed selection: TRIM (one seed) and TRIM-B (a batch of `b`).
//!
//! Both grow a collection of mRR-sets by doubling, pick the coverage
//! maximizer, and stop once a lower confidence bound on its coverage is
//! close enough to an upper bound on the best achievable coverage.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::{contract, Result};
use crate::graph::{NodeId, ProbGraph};
use crate::sampler::{RootCount, SampleSet};

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// `ln C(n, k)`; exact summation for small `min(k, n - k)`, log-gamma above.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    match k {
        0 => 0.0,
        1 => (n as f64).ln(),
        2..=64 => (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum(),
        _ => {
            let (n, k) = (n as f64, k as f64);
            libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
        }
    }
}

/// Greedy max-coverage guarantee `1 - (1 - 1/b)^b`.
pub fn rho(b: usize) -> f64 {
    assert!(b >= 1, "batch size must be positive");
    if b == 1 {
        return 1.0;
    }
    1.0 - (1.0 - 1.0 / b as f64).powi(b as i32)
}

/// Lower confidence bound on the expected coverage given observed coverage
/// `lambda`.
pub fn lower_bound(lambda: f64, a1: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let r = (lambda + 2.0 * a1 / 9.0).sqrt() - (a1 / 2.0).sqrt();
    (r * r - a1 / 18.0).max(0.0)
}

/// Upper confidence bound `(sqrt(x + a2/2) + sqrt(a2/2))^2`, expanded so
/// that `upper_bound(0, a) == 2a` exactly.
pub fn upper_bound(x: f64, a2: f64) -> f64 {
    let h = a2 / 2.0;
    x + a2 + 2.0 * ((x + h) * h).sqrt()
}

/// Derived constants for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimParams {
    pub n_i: usize,
    pub eta_i: usize,
    pub eps: f64,
    pub b: usize,
    pub delta: f64,
    pub eps_hat: f64,
    pub rho_b: f64,
    pub ln_choose: f64,
    pub theta_max: f64,
    pub theta_0: usize,
    pub max_iters: usize,
    pub a1: f64,
    pub a2: f64,
}

fn check_inputs(n_i: usize, eta_i: usize, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract(format!("eps must lie in (0, 1), got {eps}")));
    }
    if eta_i == 0 || eta_i > n_i {
        return Err(contract(format!(
            "need 1 <= eta_i <= n_i, got eta_i={eta_i}, n_i={n_i}"
        )));
    }
    Ok(())
}

fn iteration_cap(n_i: usize, b: usize, eps_hat: f64) -> usize {
    let levels = (n_i as f64 / (b as f64 * eps_hat * eps_hat)).log2().ceil();
    levels.max(0.0) as usize + 1
}

impl TrimParams {
    /// Constants for selecting a single seed.
    pub fn single(n_i: usize, eta_i: usize, eps: f64) -> Result<Self> {
        check_inputs(n_i, eta_i, eps)?;
        let delta = eps / (100.0 * ONE_MINUS_INV_E * (1.0 - eps) * eta_i as f64);
        let eps_hat = 99.0 * eps / (100.0 - eps);
        let ln_n = (n_i as f64).ln();
        let l = (6.0 / delta).ln();
        let root = l.sqrt() + (ln_n + l).sqrt();
        let theta_max = 2.0 * n_i as f64 * root * root / (eps_hat * eps_hat);
        let theta_0 = (theta_max * eps_hat * eps_hat / n_i as f64).ceil() as usize;
        let max_iters = iteration_cap(n_i, 1, eps_hat);
        let a2 = (3.0 * max_iters as f64 / delta).ln();
        Ok(TrimParams {
            n_i,
            eta_i,
            eps,
            b: 1,
            delta,
            eps_hat,
            rho_b: 1.0,
            ln_choose: ln_n,
            theta_max,
            theta_0,
            max_iters,
            a1: a2 + ln_n,
            a2,
        })
    }

    /// Constants for selecting a batch of `b` seeds; `b` is clamped to `n_i`.
    pub fn batch(n_i: usize, eta_i: usize, eps: f64, b: usize) -> Result<Self> {
        check_inputs(n_i, eta_i, eps)?;
        if b == 0 {
            return Err(contract("batch size must be positive"));
        }
        let b = b.min(n_i);
        let delta = eps / (100.0 * ONE_MINUS_INV_E * (1.0 - eps) * eta_i as f64);
        let eps_hat = 99.0 * eps / (100.0 - eps);
        let rho_b = rho(b);
        let ln_choose = ln_binomial(n_i, b);
        let l = (6.0 / delta).ln();
        let root = l.sqrt() + ((ln_choose + l) / rho_b).sqrt();
        let theta_max = 2.0 * n_i as f64 * root * root / (b as f64 * eps_hat * eps_hat);
        let theta_0 = (theta_max * b as f64 * eps_hat * eps_hat / n_i as f64).ceil() as usize;
        let max_iters = iteration_cap(n_i, b, eps_hat);
        let a2 = (3.0 * max_iters as f64 / delta).ln();
        Ok(TrimParams {
            n_i,
            eta_i,
            eps,
            b,
            delta,
            eps_hat,
            rho_b,
            ln_choose,
            theta_max,
            theta_0,
            max_iters,
            a1: a2 + ln_choose,
            a2,
        })
    }

    fn sample_cap(&self) -> usize {
        (2.0 * self.theta_max).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The bound ratio cleared its threshold.
    Certified,
    /// The last iteration was reached.
    IterationCap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Certified => "certified",
            StopReason::IterationCap => "iteration_cap",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub t: usize,
    pub samples: usize,
    pub coverage: usize,
    pub lower: f64,
    pub upper: f64,
    pub ratio: f64,
    pub stop: Option<StopReason>,
}

#[derive(Clone, Debug)]
pub struct RoundOutcome {
    /// Selected seeds as residual-graph ids.
    pub selected: Vec<NodeId>,
    pub samples_used: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub coverage: usize,
    pub ratio: f64,
    pub trace: Vec<IterationTrace>,
    pub traversed_edges: u64,
    pub size_histogram: Vec<u64>,
    pub params: TrimParams,
}

impl RoundOutcome {
    /// Estimated truncated spread of the selection: `eta_i` times the
    /// fraction of samples it covers.
    pub fn estimate(&self) -> f64 {
        self.params.eta_i as f64 * self.coverage as f64 / self.samples_used as f64
    }
}

/// Node with the largest coverage, smallest id on ties.
fn argmax_coverage(samples: &SampleSet) -> Vec<NodeId> {
    let counts = samples.coverage_counts();
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = v;
        }
    }
    vec![best as NodeId]
}

/// Lazy greedy maximum coverage: `b` nodes (all of them if fewer exist),
/// each maximizing marginal coverage, smallest id on ties.
pub fn greedy_max_cover(samples: &SampleSet, b: usize) -> Vec<NodeId> {
    let n = samples.num_nodes();
    let b = b.min(n);
    let mut covered = vec![false; samples.len()];
    let mut heap: BinaryHeap<(usize, Reverse<NodeId>)> = (0..n as NodeId)
        .map(|v| (samples.coverage(v), Reverse(v)))
        .collect();
    let mut chosen = Vec::with_capacity(b);
    while chosen.len() < b {
        let Some((stale, Reverse(v))) = heap.pop() else { break };
        let gain = samples
            .covering_sets(v)
            .iter()
            .filter(|&&id| !covered[id as usize])
            .count();
        if gain == stale {
            for &id in samples.covering_sets(v) {
                covered[id as usize] = true;
            }
            chosen.push(v);
        } else {
            heap.push((gain, Reverse(v)));
        }
    }
    chosen
}

fn run<R, F>(g_i: &ProbGraph, params: TrimParams, rng: &mut R, select: F) -> Result<RoundOutcome>
where
    R: Rng + ?Sized,
    F: Fn(&SampleSet) -> Vec<NodeId>,
{
    if g_i.n() != params.n_i {
        return Err(contract(format!(
            "residual graph has {} nodes, parameters were built for {}",
            g_i.n(),
            params.n_i
        )));
    }
    let rule = RootCount::new(params.n_i, params.eta_i)?;
    let mut samples = SampleSet::new(params.n_i, rng.gen());
    samples.extend(g_i, &rule, params.theta_0.max(1))?;
    let threshold = params.rho_b * (1.0 - params.eps_hat);
    let cap = params.sample_cap();
    let mut trace = Vec::new();
    let mut t = 1;
    loop {
        let selected = select(&samples);
        let coverage = samples.coverage_of_set(&selected);
        let lower = lower_bound(coverage as f64, params.a1);
        let upper = if params.b == 1 {
            upper_bound(coverage as f64, params.a2)
        } else {
            upper_bound(coverage as f64 / params.rho_b, params.a2)
        };
        let ratio = if upper > 0.0 { lower / upper } else { 0.0 };
        let stop = if ratio >= threshold {
            Some(StopReason::Certified)
        } else if t >= params.max_iters {
            Some(StopReason::IterationCap)
        } else {
            None
        };
        trace.push(IterationTrace {
            t,
            samples: samples.len(),
            coverage,
            lower,
            upper,
            ratio,
            stop,
        });
        if let Some(stop) = stop {
            log::debug!(
                "round on n_i={} eta_i={}: {} samples, {} iterations, {}",
                params.n_i,
                params.eta_i,
                samples.len(),
                t,
                stop.as_str()
            );
            return Ok(RoundOutcome {
                selected,
                samples_used: samples.len(),
                iterations: t,
                stop,
                coverage,
                ratio,
                trace,
                traversed_edges: samples.traversed_edges(),
                size_histogram: samples.size_histogram(),
                params,
            });
        }
        let next = (2 * samples.len()).min(cap.max(samples.len()));
        samples.extend(g_i, &rule, next)?;
        t += 1;
    }
}

/// Selects one seed on the residual graph `g_i` with truncation `eta_i`.
pub fn trim<R: Rng + ?Sized>(g_i: &ProbGraph, eta_i: usize, eps: f64, rng: &mut R) -> Result<RoundOutcome> {
    let params = TrimParams::single(g_i.n(), eta_i, eps)?;
    run(g_i, params, rng, argmax_coverage)
}

/// Selects a batch of `b` seeds (clamped to the node count) on `g_i`.
pub fn trim_round<R: Rng + ?Sized>(
    g_i: &ProbGraph,
    eta_i: usize,
    eps: f64,
    b: usize,
    rng: &mut R,
) -> Result<RoundOutcome> {
    let params = TrimParams::batch(g_i.n(), eta_i, eps, b)?;
    let b = params.b;
    run(g_i, params, rng, |s| greedy_max_cover(s, b))
}
