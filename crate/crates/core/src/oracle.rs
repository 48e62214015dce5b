//! Exact ground truth on tiny instances by enumerating every realization.
//!
//! Node sets are `u64` bitmasks, so everything here needs `n <= 64`; the
//! enumeration guards keep tables far smaller than that limit allows.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::diffusion::{cascade, Realization};
use crate::error::{contract, Error, Result};
use crate::graph::{EdgeId, Model, NodeId, ProbGraph};

pub const MAX_IC_UNCERTAIN_EDGES: usize = 22;
pub const MAX_LT_REALIZATIONS: f64 = 4e6;
pub const MAX_GREEDY_NODES: usize = 10;
pub const MAX_OPTIMAL_NODES: usize = 6;

/// Every realization of a graph with its probability.
#[derive(Clone, Debug)]
pub struct RealizationTable {
    pub entries: Vec<(Realization, f64)>,
}

impl RealizationTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Enumerates all realizations. Under IC only edges with `p < 1` branch;
/// under LT zero-probability "no pick" branches are dropped.
pub fn enumerate_realizations(g: &ProbGraph) -> Result<RealizationTable> {
    match g.model() {
        Model::Ic => enumerate_ic(g),
        Model::Lt => enumerate_lt(g),
    }
}

fn enumerate_ic(g: &ProbGraph) -> Result<RealizationTable> {
    let mut certain = Vec::new();
    let mut uncertain = Vec::new();
    for e in 0..g.m() as EdgeId {
        if g.edge_prob(e) >= 1.0 {
            certain.push(e);
        } else {
            uncertain.push(e);
        }
    }
    if uncertain.len() > MAX_IC_UNCERTAIN_EDGES {
        return Err(Error::TooLarge(format!(
            "{} probabilistic edges, limit {MAX_IC_UNCERTAIN_EDGES}",
            uncertain.len()
        )));
    }
    let entries = (0u64..1 << uncertain.len())
        .map(|bits| {
            let mut p = 1.0;
            let mut live = certain.clone();
            for (i, &e) in uncertain.iter().enumerate() {
                let q = g.edge_prob(e);
                if bits >> i & 1 == 1 {
                    p *= q;
                    live.push(e);
                } else {
                    p *= 1.0 - q;
                }
            }
            (Realization::ic_from_live(g, live), p)
        })
        .collect();
    Ok(RealizationTable { entries })
}

fn enumerate_lt(g: &ProbGraph) -> Result<RealizationTable> {
    // Per node: the possible picks (in-edge index or none) with probabilities.
    let choices: Vec<Vec<(Option<usize>, f64)>> = g
        .nodes()
        .map(|v| {
            let mut c: Vec<(Option<usize>, f64)> =
                g.in_edges(v).enumerate().map(|(i, (_, _, p))| (Some(i), p)).collect();
            let none = 1.0 - g.in_weight_sum(v);
            if none > 1e-12 {
                c.push((None, none));
            }
            c
        })
        .collect();
    let size: f64 = choices.iter().map(|c| c.len() as f64).product();
    if size > MAX_LT_REALIZATIONS {
        return Err(Error::TooLarge(format!("{size} LT realizations, limit {MAX_LT_REALIZATIONS}")));
    }
    let mut entries = Vec::with_capacity(size as usize);
    let mut digits = vec![0usize; g.n()];
    loop {
        let picks: Vec<Option<usize>> = digits.iter().zip(&choices).map(|(&d, c)| c[d].0).collect();
        let p: f64 = digits.iter().zip(&choices).map(|(&d, c)| c[d].1).product();
        entries.push((Realization::lt_from_picks(g, &picks), p));
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(RealizationTable { entries });
            }
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

pub fn node_mask(s: &[NodeId]) -> u64 {
    s.iter().fold(0, |m, &v| m | 1 << v)
}

/// Nodes reachable from `seeds` along live edges without entering
/// `blocked`.
fn residual_reach(live_out: &[u64], seeds: u64, blocked: u64) -> u64 {
    let mut reached = seeds & !blocked;
    let mut frontier = reached;
    while frontier != 0 {
        let u = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let next = live_out[u] & !reached & !blocked;
        reached |= next;
        frontier |= next;
    }
    reached
}

/// Probability that none of `k` distinct uniform roots out of `n` falls in
/// a fixed set of `x` nodes: `C(n - x, k) / C(n, k)`.
pub fn miss_probability(n: usize, x: usize, k: usize) -> f64 {
    if x + k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - x - i) as f64 / (n - i) as f64).product()
}

/// Reach structure of every realization, precomputed for repeated queries.
#[derive(Clone, Debug)]
pub struct Oracle<'a> {
    g: &'a ProbGraph,
    probs: Vec<f64>,
    live_out: Vec<Vec<u64>>,
    reach: Vec<Vec<u64>>,
    live_edges: Vec<Vec<bool>>,
}

impl<'a> Oracle<'a> {
    pub fn new(g: &'a ProbGraph, table: &RealizationTable) -> Result<Self> {
        if g.n() > 64 {
            return Err(Error::TooLarge(format!("{} nodes, exact oracle handles at most 64", g.n())));
        }
        let mut probs = Vec::with_capacity(table.len());
        let mut live_out = Vec::with_capacity(table.len());
        let mut reach = Vec::with_capacity(table.len());
        let mut live_edges = Vec::with_capacity(table.len());
        for (phi, p) in &table.entries {
            phi.check_matches(g)?;
            let mut out = vec![0u64; g.n()];
            let mut live = vec![false; g.m()];
            for u in g.nodes() {
                for (e, v, _) in g.out_edges(u) {
                    if phi.is_live(g, e, v) {
                        out[u as usize] |= 1 << v;
                        live[e as usize] = true;
                    }
                }
            }
            reach.push(g.nodes().map(|v| residual_reach(&out, 1 << v, 0)).collect());
            probs.push(*p);
            live_out.push(out);
            live_edges.push(live);
        }
        Ok(Oracle {
            g,
            probs,
            live_out,
            reach,
            live_edges,
        })
    }

    pub fn num_realizations(&self) -> usize {
        self.probs.len()
    }

    /// Probability of each realization, in table order.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Nodes activated by `seeds` in realization `r`.
    pub fn spread_mask(&self, r: usize, seeds: u64) -> u64 {
        let mut m = 0;
        let mut s = seeds;
        while s != 0 {
            m |= self.reach[r][s.trailing_zeros() as usize];
            s &= s - 1;
        }
        m
    }

    pub fn expected_spread(&self, seeds: u64) -> f64 {
        self.weighted(|r| self.spread_mask(r, seeds).count_ones() as f64)
    }

    pub fn expected_truncated(&self, seeds: u64, eta: usize) -> f64 {
        self.weighted(|r| (self.spread_mask(r, seeds).count_ones() as usize).min(eta) as f64)
    }

    /// Mean of the mRR estimator `eta * 1[S meets R]` with the root count
    /// rounded randomly around `n / eta`.
    pub fn estimator_mean(&self, seeds: u64, eta: usize) -> Result<f64> {
        let n = self.g.n();
        if eta == 0 || eta > n {
            return Err(contract(format!("eta must lie in 1..={n}, got {eta}")));
        }
        let (floor, rem) = (n / eta, n % eta);
        let up = rem as f64 / eta as f64;
        Ok(self.weighted(|r| {
            let x = self.spread_mask(r, seeds).count_ones() as usize;
            let miss = (1.0 - up) * miss_probability(n, x, floor)
                + if rem > 0 { up * miss_probability(n, x, floor + 1) } else { 0.0 };
            eta as f64 * (1.0 - miss)
        }))
    }

    fn weighted(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(r, p)| p * f(r)).sum()
    }

    /// What seeding `v` reveals in realization `r` given `active`: the
    /// newly activated nodes and, under IC, the status of every edge leaving
    /// them towards previously inactive nodes.
    fn observation(&self, r: usize, active: u64, v: NodeId) -> (u64, Vec<bool>) {
        let newly = residual_reach(&self.live_out[r], 1 << v, active);
        let mut statuses = Vec::new();
        if self.g.model() == Model::Ic {
            let mut s = newly;
            while s != 0 {
                let u = s.trailing_zeros() as NodeId;
                s &= s - 1;
                for (e, w, _) in self.g.out_edges(u) {
                    if active >> w & 1 == 0 {
                        statuses.push(self.live_edges[r][e as usize]);
                    }
                }
            }
        }
        (newly, statuses)
    }

    /// Splits the consistent realizations `consistent` by what seeding `v`
    /// would reveal. Groups come out in a fixed order.
    fn partition(&self, active: u64, consistent: &[usize], v: NodeId) -> Vec<(u64, Vec<usize>)> {
        let mut groups: BTreeMap<(u64, Vec<bool>), Vec<usize>> = BTreeMap::new();
        for &r in consistent {
            groups.entry(self.observation(r, active, v)).or_default().push(r);
        }
        groups.into_iter().map(|((newly, _), rs)| (newly, rs)).collect()
    }

    fn mass(&self, rs: &[usize]) -> f64 {
        rs.iter().map(|&r| self.probs[r]).sum()
    }

    /// Greedy pick given history: largest conditional expected marginal
    /// (truncated or plain) spread, smallest id within 1e-12.
    fn greedy_pick(&self, active: u64, consistent: &[usize], eta_i: usize, truncated: bool) -> NodeId {
        let mut best: Option<(NodeId, f64)> = None;
        for v in self.g.nodes().filter(|&v| active >> v & 1 == 0) {
            let value: f64 = consistent
                .iter()
                .map(|&r| {
                    let x = residual_reach(&self.live_out[r], 1 << v, active).count_ones() as usize;
                    self.probs[r] * if truncated { x.min(eta_i) } else { x } as f64
                })
                .sum();
            if best.is_none_or(|(_, b)| value > b + 1e-12) {
                best = Some((v, value));
            }
        }
        best.expect("an inactive node exists while below target").0
    }

    fn greedy_cost(&self, active: u64, consistent: &[usize], eta: usize, truncated: bool) -> f64 {
        let done = active.count_ones() as usize;
        if done >= eta {
            return 0.0;
        }
        let v = self.greedy_pick(active, consistent, eta - done, truncated);
        let total = self.mass(consistent);
        1.0 + self
            .partition(active, consistent, v)
            .into_iter()
            .map(|(newly, rs)| self.mass(&rs) / total * self.greedy_cost(active | newly, &rs, eta, truncated))
            .sum::<f64>()
    }

    fn optimal_cost(
        &self,
        active: u64,
        consistent: Vec<usize>,
        eta: usize,
        memo: &mut HashMap<(u64, Vec<usize>), f64>,
    ) -> f64 {
        if active.count_ones() as usize >= eta {
            return 0.0;
        }
        let key = (active, consistent);
        if let Some(&c) = memo.get(&key) {
            return c;
        }
        let consistent = &key.1;
        let total = self.mass(consistent);
        let mut best = f64::INFINITY;
        for v in self.g.nodes().filter(|&v| active >> v & 1 == 0) {
            let mut cost = 1.0;
            for (newly, rs) in self.partition(active, consistent, v) {
                let w = self.mass(&rs) / total;
                cost += w * self.optimal_cost(active | newly, rs, eta, memo);
                if cost >= best {
                    break;
                }
            }
            best = best.min(cost);
        }
        memo.insert(key, best);
        best
    }

    pub fn policy_cost(&self, eta: usize, policy: OraclePolicy) -> Result<f64> {
        let n = self.g.n();
        if eta == 0 || eta > n {
            return Err(contract(format!("eta must lie in 1..={n}, got {eta}")));
        }
        let all: Vec<usize> = (0..self.num_realizations()).filter(|&r| self.probs[r] > 0.0).collect();
        match policy {
            OraclePolicy::TruncatedGreedy | OraclePolicy::VanillaGreedy => {
                if n > MAX_GREEDY_NODES {
                    return Err(Error::TooLarge(format!("{n} nodes, greedy oracle limit {MAX_GREEDY_NODES}")));
                }
                let truncated = policy == OraclePolicy::TruncatedGreedy;
                Ok(self.greedy_cost(0, &all, eta, truncated))
            }
            OraclePolicy::Optimal => {
                if n > MAX_OPTIMAL_NODES {
                    return Err(Error::TooLarge(format!("{n} nodes, optimal oracle limit {MAX_OPTIMAL_NODES}")));
                }
                Ok(self.optimal_cost(0, all, eta, &mut HashMap::new()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OraclePolicy {
    /// Each round seeds the node with the largest conditional expected
    /// marginal truncated spread.
    TruncatedGreedy,
    /// Same, maximizing plain expected marginal spread.
    VanillaGreedy,
    /// Minimum expected seed count over all adaptive policies.
    Optimal,
}

pub fn exact_expected_spread(g: &ProbGraph, table: &RealizationTable, s: &[NodeId]) -> Result<f64> {
    Ok(Oracle::new(g, table)?.expected_spread(node_mask(s)))
}

pub fn exact_expected_truncated(g: &ProbGraph, table: &RealizationTable, s: &[NodeId], eta: usize) -> Result<f64> {
    Ok(Oracle::new(g, table)?.expected_truncated(node_mask(s), eta))
}

pub fn exact_estimator_mean(g: &ProbGraph, table: &RealizationTable, s: &[NodeId], eta: usize) -> Result<f64> {
    Oracle::new(g, table)?.estimator_mean(node_mask(s), eta)
}

/// Expected number of seeds `policy` uses to activate `eta` nodes, with
/// observations conditioned exactly on the table.
///
/// Under LT a history is matched by the activated sets alone; this path is
/// less battle-tested than the IC one.
pub fn exact_policy_cost(g: &ProbGraph, table: &RealizationTable, eta: usize, policy: OraclePolicy) -> Result<f64> {
    Oracle::new(g, table)?.policy_cost(eta, policy)
}

/// Monte-Carlo mean of `min(I(S), eta)` and its standard error.
pub fn mc_estimate_truncated<R: Rng + ?Sized>(
    g: &ProbGraph,
    s: &[NodeId],
    eta: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if num_samples == 0 {
        return Err(contract("need at least one sample"));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..num_samples {
        let phi = Realization::sample(g, rng);
        let x = cascade(g, &phi, s).spread().min(eta) as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = num_samples as f64;
    let mean = sum / n;
    let stderr = if num_samples > 1 {
        ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::seeded;
    use crate::synth::random_small_graph;

    #[test]
    fn four_node_values() {
        let g = fixtures::four_node();
        let table = enumerate_realizations(&g).unwrap();
        assert_eq!(table.len(), 4);
        assert!(table.entries.iter().all(|(_, p)| *p == 0.25));
        let o = Oracle::new(&g, &table).unwrap();
        assert_eq!(o.expected_spread(1), 2.75);
        let truncated: Vec<f64> = (0..4).map(|v| o.expected_truncated(1 << v, 2)).collect();
        assert_eq!(truncated, vec![1.75, 2.0, 2.0, 1.0]);
        assert!((o.estimator_mean(1, 2).unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(o.policy_cost(2, OraclePolicy::VanillaGreedy).unwrap(), 1.25);
        assert_eq!(o.policy_cost(2, OraclePolicy::TruncatedGreedy).unwrap(), 1.0);
        assert_eq!(o.policy_cost(2, OraclePolicy::Optimal).unwrap(), 1.0);
    }

    #[test]
    fn trivial_tables() {
        let g = ProbGraph::new(3, &[], Model::Ic).unwrap();
        let t = enumerate_realizations(&g).unwrap();
        assert_eq!(t.len(), 1);
        let g = ProbGraph::new(2, &[(0, 1, 1.0)], Model::Ic).unwrap();
        let t = enumerate_realizations(&g).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.total_probability(), 1.0);
        let g = ProbGraph::new(2, &[(0, 1, 1.0)], Model::Lt).unwrap();
        assert_eq!(enumerate_realizations(&g).unwrap().len(), 1);
        let g = ProbGraph::new(3, &[(0, 2, 0.3), (1, 2, 0.5)], Model::Lt).unwrap();
        assert_eq!(enumerate_realizations(&g).unwrap().len(), 3);
    }

    #[test]
    fn guards_refuse_large_instances() {
        let edges: Vec<_> = (0..23).map(|i| (0, 1 + i as NodeId, 0.5)).collect();
        let g = ProbGraph::new(24, &edges, Model::Ic).unwrap();
        assert!(matches!(enumerate_realizations(&g), Err(Error::TooLarge(_))));
        let g = random_small_graph(7, 6, Model::Ic, &mut seeded(0));
        let t = enumerate_realizations(&g).unwrap();
        assert!(matches!(exact_policy_cost(&g, &t, 2, OraclePolicy::Optimal), Err(Error::TooLarge(_))));
    }

    #[test]
    fn eta_extremes() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let g = random_small_graph(5, 7, Model::Ic, &mut rng);
            let t = enumerate_realizations(&g).unwrap();
            let o = Oracle::new(&g, &t).unwrap();
            assert!((t.total_probability() - 1.0).abs() < 1e-9);
            for v in 0..5 {
                assert!((o.expected_truncated(1 << v, 1) - 1.0).abs() < 1e-12);
                assert!((o.expected_truncated(1 << v, 5) - o.expected_spread(1 << v)).abs() < 1e-12);
            }
            assert!((o.estimator_mean(0b11111, 3).unwrap() - 3.0).abs() < 1e-12);
            assert_eq!(o.expected_spread(0), 0.0);
            assert!((o.expected_spread(0b11111) - 5.0).abs() < 1e-12);
            for policy in [OraclePolicy::TruncatedGreedy, OraclePolicy::VanillaGreedy, OraclePolicy::Optimal] {
                assert!((o.policy_cost(1, policy).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimal_never_worse_than_greedy() {
        let mut rng = seeded(4);
        for i in 0..30 {
            let model = if i % 3 == 0 { Model::Lt } else { Model::Ic };
            let g = random_small_graph(5, 6, model, &mut rng);
            let t = enumerate_realizations(&g).unwrap();
            let o = Oracle::new(&g, &t).unwrap();
            for eta in 1..=5 {
                let opt = o.policy_cost(eta, OraclePolicy::Optimal).unwrap();
                let tg = o.policy_cost(eta, OraclePolicy::TruncatedGreedy).unwrap();
                let vg = o.policy_cost(eta, OraclePolicy::VanillaGreedy).unwrap();
                assert!(opt <= tg + 1e-9 && opt <= vg + 1e-9, "{opt} {tg} {vg}");
                assert!(opt >= 1.0 - 1e-9 && tg <= eta as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_agrees() {
        let g = fixtures::four_node();
        let (mean, se) = mc_estimate_truncated(&g, &[0], 2, 100_000, &mut seeded(5)).unwrap();
        assert!((mean - 1.75).abs() < 3.0 * se, "{mean} ± {se}");
        let g = ProbGraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)], Model::Ic).unwrap();
        let (mean, se) = mc_estimate_truncated(&g, &[0], 2, 50, &mut seeded(5)).unwrap();
        assert_eq!((mean, se), (2.0, 0.0));
    }

    #[test]
    fn miss_probability_examples() {
        assert_eq!(miss_probability(4, 1, 2), 0.5);
        assert_eq!(miss_probability(4, 3, 2), 0.0);
        assert_eq!(miss_probability(4, 0, 4), 1.0);
        assert!((miss_probability(8, 3, 2) - 10.0 / 28.0).abs() < 1e-15);
    }
}
