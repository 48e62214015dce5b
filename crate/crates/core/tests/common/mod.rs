//! Brute-force reference computations written independently of the
//! library's oracle: realizations are enumerated from the raw edge list and
//! mRR membership is computed by reverse search from every root set.

#![allow(dead_code)]

use seedmin_core::{Model, NodeId, ProbGraph};

/// A realization as its list of live `(source, target)` pairs.
pub struct World {
    pub live: Vec<(NodeId, NodeId)>,
    pub prob: f64,
}

pub fn enumerate_worlds(g: &ProbGraph) -> Vec<World> {
    let edges: Vec<(NodeId, NodeId, f64)> = g.edges().collect();
    let mut worlds = vec![World { live: Vec::new(), prob: 1.0 }];
    match g.model() {
        Model::Ic => {
            for &(u, v, p) in &edges {
                let mut next = Vec::with_capacity(worlds.len() * 2);
                for w in worlds {
                    if p < 1.0 {
                        next.push(World { live: w.live.clone(), prob: w.prob * (1.0 - p) });
                    }
                    let mut live = w.live;
                    live.push((u, v));
                    next.push(World { live, prob: w.prob * p });
                }
                worlds = next;
            }
        }
        Model::Lt => {
            for target in 0..g.n() as NodeId {
                let incoming: Vec<(NodeId, f64)> =
                    edges.iter().filter(|e| e.1 == target).map(|e| (e.0, e.2)).collect();
                let rest = 1.0 - incoming.iter().map(|e| e.1).sum::<f64>();
                let mut next = Vec::new();
                for w in &worlds {
                    for &(u, p) in &incoming {
                        let mut live = w.live.clone();
                        live.push((u, target));
                        next.push(World { live, prob: w.prob * p });
                    }
                    if rest > 1e-12 {
                        next.push(World { live: w.live.clone(), prob: w.prob * rest });
                    }
                }
                worlds = next;
            }
        }
    }
    worlds
}

pub fn forward_reach(n: usize, live: &[(NodeId, NodeId)], seeds: &[NodeId]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<NodeId> = seeds.to_vec();
    for &s in seeds {
        seen[s as usize] = true;
    }
    while let Some(u) = stack.pop() {
        for &(a, b) in live {
            if a == u && !seen[b as usize] {
                seen[b as usize] = true;
                stack.push(b);
            }
        }
    }
    seen
}

/// Nodes with a live path into `roots` (given as a bitmask).
pub fn reverse_reach(live: &[(NodeId, NodeId)], roots: u32) -> u32 {
    let mut set = roots;
    loop {
        let mut grown = set;
        for &(a, b) in live {
            if set >> b & 1 == 1 {
                grown |= 1 << a;
            }
        }
        if grown == set {
            return set;
        }
        set = grown;
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// Per-world reverse-reachable set of every root mask over `n <= 16` nodes.
pub struct RootTable {
    pub n: usize,
    pub probs: Vec<f64>,
    pub rr: Vec<Vec<u32>>,
}

impl RootTable {
    pub fn new(g: &ProbGraph) -> Self {
        let n = g.n();
        assert!(n <= 16);
        let worlds = enumerate_worlds(g);
        let rr = worlds
            .iter()
            .map(|w| (0u32..1 << n).map(|mask| reverse_reach(&w.live, mask)).collect())
            .collect();
        RootTable {
            n,
            probs: worlds.iter().map(|w| w.prob).collect(),
            rr,
        }
    }

    /// Probability that a set with exactly `k` uniform distinct roots meets
    /// the node set `s`.
    pub fn hit_probability(&self, s: u32, k: usize) -> f64 {
        let total = binomial(self.n, k);
        self.probs
            .iter()
            .zip(&self.rr)
            .map(|(p, rr)| {
                let hits = (0u32..1 << self.n)
                    .filter(|m| m.count_ones() as usize == k && rr[*m as usize] & s != 0)
                    .count();
                p * hits as f64 / total
            })
            .sum()
    }

    /// Mean of `eta * 1[S meets R]` with the randomly rounded root count.
    pub fn estimator_mean(&self, s: u32, eta: usize) -> f64 {
        let floor = self.n / eta;
        let up = (self.n % eta) as f64 / eta as f64;
        let mut p = (1.0 - up) * self.hit_probability(s, floor);
        if up > 0.0 {
            p += up * self.hit_probability(s, floor + 1);
        }
        eta as f64 * p
    }
}
