//! Multi-root reverse-reachable (mRR) set sampling and the coverage index.
//!
//! An mRR-set draws a uniformly random set of `k` distinct roots and
//! collects every node with a live path into it under one fresh
//! realization. With `k` randomly rounded around `n_i / eta_i`, the event
//! "S intersects the set", scaled by `eta_i`, estimates the truncated spread
//! of `S` within a factor of `1 - 1/e`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diffusion::pick_in_edge;
use crate::error::{contract, Result};
use crate::graph::{Model, NodeId, ProbGraph};

/// Randomized rounding of `n_i / eta_i` to one of its two neighbouring
/// integers, with mean exactly `n_i / eta_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RootCount {
    floor: usize,
    rem: usize,
    eta: usize,
}

impl RootCount {
    pub fn new(n_i: usize, eta_i: usize) -> Result<Self> {
        if eta_i == 0 || eta_i > n_i {
            return Err(contract(format!(
                "root count needs 1 <= eta_i <= n_i, got eta_i={eta_i}, n_i={n_i}"
            )));
        }
        Ok(RootCount {
            floor: n_i / eta_i,
            rem: n_i % eta_i,
            eta: eta_i,
        })
    }

    pub fn floor(&self) -> usize {
        self.floor
    }

    /// Probability of drawing `floor + 1`.
    pub fn round_up_prob(&self) -> f64 {
        self.rem as f64 / self.eta as f64
    }

    pub fn mean(&self) -> f64 {
        self.floor as f64 + self.round_up_prob()
    }

    /// Draws `floor + 1` with probability `rem / eta`, `floor` otherwise.
    /// Integral ratios consume no randomness.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.rem == 0 {
            self.floor
        } else if rng.gen_range(0..self.eta) < self.rem {
            self.floor + 1
        } else {
            self.floor
        }
    }
}

pub fn draw_root_count<R: Rng + ?Sized>(n_i: usize, eta_i: usize, rng: &mut R) -> Result<usize> {
    Ok(RootCount::new(n_i, eta_i)?.draw(rng))
}

/// One multi-root reverse-reachable set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrrSet {
    /// Members in discovery order; the first `k` are the roots.
    pub nodes: Vec<NodeId>,
    pub k: usize,
}

/// Reusable scratch space for generating mRR-sets on one graph.
#[derive(Clone, Debug)]
pub struct MrrSampler {
    perm: Vec<NodeId>,
    swaps: Vec<usize>,
    mark: Vec<u32>,
    epoch: u32,
}

impl MrrSampler {
    pub fn new(n: usize) -> Self {
        MrrSampler {
            perm: (0..n as NodeId).collect(),
            swaps: Vec::new(),
            mark: vec![0; n],
            epoch: 0,
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Writes `k` distinct uniform roots into `out` via a partial
    /// Fisher-Yates shuffle, then undoes the swaps so the permutation is the
    /// identity again and the draw depends on `rng` alone.
    fn draw_roots<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R, out: &mut Vec<NodeId>) {
        let n = self.perm.len();
        self.swaps.clear();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            self.perm.swap(i, j);
            self.swaps.push(j);
        }
        out.extend_from_slice(&self.perm[..k]);
        for i in (0..k).rev() {
            self.perm.swap(i, self.swaps[i]);
        }
    }

    /// Generates one mRR-set with `k` roots into `out` (cleared first) and
    /// returns the number of in-edges examined.
    ///
    /// Each node is expanded at most once, so every edge (IC) or in-edge pick
    /// (LT) is sampled at most once per set; all roots share one realization.
    pub fn sample_into<R: Rng + ?Sized>(
        &mut self,
        g: &ProbGraph,
        k: usize,
        rng: &mut R,
        out: &mut Vec<NodeId>,
    ) -> u64 {
        debug_assert_eq!(self.mark.len(), g.n());
        debug_assert!(k >= 1 && k <= g.n());
        out.clear();
        let epoch = self.next_epoch();
        self.draw_roots(k, rng, out);
        for &r in out.iter() {
            self.mark[r as usize] = epoch;
        }
        let mut traversed = 0u64;
        let mut head = 0;
        while head < out.len() {
            let v = out[head];
            head += 1;
            let sources = g.in_sources(v);
            let probs = g.in_probs(v);
            traversed += sources.len() as u64;
            match g.model() {
                Model::Ic => {
                    for (&u, &p) in sources.iter().zip(probs) {
                        if self.mark[u as usize] != epoch && rng.gen::<f64>() < p {
                            self.mark[u as usize] = epoch;
                            out.push(u);
                        }
                    }
                }
                Model::Lt => {
                    let pick = pick_in_edge(probs, rng);
                    if let Some(&u) = sources.get(pick as usize) {
                        if self.mark[u as usize] != epoch {
                            self.mark[u as usize] = epoch;
                            out.push(u);
                        }
                    }
                }
            }
        }
        traversed
    }
}

/// Generates a single mRR-set with `k` roots.
pub fn generate_mrr<R: Rng + ?Sized>(g: &ProbGraph, k: usize, rng: &mut R) -> Result<MrrSet> {
    if k == 0 || k > g.n() {
        return Err(contract(format!("root count {k} outside 1..={}", g.n())));
    }
    let mut nodes = Vec::new();
    MrrSampler::new(g.n()).sample_into(g, k, rng, &mut nodes);
    Ok(MrrSet { nodes, k })
}

/// Flat nodes, set lengths, root counts, traversed edges.
type Batch = (Vec<NodeId>, Vec<usize>, Vec<usize>, u64);

const CHUNK: usize = 256;

/// A growing collection of mRR-sets over one residual graph, with per-node
/// coverage counts and an inverted index from node to covering sets.
///
/// Sample `j` is drawn from its own ChaCha stream keyed by the collection
/// seed and `j`, so contents never depend on how generation is split across
/// threads.
#[derive(Clone, Debug)]
pub struct SampleSet {
    n: usize,
    key: [u8; 32],
    members: Vec<NodeId>,
    offsets: Vec<usize>,
    roots: Vec<u32>,
    coverage: Vec<u32>,
    covering: Vec<Vec<u32>>,
    traversed_edges: u64,
}

impl SampleSet {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill(&mut key);
        SampleSet {
            n,
            key,
            members: Vec::new(),
            offsets: vec![0],
            roots: Vec::new(),
            coverage: vec![0; n],
            covering: vec![Vec::new(); n],
            traversed_edges: 0,
        }
    }

    /// A collection holding the given sets verbatim, with root count 0.
    pub fn from_sets<I, S>(n: usize, sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[NodeId]>,
    {
        let mut s = SampleSet::new(n, 0);
        for set in sets {
            s.push(set.as_ref(), 0);
        }
        s
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn set(&self, i: usize) -> &[NodeId] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn sets(&self) -> impl Iterator<Item = &[NodeId]> + '_ {
        (0..self.len()).map(move |i| self.set(i))
    }

    pub fn root_count(&self, i: usize) -> usize {
        self.roots[i] as usize
    }

    /// Number of sets containing `v`.
    pub fn coverage(&self, v: NodeId) -> usize {
        self.coverage[v as usize] as usize
    }

    pub fn coverage_counts(&self) -> &[u32] {
        &self.coverage
    }

    /// Ids of the sets containing `v`, ascending.
    pub fn covering_sets(&self, v: NodeId) -> &[u32] {
        &self.covering[v as usize]
    }

    pub fn total_size(&self) -> usize {
        self.members.len()
    }

    pub fn traversed_edges(&self) -> u64 {
        self.traversed_edges
    }

    fn push(&mut self, nodes: &[NodeId], k: usize) {
        let id = self.roots.len() as u32;
        for &v in nodes {
            self.coverage[v as usize] += 1;
            self.covering[v as usize].push(id);
        }
        self.members.extend_from_slice(nodes);
        self.offsets.push(self.members.len());
        self.roots.push(k as u32);
    }

    fn stream(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index as u64);
        rng
    }

    /// Appends fresh mRR-sets, each with an independently drawn root count,
    /// until the collection holds `target` sets.
    pub fn extend(&mut self, g: &ProbGraph, rule: &RootCount, target: usize) -> Result<()> {
        if g.n() != self.n {
            return Err(contract(format!(
                "sample set built for {} nodes, graph has {}",
                self.n,
                g.n()
            )));
        }
        let start = self.len();
        if target < start {
            return Err(contract(format!("cannot shrink sample set from {start} to {target}")));
        }
        if target == start {
            return Ok(());
        }
        let chunk_starts: Vec<usize> = (start..target).step_by(CHUNK).collect();
        let this = &*self;
        let batches: Vec<Batch> = chunk_starts
            .into_par_iter()
            .map_init(
                || (MrrSampler::new(g.n()), Vec::new()),
                |(sampler, buf), lo| {
                    let hi = (lo + CHUNK).min(target);
                    let mut nodes = Vec::new();
                    let mut lens = Vec::with_capacity(hi - lo);
                    let mut ks = Vec::with_capacity(hi - lo);
                    let mut traversed = 0;
                    for idx in lo..hi {
                        let mut rng = this.stream(idx);
                        let k = rule.draw(&mut rng);
                        traversed += sampler.sample_into(g, k, &mut rng, buf);
                        nodes.extend_from_slice(buf);
                        lens.push(buf.len());
                        ks.push(k);
                    }
                    (nodes, lens, ks, traversed)
                },
            )
            .collect();
        for (nodes, lens, ks, traversed) in batches {
            let mut at = 0;
            for (len, k) in lens.into_iter().zip(ks) {
                self.push(&nodes[at..at + len], k);
                at += len;
            }
            self.traversed_edges += traversed;
        }
        Ok(())
    }

    /// Number of sets that intersect `s`.
    pub fn coverage_of_set(&self, s: &[NodeId]) -> usize {
        match s {
            [] => 0,
            [v] => self.coverage(*v),
            _ => {
                let mut hit = vec![false; self.len()];
                let mut count = 0;
                for &v in s {
                    for &id in self.covering_sets(v) {
                        if !std::mem::replace(&mut hit[id as usize], true) {
                            count += 1;
                        }
                    }
                }
                count
            }
        }
    }

    /// Histogram of set sizes in power-of-two buckets: bucket `b` counts
    /// sets with size in `[2^b, 2^(b+1))`.
    pub fn size_histogram(&self) -> Vec<u64> {
        let mut hist = Vec::new();
        for i in 0..self.len() {
            let len = self.offsets[i + 1] - self.offsets[i];
            let b = (usize::BITS - len.max(1).leading_zeros() - 1) as usize;
            if hist.len() <= b {
                hist.resize(b + 1, 0);
            }
            hist[b] += 1;
        }
        hist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn root_count_examples() {
        let mut rng = seeded(11);
        let trials = 100_000;
        let mut ups = 0;
        for _ in 0..trials {
            match draw_root_count(10, 4, &mut rng).unwrap() {
                3 => ups += 1,
                2 => {}
                k => panic!("unexpected {k}"),
            }
        }
        let f = ups as f64 / trials as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
        for _ in 0..100 {
            assert_eq!(draw_root_count(4, 2, &mut rng).unwrap(), 2);
            assert_eq!(draw_root_count(37, 1, &mut rng).unwrap(), 37);
            assert_eq!(draw_root_count(37, 37, &mut rng).unwrap(), 1);
        }
        assert!(draw_root_count(5, 0, &mut rng).is_err());
        assert!(draw_root_count(5, 6, &mut rng).is_err());
        assert_eq!(RootCount::new(10, 4).unwrap().mean(), 2.5);
    }

    #[test]
    fn all_roots_cover_everything() {
        let g = fixtures::four_node();
        let mut rng = seeded(2);
        for _ in 0..20 {
            let mut set = generate_mrr(&g, 4, &mut rng).unwrap().nodes;
            set.sort_unstable();
            assert_eq!(set, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn single_node_graph() {
        let g = ProbGraph::new(1, &[], Model::Ic).unwrap();
        let s = generate_mrr(&g, 1, &mut seeded(0)).unwrap();
        assert_eq!(s, MrrSet { nodes: vec![0], k: 1 });
        assert!(generate_mrr(&g, 2, &mut seeded(0)).is_err());
    }

    #[test]
    fn roots_are_distinct_and_uniform() {
        let g = ProbGraph::new(5, &[], Model::Ic).unwrap();
        let mut sampler = MrrSampler::new(5);
        let mut rng = seeded(5);
        let mut counts = [0usize; 5];
        let mut out = Vec::new();
        let trials = 50_000;
        for _ in 0..trials {
            sampler.sample_into(&g, 2, &mut rng, &mut out);
            assert_eq!(out.len(), 2);
            assert_ne!(out[0], out[1]);
            for &v in &out {
                counts[v as usize] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.4).abs() < 0.01, "{f}");
        }
        assert_eq!(sampler.perm, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn four_node_membership_matches_enumeration() {
        // eta = 2 gives k = 2. v1 is missed only in the realization where it
        // reaches itself alone and neither root is v1: 0.25 * C(3,2)/C(4,2).
        let g = fixtures::four_node();
        let rule = RootCount::new(4, 2).unwrap();
        let mut samples = SampleSet::new(4, 17);
        samples.extend(&g, &rule, 100_000).unwrap();
        let freq = samples.coverage(0) as f64 / samples.len() as f64;
        assert!((freq - 0.875).abs() < 0.01, "{freq}");
        // v2 always reaches {v2, v4}: missed with probability C(2,2)/C(4,2).
        let freq = samples.coverage(1) as f64 / samples.len() as f64;
        assert!((freq - 5.0 / 6.0).abs() < 0.01, "{freq}");
    }

    #[test]
    fn pinned_seeded_draw() {
        let g = fixtures::four_node();
        let rule = RootCount::new(4, 2).unwrap();
        let mut samples = SampleSet::new(4, 2024);
        samples.extend(&g, &rule, 6).unwrap();
        let sets: Vec<Vec<NodeId>> = samples.sets().map(|s| s.to_vec()).collect();
        let mut again = SampleSet::new(4, 2024);
        again.extend(&g, &rule, 6).unwrap();
        assert_eq!(sets, again.sets().map(|s| s.to_vec()).collect::<Vec<_>>());
        // Pins the per-index stream layout.
        let pinned: Vec<Vec<NodeId>> = vec![vec![0, 2], vec![3, 1, 2], vec![1, 2], vec![1, 3, 0, 2], vec![0, 3, 1, 2], vec![3, 2, 1]];
        assert_eq!(sets, pinned);
    }

    #[test]
    fn extend_is_incremental_and_thread_independent() {
        let g = fixtures::four_node();
        let rule = RootCount::new(4, 3).unwrap();
        let mut a = SampleSet::new(4, 9);
        a.extend(&g, &rule, 1000).unwrap();
        a.extend(&g, &rule, 1000).unwrap();
        assert_eq!(a.len(), 1000);
        a.extend(&g, &rule, 3000).unwrap();
        let mut b = SampleSet::new(4, 9);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| b.extend(&g, &rule, 3000)).unwrap();
        assert_eq!(a.members, b.members);
        assert_eq!(a.roots, b.roots);
        assert!(a.extend(&g, &rule, 10).is_err());
        assert!(a.roots.iter().all(|&k| k == 1 || k == 2));
    }

    #[test]
    fn coverage_of_set_examples() {
        let s = SampleSet::from_sets(4, [vec![0, 1], vec![1], vec![2], vec![3, 0]]);
        assert_eq!(s.coverage_of_set(&[]), 0);
        assert_eq!(s.coverage_of_set(&[0, 1, 2, 3]), 4);
        assert_eq!(s.coverage_of_set(&[0]), s.coverage(0));
        assert_eq!(s.coverage_of_set(&[0, 1]), 3);
        assert_eq!(s.size_histogram(), vec![2, 2]);
    }

    fn arb_case() -> impl Strategy<Value = (ProbGraph, usize, u64, usize)> {
        (2usize..9, any::<bool>(), any::<u64>()).prop_flat_map(|(n, lt, seed)| {
            let edge = (0..n as NodeId, 0..n as NodeId, 0.05f64..=1.0);
            (proptest::collection::vec(edge, 0..20), 1..=n, 0usize..400).prop_map(move |(edges, eta, target)| {
                let model = if lt { Model::Lt } else { Model::Ic };
                let mut indeg = vec![0usize; n];
                for &(_, v, _) in &edges {
                    indeg[v as usize] += 1;
                }
                let edges: Vec<_> = edges
                    .iter()
                    .map(|&(u, v, p)| if lt { (u, v, p / indeg[v as usize] as f64) } else { (u, v, p) })
                    .collect();
                (ProbGraph::new(n, &edges, model).unwrap(), eta, seed, target)
            })
        })
    }

    proptest! {
        #[test]
        fn coverage_index_matches_recount((g, eta, seed, target) in arb_case()) {
            let rule = RootCount::new(g.n(), eta).unwrap();
            let mut s = SampleSet::new(g.n(), seed);
            s.extend(&g, &rule, target / 2).unwrap();
            s.extend(&g, &rule, target).unwrap();
            prop_assert_eq!(s.len(), target);
            let mut recount = vec![0u32; g.n()];
            for (i, set) in s.sets().enumerate() {
                let k = s.root_count(i);
                prop_assert!(k == rule.floor() || k == rule.floor() + 1);
                prop_assert!(set.len() >= k);
                let mut sorted = set.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), set.len());
                for &v in set {
                    recount[v as usize] += 1;
                }
            }
            prop_assert_eq!(&recount[..], s.coverage_counts());
            let total: usize = s.coverage_counts().iter().map(|&c| c as usize).sum();
            prop_assert_eq!(total, s.total_size());
            for v in g.nodes() {
                prop_assert_eq!(s.covering_sets(v).len(), s.coverage(v));
            }
        }
    }
}
