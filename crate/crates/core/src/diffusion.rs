//! Realizations, forward cascades and per-round observation.

use std::collections::VecDeque;
use std::io::{Read, Write};

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Model, NodeId, ProbGraph};
use crate::rng;

const NO_PICK: u32 = u32::MAX;
const MAGIC: &[u8; 8] = b"ASMREAL1";

#[derive(Clone, Debug, PartialEq, Eq)]
enum Outcomes {
    /// One live bit per edge id.
    Ic(FixedBitSet),
    /// Per node, an index into its in-adjacency, or `NO_PICK`.
    Lt(Vec<u32>),
}

/// One fully materialized outcome of every random choice in a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    n: usize,
    m: usize,
    seed: Option<u64>,
    outcomes: Outcomes,
}

impl Realization {
    /// Samples a realization under the graph's model.
    pub fn sample<R: Rng + ?Sized>(g: &ProbGraph, rng: &mut R) -> Self {
        let outcomes = match g.model() {
            Model::Ic => {
                let mut live = FixedBitSet::with_capacity(g.m());
                for u in g.nodes() {
                    for (e, _, p) in g.out_edges(u) {
                        if rng.gen::<f64>() < p {
                            live.insert(e as usize);
                        }
                    }
                }
                Outcomes::Ic(live)
            }
            Model::Lt => Outcomes::Lt(g.nodes().map(|v| pick_in_edge(g.in_probs(v), rng)).collect()),
        };
        Realization {
            n: g.n(),
            m: g.m(),
            seed: None,
            outcomes,
        }
    }

    /// Samples from a dedicated stream and records the seed for replay.
    pub fn from_seed(g: &ProbGraph, seed: u64) -> Self {
        let mut r = Self::sample(g, &mut rng::seeded(seed));
        r.seed = Some(seed);
        r
    }

    /// IC realization with the given live edge ids.
    pub fn ic_from_live(g: &ProbGraph, live: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut bits = FixedBitSet::with_capacity(g.m());
        for e in live {
            bits.insert(e as usize);
        }
        Realization {
            n: g.n(),
            m: g.m(),
            seed: None,
            outcomes: Outcomes::Ic(bits),
        }
    }

    /// LT realization from per-node in-adjacency picks.
    pub fn lt_from_picks(g: &ProbGraph, picks: &[Option<usize>]) -> Self {
        assert_eq!(picks.len(), g.n());
        let picks = picks
            .iter()
            .zip(g.nodes())
            .map(|(p, v)| match *p {
                Some(i) => {
                    assert!(i < g.in_degree(v), "pick out of range for node {v}");
                    i as u32
                }
                None => NO_PICK,
            })
            .collect();
        Realization {
            n: g.n(),
            m: g.m(),
            seed: None,
            outcomes: Outcomes::Lt(picks),
        }
    }

    pub fn model(&self) -> Model {
        match self.outcomes {
            Outcomes::Ic(_) => Model::Ic,
            Outcomes::Lt(_) => Model::Lt,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Whether edge `e`, which ends at `target`, is live.
    #[inline]
    pub fn is_live(&self, g: &ProbGraph, e: EdgeId, target: NodeId) -> bool {
        match &self.outcomes {
            Outcomes::Ic(bits) => bits.contains(e as usize),
            Outcomes::Lt(picks) => {
                let pick = picks[target as usize];
                pick != NO_PICK && g.in_edge_at(target, pick as usize).0 == e
            }
        }
    }

    /// LT pick of `v` as an in-adjacency index. `None` under IC too.
    pub fn lt_pick(&self, v: NodeId) -> Option<usize> {
        match &self.outcomes {
            Outcomes::Lt(picks) if picks[v as usize] != NO_PICK => Some(picks[v as usize] as usize),
            _ => None,
        }
    }

    pub fn live_edge_count(&self) -> usize {
        match &self.outcomes {
            Outcomes::Ic(bits) => bits.count_ones(..),
            Outcomes::Lt(picks) => picks.iter().filter(|&&p| p != NO_PICK).count(),
        }
    }

    pub fn check_matches(&self, g: &ProbGraph) -> Result<()> {
        if self.n != g.n() || self.m != g.m() || self.model() != g.model() {
            return Err(Error::RealizationMismatch(format!(
                "realization is {} n={} m={}, graph is {} n={} m={}",
                self.model(),
                self.n,
                self.m,
                g.model(),
                g.n(),
                g.m()
            )));
        }
        if let Outcomes::Lt(picks) = &self.outcomes {
            for (v, &p) in picks.iter().enumerate() {
                if p != NO_PICK && p as usize >= g.in_degree(v as NodeId) {
                    return Err(Error::RealizationMismatch(format!("pick of node {v} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Binary encoding: an 8-byte magic, model byte, seed-present byte, then
    /// `n`, `m` and seed as little-endian u64. IC payload is a bitmap of
    /// `ceil(m / 8)` bytes (edge `e` at bit `e % 8` of byte `e / 8`); LT
    /// payload is `n` little-endian u32 picks with `u32::MAX` for none.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[
            match self.model() {
                Model::Ic => 0,
                Model::Lt => 1,
            },
            self.seed.is_some() as u8,
        ])?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.m as u64).to_le_bytes())?;
        w.write_all(&self.seed.unwrap_or(0).to_le_bytes())?;
        match &self.outcomes {
            Outcomes::Ic(bits) => {
                let mut bytes = vec![0u8; self.m.div_ceil(8)];
                for e in bits.ones() {
                    bytes[e / 8] |= 1 << (e % 8);
                }
                w.write_all(&bytes)?;
            }
            Outcomes::Lt(picks) => {
                for p in picks {
                    w.write_all(&p.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let mut word = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let seed = match flags[1] {
            0 => None,
            1 => Some(seed),
            f => return Err(Error::Format(format!("bad seed flag {f}"))),
        };
        let outcomes = match flags[0] {
            0 => {
                let mut bytes = vec![0u8; m.div_ceil(8)];
                r.read_exact(&mut bytes)?;
                let mut bits = FixedBitSet::with_capacity(m);
                for e in 0..m {
                    if bytes[e / 8] & (1 << (e % 8)) != 0 {
                        bits.insert(e);
                    }
                }
                if !m.is_multiple_of(8) && bytes[m / 8] >> (m % 8) != 0 {
                    return Err(Error::Format("bits set past edge count".into()));
                }
                Outcomes::Ic(bits)
            }
            1 => {
                let mut picks = Vec::with_capacity(n);
                let mut buf = [0u8; 4];
                for _ in 0..n {
                    r.read_exact(&mut buf)?;
                    picks.push(u32::from_le_bytes(buf));
                }
                Outcomes::Lt(picks)
            }
            f => return Err(Error::Format(format!("bad model byte {f}"))),
        };
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(Realization { n, m, seed, outcomes })
    }
}

/// Samples an LT in-edge pick: index `i` with probability `probs[i]`, none
/// with the leftover mass.
pub(crate) fn pick_in_edge<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> u32 {
    if probs.is_empty() {
        return NO_PICK;
    }
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i as u32;
        }
    }
    NO_PICK
}

/// Nodes reached by a cascade, in breadth-first order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeResult {
    pub activated: Vec<NodeId>,
}

impl CascadeResult {
    pub fn spread(&self) -> usize {
        self.activated.len()
    }
}

/// Forward closure of `seeds` over the live edges of `phi`.
pub fn cascade(g: &ProbGraph, phi: &Realization, seeds: &[NodeId]) -> CascadeResult {
    let mut blocked = vec![false; g.n()];
    CascadeResult {
        activated: spread_from(g, phi, seeds, &mut blocked),
    }
}

/// BFS from `seeds` that never enters nodes already marked in `visited`.
/// Marks everything it reaches and returns it in visit order.
fn spread_from(g: &ProbGraph, phi: &Realization, seeds: &[NodeId], visited: &mut [bool]) -> Vec<NodeId> {
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for &s in seeds {
        assert!((s as usize) < g.n(), "seed {s} outside graph");
        if !visited[s as usize] {
            visited[s as usize] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        out.push(u);
        for (e, v, _) in g.out_edges(u) {
            if !visited[v as usize] && phi.is_live(g, e, v) {
                visited[v as usize] = true;
                queue.push_back(v);
            }
        }
    }
    out
}

/// `min(spread, eta)`.
pub fn truncated_spread(spread: usize, eta: usize) -> usize {
    spread.min(eta)
}

/// Activation status of every node in the original graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    mask: Vec<bool>,
    count: usize,
}

impl ActiveSet {
    pub fn new(n: usize) -> Self {
        ActiveSet {
            mask: vec![false; n],
            count: 0,
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.mask[v as usize]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn capacity(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Inactive nodes in ascending order.
    pub fn inactive(&self) -> Vec<NodeId> {
        (0..self.mask.len() as NodeId).filter(|&v| !self.mask[v as usize]).collect()
    }

    /// Marks `nodes` active; returns how many were newly marked.
    pub fn activate(&mut self, nodes: &[NodeId]) -> usize {
        let mut added = 0;
        for &v in nodes {
            if !self.mask[v as usize] {
                self.mask[v as usize] = true;
                added += 1;
            }
        }
        self.count += added;
        added
    }
}

/// Cascade of `new_seeds` in the residual graph of `phi`: only edges between
/// nodes that are still inactive can fire. Returns the nodes activated this
/// round; `active` is left untouched.
///
/// Under LT a node whose live pick points to an already active node stays
/// inactive for the rest of the run.
pub fn observe_step(
    g: &ProbGraph,
    phi: &Realization,
    active: &ActiveSet,
    new_seeds: &[NodeId],
) -> Result<Vec<NodeId>> {
    for &s in new_seeds {
        if active.contains(s) {
            return Err(Error::SeedAlreadyActive(s));
        }
    }
    let mut visited = active.mask.clone();
    Ok(spread_from(g, phi, new_seeds, &mut visited))
}
