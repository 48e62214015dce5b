//! Probabilistic directed graphs, edge-list ingestion and residual induction.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::GraphError;

pub type NodeId = u32;
pub type EdgeId = u32;

const LT_TOLERANCE: f64 = 1e-9;
const UNMAPPED: NodeId = NodeId::MAX;

/// Diffusion model whose semantics the edge probabilities carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    /// Independent cascade: every edge is an independent coin.
    Ic,
    /// Linear threshold: every node picks at most one live in-edge.
    Lt,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Ic => "ic",
            Model::Lt => "lt",
        })
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(Model::Ic),
            "lt" => Ok(Model::Lt),
            other => Err(format!("unknown diffusion model `{other}` (expected ic or lt)")),
        }
    }
}

/// How edge probabilities are assigned on load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// Read from the third column.
    Explicit,
    /// `p(u, v) = 1 / indeg(v)`, counting duplicate edges.
    InvIndeg,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Explicit => "explicit",
            Weighting::InvIndeg => "inv-indeg",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(Weighting::Explicit),
            "inv-indeg" | "inv_indeg" | "wc" => Ok(Weighting::InvIndeg),
            other => Err(format!(
                "unknown weighting `{other}` (expected explicit or inv-indeg)"
            )),
        }
    }
}

/// Immutable weighted digraph in compressed sparse row form, with both
/// forward and reverse adjacency.
///
/// Edge ids are positions in the forward arrays, so edges are grouped by
/// source and keep input order within a source.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbGraph {
    n: usize,
    model: Model,
    out_start: Vec<usize>,
    out_target: Vec<NodeId>,
    out_prob: Vec<f64>,
    in_start: Vec<usize>,
    in_source: Vec<NodeId>,
    in_prob: Vec<f64>,
    in_edge: Vec<EdgeId>,
}

impl ProbGraph {
    /// Builds a graph from `(source, target, probability)` triples, checking
    /// probability ranges and, under LT, the incoming weight budget.
    pub fn new(n: usize, edges: &[(NodeId, NodeId, f64)], model: Model) -> Result<Self, GraphError> {
        for &(u, v, p) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(GraphError::NodeOutOfRange {
                    source_node: u as u64,
                    target: v as u64,
                    n,
                });
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(GraphError::InvalidProbability {
                    source_node: u as u64,
                    target: v as u64,
                    prob: p,
                });
            }
        }
        let g = Self::from_edges_unchecked(n, edges.iter().copied(), model);
        if model == Model::Lt {
            if let Some((v, sum)) = g.first_lt_violation() {
                return Err(GraphError::LtWeightExceeded {
                    node: v as u64,
                    sum,
                });
            }
        }
        Ok(g)
    }

    pub(crate) fn from_edges_unchecked<I>(n: usize, edges: I, model: Model) -> Self
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
        I::IntoIter: Clone,
    {
        let edges = edges.into_iter();
        let mut out_start = vec![0usize; n + 1];
        let mut in_start = vec![0usize; n + 1];
        let mut m = 0;
        for (u, v, _) in edges.clone() {
            out_start[u as usize + 1] += 1;
            in_start[v as usize + 1] += 1;
            m += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
            in_start[i + 1] += in_start[i];
        }
        let mut out_target = vec![0; m];
        let mut out_prob = vec![0.0; m];
        let mut out_fill = out_start.clone();
        for (u, v, p) in edges {
            let slot = out_fill[u as usize];
            out_fill[u as usize] += 1;
            out_target[slot] = v;
            out_prob[slot] = p;
        }
        // Reverse adjacency: iterate edges in id order so in-lists are
        // ordered by edge id.
        let mut in_source = vec![0; m];
        let mut in_prob = vec![0.0; m];
        let mut in_edge = vec![0; m];
        let mut in_fill = in_start.clone();
        for u in 0..n {
            for e in out_start[u]..out_start[u + 1] {
                let v = out_target[e] as usize;
                let slot = in_fill[v];
                in_fill[v] += 1;
                in_source[slot] = u as NodeId;
                in_prob[slot] = out_prob[e];
                in_edge[slot] = e as EdgeId;
            }
        }
        ProbGraph {
            n,
            model,
            out_start,
            out_target,
            out_prob,
            in_start,
            in_source,
            in_prob,
            in_edge,
        }
    }

    fn first_lt_violation(&self) -> Option<(NodeId, f64)> {
        (0..self.n as NodeId)
            .map(|v| (v, self.in_weight_sum(v)))
            .find(|&(_, s)| s > 1.0 + LT_TOLERANCE)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.out_target.len()
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.n as NodeId
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_start[u as usize + 1] - self.out_start[u as usize]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_start[v as usize + 1] - self.in_start[v as usize]
    }

    /// Outgoing edges of `u` as `(edge id, target, probability)`.
    pub fn out_edges(&self, u: NodeId) -> impl Iterator<Item = (EdgeId, NodeId, f64)> + '_ {
        let range = self.out_start[u as usize]..self.out_start[u as usize + 1];
        range.map(move |e| (e as EdgeId, self.out_target[e], self.out_prob[e]))
    }

    /// Incoming edges of `v` as `(edge id, source, probability)`, ordered by
    /// edge id. The position in this sequence is the in-adjacency index used
    /// by LT realizations.
    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = (EdgeId, NodeId, f64)> + '_ {
        let range = self.in_start[v as usize]..self.in_start[v as usize + 1];
        range.map(move |i| (self.in_edge[i], self.in_source[i], self.in_prob[i]))
    }

    /// The `idx`-th incoming edge of `v`.
    pub fn in_edge_at(&self, v: NodeId, idx: usize) -> (EdgeId, NodeId, f64) {
        let i = self.in_start[v as usize] + idx;
        debug_assert!(i < self.in_start[v as usize + 1]);
        (self.in_edge[i], self.in_source[i], self.in_prob[i])
    }

    pub(crate) fn in_probs(&self, v: NodeId) -> &[f64] {
        &self.in_prob[self.in_start[v as usize]..self.in_start[v as usize + 1]]
    }

    pub(crate) fn in_sources(&self, v: NodeId) -> &[NodeId] {
        &self.in_source[self.in_start[v as usize]..self.in_start[v as usize + 1]]
    }

    pub fn edge_target(&self, e: EdgeId) -> NodeId {
        self.out_target[e as usize]
    }

    pub fn edge_prob(&self, e: EdgeId) -> f64 {
        self.out_prob[e as usize]
    }

    pub fn in_weight_sum(&self, v: NodeId) -> f64 {
        self.in_probs(v).iter().sum()
    }

    /// All edges as `(source, target, probability)` in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.n as NodeId).flat_map(move |u| self.out_edges(u).map(move |(_, v, p)| (u, v, p)))
    }

    /// Same edges and probabilities, read under another model.
    pub fn with_model(&self, model: Model) -> Result<Self, GraphError> {
        let mut g = self.clone();
        g.model = model;
        if model == Model::Lt {
            if let Some((v, sum)) = g.first_lt_violation() {
                return Err(GraphError::LtWeightExceeded {
                    node: v as u64,
                    sum,
                });
            }
        }
        Ok(g)
    }
}

/// Relates node ids of a residual graph to those of the graph it was
/// induced from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMap {
    residual_to_parent: Vec<NodeId>,
    parent_to_residual: Vec<NodeId>,
}

impl NodeMap {
    pub fn identity(n: usize) -> Self {
        let ids: Vec<NodeId> = (0..n as NodeId).collect();
        NodeMap {
            residual_to_parent: ids.clone(),
            parent_to_residual: ids,
        }
    }

    pub fn to_parent(&self, residual: NodeId) -> NodeId {
        self.residual_to_parent[residual as usize]
    }

    pub fn to_residual(&self, parent: NodeId) -> Option<NodeId> {
        match self.parent_to_residual.get(parent as usize) {
            Some(&r) if r != UNMAPPED => Some(r),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.residual_to_parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual_to_parent.is_empty()
    }

    pub fn residual_to_parent(&self) -> &[NodeId] {
        &self.residual_to_parent
    }
}

/// Subgraph induced by `inactive`, keeping original probabilities.
///
/// Residual ids follow ascending parent id, so "smallest id" tie-breaking
/// agrees between a residual graph and its parent.
pub fn induce_residual(g: &ProbGraph, inactive: &[NodeId]) -> (ProbGraph, NodeMap) {
    let mut keep = vec![false; g.n()];
    for &v in inactive {
        keep[v as usize] = true;
    }
    induce_residual_mask(g, &keep)
}

/// Like [`induce_residual`] with membership given as a mask over parent ids.
pub fn induce_residual_mask(g: &ProbGraph, keep: &[bool]) -> (ProbGraph, NodeMap) {
    assert_eq!(keep.len(), g.n(), "mask length must equal node count");
    let mut parent_to_residual = vec![UNMAPPED; g.n()];
    let mut residual_to_parent = Vec::new();
    for (v, &k) in keep.iter().enumerate() {
        if k {
            parent_to_residual[v] = residual_to_parent.len() as NodeId;
            residual_to_parent.push(v as NodeId);
        }
    }
    let edges = residual_to_parent.iter().flat_map(|&u| {
        let ru = parent_to_residual[u as usize];
        let p2r = &parent_to_residual;
        g.out_edges(u).filter_map(move |(_, v, p)| {
            let rv = p2r[v as usize];
            (rv != UNMAPPED).then_some((ru, rv, p))
        })
    });
    let edges: Vec<_> = edges.collect();
    let residual = ProbGraph::from_edges_unchecked(residual_to_parent.len(), edges, g.model());
    (
        residual,
        NodeMap {
            residual_to_parent,
            parent_to_residual,
        },
    )
}

/// Edge-list ingestion options.
#[derive(Clone, Copy, Debug)]
pub struct EdgeListOptions {
    pub weighting: Weighting,
    pub model: Model,
    /// Emit both directions for every line.
    pub undirected: bool,
    /// Renumber the ids that occur in the file to `0..n`. Without this, `n`
    /// is one more than the largest id and gaps become isolated nodes.
    pub compact_ids: bool,
}

impl EdgeListOptions {
    pub fn new(weighting: Weighting, model: Model) -> Self {
        EdgeListOptions {
            weighting,
            model,
            undirected: false,
            compact_ids: false,
        }
    }
}

/// A loaded graph plus the original id of every node when ids were compacted.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: ProbGraph,
    pub original_ids: Option<Vec<u64>>,
}

impl LoadedGraph {
    pub fn original_id(&self, v: NodeId) -> u64 {
        match &self.original_ids {
            Some(ids) => ids[v as usize],
            None => v as u64,
        }
    }
}

pub fn load_edge_list(path: impl AsRef<Path>, opts: &EdgeListOptions) -> Result<LoadedGraph, GraphError> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), opts)
}

/// Parses whitespace-separated `u v [p]` lines. Blank lines and lines
/// starting with `#` or `%` are skipped.
pub fn parse_edge_list<R: BufRead>(reader: R, opts: &EdgeListOptions) -> Result<LoadedGraph, GraphError> {
    let mut raw: Vec<(u64, u64, Option<f64>, usize)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let mut fields = text.split_whitespace();
        let mut node = |name: &str| -> Result<u64, GraphError> {
            let tok = fields.next().ok_or_else(|| GraphError::Parse {
                line: lineno,
                message: format!("missing {name} node"),
            })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno,
                message: format!("invalid {name} node id `{tok}`"),
            })
        };
        let u = node("source")?;
        let v = node("target")?;
        let p = match fields.next() {
            Some(tok) => Some(tok.parse::<f64>().map_err(|_| GraphError::Parse {
                line: lineno,
                message: format!("invalid probability `{tok}`"),
            })?),
            None => None,
        };
        if let Some(extra) = fields.next() {
            return Err(GraphError::Parse {
                line: lineno,
                message: format!("unexpected trailing field `{extra}`"),
            });
        }
        if opts.weighting == Weighting::Explicit && p.is_none() {
            return Err(GraphError::MissingProbability { line: lineno });
        }
        raw.push((u, v, p, lineno));
        if opts.undirected {
            raw.push((v, u, p, lineno));
        }
    }

    let (n, original_ids, ids): (usize, Option<Vec<u64>>, Vec<(NodeId, NodeId)>) = if opts.compact_ids {
        let mut seen: Vec<u64> = raw.iter().flat_map(|&(u, v, _, _)| [u, v]).collect();
        seen.sort_unstable();
        seen.dedup();
        let index: HashMap<u64, NodeId> = seen
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as NodeId))
            .collect();
        let ids = raw.iter().map(|&(u, v, _, _)| (index[&u], index[&v])).collect();
        (seen.len(), Some(seen), ids)
    } else {
        let mut max_id = None;
        for &(u, v, _, _) in &raw {
            for id in [u, v] {
                if id >= UNMAPPED as u64 {
                    return Err(GraphError::IdTooLarge(id));
                }
                max_id = max_id.max(Some(id));
            }
        }
        let n = max_id.map_or(0, |m| m as usize + 1);
        let ids = raw.iter().map(|&(u, v, _, _)| (u as NodeId, v as NodeId)).collect();
        (n, None, ids)
    };

    let original = |v: NodeId| -> u64 {
        match &original_ids {
            Some(map) => map[v as usize],
            None => v as u64,
        }
    };

    let mut indeg = vec![0usize; n];
    for &(_, v) in &ids {
        indeg[v as usize] += 1;
    }
    let mut edges = Vec::with_capacity(ids.len());
    for (&(u, v), &(_, _, p, _)) in ids.iter().zip(&raw) {
        let prob = match opts.weighting {
            Weighting::Explicit => p.expect("checked above"),
            Weighting::InvIndeg => 1.0 / indeg[v as usize] as f64,
        };
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(GraphError::InvalidProbability {
                source_node: original(u),
                target: original(v),
                prob,
            });
        }
        edges.push((u, v, prob));
    }
    let graph = ProbGraph::new(n, &edges, opts.model).map_err(|e| match e {
        GraphError::LtWeightExceeded { node, sum } => GraphError::LtWeightExceeded {
            node: original(node as NodeId),
            sum,
        },
        other => other,
    })?;
    Ok(LoadedGraph {
        graph,
        original_ids,
    })
}
