//! Random graph generators for tests, benchmarks and desk-scale runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Model, NodeId, ProbGraph};

/// Probability drawn uniformly from `(0, 1]`.
pub fn unit_prob<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// `m` distinct directed edges without self-loops over `n` nodes, each with
/// a probability uniform in `(0, 1]`. Under LT every in-weight is further
/// divided by the node's in-degree so the budget constraint holds.
pub fn random_small_graph<R: Rng + ?Sized>(n: usize, m: usize, model: Model, rng: &mut R) -> ProbGraph {
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n as NodeId)
        .flat_map(|u| (0..n as NodeId).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    pairs.shuffle(rng);
    pairs.truncate(m);
    let mut indeg = vec![0usize; n];
    for &(_, v) in &pairs {
        indeg[v as usize] += 1;
    }
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(u, v)| {
            let p = unit_prob(rng);
            match model {
                Model::Ic => (u, v, p),
                Model::Lt => (u, v, p / indeg[v as usize] as f64),
            }
        })
        .collect();
    ProbGraph::new(n, &edges, model).expect("generated graph is valid")
}

/// Undirected preferential-attachment graph with roughly `target_edges`
/// edges: every new node links to one degree-proportional neighbour, plus a
/// second one with the probability that meets the edge budget.
pub fn preferential_attachment<R: Rng + ?Sized>(
    n: usize,
    target_edges: usize,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    assert!(n >= 2);
    let mut edges = vec![(0, 1)];
    let mut endpoints: Vec<NodeId> = vec![0, 1];
    let extra = target_edges.saturating_sub(n - 1) as f64 / (n - 2).max(1) as f64;
    for v in 2..n as NodeId {
        let links = 1 + (rng.gen::<f64>() < extra) as usize;
        let mut chosen: Vec<NodeId> = Vec::with_capacity(links);
        for _ in 0..links {
            let u = *endpoints.choose(rng).expect("nonempty");
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        for u in chosen {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    edges
}

/// Builds a graph from undirected pairs, each expanded to two directed edges
/// weighted `1 / indeg(target)`.
pub fn inv_indeg_undirected(n: usize, pairs: &[(NodeId, NodeId)], model: Model) -> ProbGraph {
    let mut indeg = vec![0usize; n];
    for &(u, v) in pairs {
        indeg[u as usize] += 1;
        indeg[v as usize] += 1;
    }
    let edges: Vec<_> = pairs
        .iter()
        .flat_map(|&(u, v)| [(u, v), (v, u)])
        .map(|(u, v)| (u, v, 1.0 / indeg[v as usize] as f64))
        .collect();
    ProbGraph::new(n, &edges, model).expect("inv-indeg weights are valid")
}

/// NetHEPT-sized synthetic network: 15,233 nodes and about 31.4K directed
/// edges with inverse in-degree weights.
pub fn nethept_like<R: Rng + ?Sized>(model: Model, rng: &mut R) -> ProbGraph {
    const NODES: usize = 15_233;
    const UNDIRECTED_EDGES: usize = 15_700;
    let pairs = preferential_attachment(NODES, UNDIRECTED_EDGES, rng);
    inv_indeg_undirected(NODES, &pairs, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn small_graphs_respect_shape() {
        let mut rng = seeded(1);
        for _ in 0..50 {
            let g = random_small_graph(8, 16, Model::Ic, &mut rng);
            assert_eq!((g.n(), g.m()), (8, 16));
            assert!(g.edges().all(|(u, v, p)| u != v && p > 0.0 && p <= 1.0));
            let g = random_small_graph(6, 12, Model::Lt, &mut rng);
            assert!(g.nodes().all(|v| g.in_weight_sum(v) <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn nethept_like_size() {
        let g = nethept_like(Model::Ic, &mut seeded(7));
        assert_eq!(g.n(), 15_233);
        let m = g.m() as f64;
        assert!((m - 31_400.0).abs() / 31_400.0 < 0.03, "m = {m}");
        assert!(g.nodes().all(|v| (g.in_weight_sum(v) - 1.0).abs() < 1e-9));
    }
}
