//! Small hand-built instances used by tests and the oracle battery.

use crate::diffusion::Realization;
use crate::graph::{Model, NodeId, ProbGraph};

/// Four nodes, four edges: `v1 -> v2` and `v1 -> v3` with probability 0.5,
/// `v2 -> v4` and `v3 -> v4` certain. Node `v_i` has id `i - 1`.
///
/// Its four realizations are equiprobable. Under them `v1` reaches 3, 3, 4
/// and 1 nodes, while `v2` and `v3` always reach exactly 2.
pub fn four_node() -> ProbGraph {
    ProbGraph::new(
        4,
        &[(0, 1, 0.5), (0, 2, 0.5), (1, 3, 1.0), (2, 3, 1.0)],
        Model::Ic,
    )
    .expect("valid fixture")
}

/// The four realizations of [`four_node`], ordered as
/// `{v1->v2 live}`, `{v1->v3 live}`, `{both}`, `{neither}`.
pub fn four_node_realizations(g: &ProbGraph) -> Vec<Realization> {
    vec![
        Realization::ic_from_live(g, [0, 2, 3]),
        Realization::ic_from_live(g, [1, 2, 3]),
        Realization::ic_from_live(g, [0, 1, 2, 3]),
        Realization::ic_from_live(g, [2, 3]),
    ]
}

/// Six-node walkthrough: seeding `v1` activates `v4` and `v6`, leaving a
/// residual graph on `{v2, v3, v5}` with the single edge `v3 -> v5`; then
/// seeding `v3` activates `v5`, for five active nodes in total.
pub fn six_node_walkthrough() -> (ProbGraph, Realization) {
    let edges = [
        (0, 3, 0.5),
        (0, 5, 0.5),
        (0, 1, 0.5),
        (3, 2, 0.5),
        (5, 4, 0.5),
        (2, 4, 0.5),
    ];
    let g = ProbGraph::new(6, &edges, Model::Ic).expect("valid fixture");
    let live_pairs: [(NodeId, NodeId); 3] = [(0, 3), (0, 5), (2, 4)];
    let live: Vec<_> = g
        .nodes()
        .flat_map(|u| g.out_edges(u).map(move |(e, v, _)| (e, u, v)).collect::<Vec<_>>())
        .filter(|&(_, u, v)| live_pairs.contains(&(u, v)))
        .map(|(e, _, _)| e)
        .collect();
    let phi = Realization::ic_from_live(&g, live);
    (g, phi)
}
