//! Shared inputs for the benchmarks.

use seedmin_core::rng::seeded;
use seedmin_core::synth::{inv_indeg_undirected, nethept_like, preferential_attachment};
use seedmin_core::{Model, ProbGraph};

/// The 15K-node synthetic network used for desk-scale runs.
pub fn desk_graph(model: Model) -> ProbGraph {
    nethept_like(model, &mut seeded(1))
}

/// A smaller preferential-attachment graph with inverse in-degree weights.
pub fn small_graph(n: usize, model: Model) -> ProbGraph {
    let pairs = preferential_attachment(n, 2 * n, &mut seeded(2));
    inv_indeg_undirected(n, &pairs, model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_build() {
        let g = small_graph(500, Model::Lt);
        assert_eq!(g.n(), 500);
        assert!(g.m() > 900);
    }
}
