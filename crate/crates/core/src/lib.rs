//! Adaptive seed minimization under the independent cascade and linear
//! threshold models.
//!
//! The central policy ([`asti`]) repeatedly picks seeds on the residual graph
//! of not-yet-activated nodes, observes the resulting cascade, and stops once
//! the spread reaches a target `eta`. Seed selection per round ([`trim`])
//! maximizes an unbiased-up-to-`1 - 1/e` estimate of the truncated spread
//! built from multi-root reverse-reachable sets ([`sampler`]).

pub mod asti;
pub mod checks;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trim;

pub use asti::{run_asti, run_policy, run_vanilla_baseline, Policy, PolicyKind, RoundRecord, RunReport};
pub use diffusion::{cascade, observe_step, truncated_spread, ActiveSet, CascadeResult, Realization};
pub use error::{Error, GraphError, Result};
pub use graph::{
    induce_residual, induce_residual_mask, load_edge_list, parse_edge_list, EdgeId, EdgeListOptions,
    LoadedGraph, Model, NodeId, NodeMap, ProbGraph, Weighting,
};
pub use sampler::{draw_root_count, generate_mrr, MrrSet, RootCount, SampleSet};
pub use trim::{greedy_max_cover, rho, trim, trim_round, RoundOutcome, StopReason, TrimParams};
