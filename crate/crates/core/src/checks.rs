//! Self-check battery run by `seedmin oracle-check`: fixture values,
//! the estimator sandwich bound and the greedy coverage guarantee, all
//! against exact enumeration.

use rand::Rng;

use crate::error::Result;
use crate::fixtures;
use crate::graph::{Model, NodeId};
use crate::oracle::{enumerate_realizations, Oracle, OraclePolicy};
use crate::rng::derived;
use crate::sampler::SampleSet;
use crate::synth::random_small_graph;
use crate::trim::{greedy_max_cover, rho};

pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn close(name: &str, got: f64, want: f64) -> CheckResult {
    check(name, (got - want).abs() <= TOLERANCE, format!("got {got}, expected {want}"))
}

/// Exact values on the four-node fixture with `eta = 2`.
pub fn four_node_checks() -> Result<Vec<CheckResult>> {
    let g = fixtures::four_node();
    let table = enumerate_realizations(&g)?;
    let o = Oracle::new(&g, &table)?;
    let mut out = vec![
        check("fixture: realization count", table.len() == 4, format!("{} realizations", table.len())),
        close("fixture: E[I(v1)]", o.expected_spread(1), 2.75),
    ];
    for (v, want) in [1.75, 2.0, 2.0, 1.0].into_iter().enumerate() {
        out.push(close(&format!("fixture: E[min(I(v{}), 2)]", v + 1), o.expected_truncated(1 << v, 2), want));
    }
    out.push(close("fixture: vanilla greedy cost", o.policy_cost(2, OraclePolicy::VanillaGreedy)?, 1.25));
    out.push(close("fixture: truncated greedy cost", o.policy_cost(2, OraclePolicy::TruncatedGreedy)?, 1.0));
    Ok(out)
}

/// Counts violations of `(1 - 1/e) E[min(I(S), eta)] <= E[estimate]
/// <= E[min(I(S), eta)]` over random graphs, all `|S| <= 2`, all `eta`.
pub fn sandwich_sweep(model: Model, graphs: usize, seed: u64) -> Result<CheckResult> {
    let factor = 1.0 - 1.0 / std::f64::consts::E;
    let mut violations = 0usize;
    let mut cases = 0usize;
    let mut worst = f64::INFINITY;
    for i in 0..graphs {
        let mut rng = derived(seed, &[i as u64]);
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(0..=16.min(n * (n - 1)));
        let g = random_small_graph(n, m, model, &mut rng);
        let table = enumerate_realizations(&g)?;
        let o = Oracle::new(&g, &table)?;
        let mut sets: Vec<u64> = (0..n).map(|v| 1u64 << v).collect();
        for a in 0..n {
            for b in a + 1..n {
                sets.push(1 << a | 1 << b);
            }
        }
        for &s in &sets {
            for eta in 1..=n {
                let truth = o.expected_truncated(s, eta);
                let est = o.estimator_mean(s, eta)?;
                cases += 1;
                if est > truth + TOLERANCE || est < factor * truth - TOLERANCE {
                    violations += 1;
                }
                worst = worst.min(est / truth);
            }
        }
    }
    Ok(check(
        format!("sandwich bound ({model}, {graphs} graphs)"),
        violations == 0,
        format!("{violations} violations in {cases} cases, smallest ratio {worst:.4}"),
    ))
}

/// Greedy coverage against exhaustive search on random families of sets
/// over 8 nodes.
pub fn greedy_cover_check(instances: usize, seed: u64) -> CheckResult {
    const N: usize = 8;
    let mut failures = 0;
    for i in 0..instances {
        let mut rng = derived(seed, &[i as u64]);
        let b = 2 + i % 2;
        let count = rng.gen_range(1..=30);
        let sets: Vec<Vec<NodeId>> = (0..count)
            .map(|_| (0..N as NodeId).filter(|_| rng.gen_bool(0.25)).collect())
            .collect();
        let samples = SampleSet::from_sets(N, &sets);
        let greedy = samples.coverage_of_set(&greedy_max_cover(&samples, b));
        let best = (0u32..1 << N)
            .filter(|m| m.count_ones() as usize == b)
            .map(|m| {
                let s: Vec<NodeId> = (0..N as NodeId).filter(|v| m >> v & 1 == 1).collect();
                samples.coverage_of_set(&s)
            })
            .max()
            .unwrap_or(0);
        if (greedy as f64) < rho(b) * best as f64 - TOLERANCE {
            failures += 1;
        }
    }
    check(
        format!("greedy max coverage ({instances} instances)"),
        failures == 0,
        format!("{failures} instances below rho_b * optimum"),
    )
}

/// The full battery.
pub fn run_battery(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = four_node_checks()?;
    out.push(sandwich_sweep(Model::Ic, 100, seed)?);
    out.push(sandwich_sweep(Model::Lt, 50, seed)?);
    out.push(greedy_cover_check(200, seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        for c in run_battery(1).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
