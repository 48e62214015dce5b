use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use seedmin_core::asti::Policy;
use seedmin_core::{Model, Weighting};

#[derive(Parser, Debug)]
#[command(name = "seedmin", version, about = "Adaptive seed minimization on probabilistic graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run policies against sampled realizations and write per-run CSVs.
    Solve(SolveArgs),
    /// Sweep eta and write seed-count and running-time tables.
    Bench(BenchArgs),
    /// Verify the exact oracle, the estimator bounds and greedy coverage.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Edge list (`u v [p]` per line, optionally .gz), `fixture:four-node`,
    /// or `synth:nethept[:<seed>]`.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value = "ic")]
    pub model: Model,
    #[arg(long, default_value = "inv-indeg")]
    pub weighting: Weighting,
    /// Add the reverse of every edge.
    #[arg(long)]
    pub undirected: bool,
    /// Renumber node ids to 0..n; original ids go to node_ids.csv.
    #[arg(long)]
    pub compact_ids: bool,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Batch size for policies given without an explicit `-<b>` suffix.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    /// Comma-separated: asti, asti-<b>, vanilla, vanilla-<b>.
    #[arg(long, default_value = "asti,vanilla")]
    pub policies: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write 0 for every wall-time column so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Absolute count, or a fraction of n when it contains a decimal point.
    #[arg(long)]
    pub eta: String,
    /// Replay the realization files in this directory instead of sampling.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated eta values, each a count or a fraction of n.
    #[arg(long, default_value = "0.01,0.05,0.1,0.15,0.2")]
    pub eta: String,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Also report exact values for this small graph.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value = "ic")]
    pub model: Model,
    #[arg(long, default_value = "explicit")]
    pub weighting: Weighting,
    #[arg(long)]
    pub undirected: bool,
    #[arg(long, default_value = "2")]
    pub eta: String,
    #[arg(long, default_value_t = 100)]
    pub graphs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Resolves `--eta` against the node count: fractions in (0, 1] become
/// `floor(f * n)` (at least 1); integers must lie in `1..=n`.
pub fn resolve_eta(spec: &str, n: usize) -> Result<usize> {
    let spec = spec.trim();
    if spec.contains(['.', 'e', 'E']) {
        let f: f64 = spec.parse().with_context(|| format!("invalid eta '{spec}'"))?;
        if !(f > 0.0 && f <= 1.0) {
            bail!("eta fraction must lie in (0, 1], got {f}");
        }
        Ok(((f * n as f64).floor() as usize).max(1))
    } else {
        let k: usize = spec.parse().with_context(|| format!("invalid eta '{spec}'"))?;
        if k == 0 || k > n {
            bail!("eta must lie in 1..={n}, got {k}");
        }
        Ok(k)
    }
}

pub fn parse_policies(list: &str, default_batch: usize) -> Result<Vec<Policy>> {
    if default_batch == 0 {
        bail!("--batch must be at least 1");
    }
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mut policy: Policy = item.parse().map_err(anyhow::Error::msg)?;
        if !item.contains('-') {
            policy.batch = default_batch;
        }
        if out.contains(&policy) {
            bail!("policy '{policy}' listed twice");
        }
        out.push(policy);
    }
    if out.is_empty() {
        bail!("no policies given");
    }
    Ok(out)
}

impl RunArgs {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            bail!("--eps must lie in (0, 1), got {}", self.eps);
        }
        if self.realizations == 0 {
            bail!("--realizations must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_resolution() {
        assert_eq!(resolve_eta("0.1", 15_230).unwrap(), 1523);
        assert_eq!(resolve_eta("0.1", 15_233).unwrap(), 1523);
        assert_eq!(resolve_eta("1.0", 7).unwrap(), 7);
        assert_eq!(resolve_eta("0.001", 7).unwrap(), 1);
        assert_eq!(resolve_eta("5", 7).unwrap(), 5);
        assert!(resolve_eta("8", 7).is_err());
        assert!(resolve_eta("0", 7).is_err());
        assert!(resolve_eta("1.5", 7).is_err());
        assert!(resolve_eta("abc", 7).is_err());
    }

    #[test]
    fn policy_lists() {
        let p = parse_policies("asti, vanilla,asti-4", 2).unwrap();
        assert_eq!(p, vec![Policy::asti(2), Policy::vanilla(2), Policy::asti(4)]);
        assert!(parse_policies("asti,asti", 1).is_err());
        assert!(parse_policies("", 1).is_err());
        assert!(parse_policies("greedy", 1).is_err());
    }
}
