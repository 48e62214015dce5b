mod args;
mod dataset;
mod report;

use std::fs;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use seedmin_core::asti::{run_jobs, sample_realizations, summarize, ExperimentRun, Policy, PolicyKind, PolicySummary};
use seedmin_core::checks::{self, CheckResult};
use seedmin_core::oracle::{enumerate_realizations, Oracle};
use seedmin_core::{fixtures, Model, ProbGraph, Realization};

use args::{parse_policies, resolve_eta, BenchArgs, Cli, Command, OracleArgs, RunArgs, SolveArgs};
use report::Row;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::OracleCheck(a) => oracle_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("cannot configure worker threads")?;
    }
    Ok(())
}

/// Runs all policies against all realizations; returns the successful runs
/// grouped by policy and a description of every failure.
fn execute(
    g: &ProbGraph,
    eta: usize,
    run: &RunArgs,
    policies: &[Policy],
    phis: &[Realization],
) -> (Vec<Vec<ExperimentRun>>, Vec<String>) {
    let mut grouped: Vec<Vec<ExperimentRun>> = policies.iter().map(|_| Vec::new()).collect();
    let mut failures = Vec::new();
    for job in run_jobs(g, eta, run.eps, policies, phis, run.seed) {
        match job.result {
            Ok(report) => grouped[job.policy_index].push(ExperimentRun {
                realization_id: job.realization_id,
                report,
            }),
            Err(e) => failures.push(format!(
                "policy={} eta={eta} realization={}: {e}",
                policies[job.policy_index], job.realization_id
            )),
        }
    }
    (grouped, failures)
}

fn common_manifest(run: &RunArgs, graph: &args::GraphArgs, g: &ProbGraph, policies: &[Policy]) -> Vec<(&'static str, String)> {
    let labels: Vec<String> = policies.iter().map(Policy::label).collect();
    vec![
        ("dataset", graph.dataset.clone()),
        ("model", g.model().to_string()),
        ("weighting", graph.weighting.to_string()),
        ("undirected", graph.undirected.to_string()),
        ("nodes", g.n().to_string()),
        ("edges", g.m().to_string()),
        ("eps", run.eps.to_string()),
        ("policies", labels.join(",")),
        ("seed", run.seed.to_string()),
        ("threads", run.threads.map_or("auto".into(), |t| t.to_string())),
    ]
}

fn solve(a: SolveArgs) -> Result<bool> {
    a.run.validate()?;
    init_threads(a.run.threads)?;
    let loaded = dataset::load(&a.graph.dataset, a.graph.model, a.graph.weighting, a.graph.undirected, a.graph.compact_ids)?;
    let g = &loaded.graph;
    let eta = resolve_eta(&a.eta, g.n())?;
    let policies = parse_policies(&a.run.policies, a.run.batch)?;
    let phis = match &a.replay {
        Some(dir) => {
            let phis = report::read_realizations(dir)?;
            for (i, phi) in phis.iter().enumerate() {
                phi.check_matches(g).with_context(|| format!("realization {i} does not fit the dataset"))?;
            }
            phis
        }
        None => sample_realizations(g, a.run.realizations, a.run.seed),
    };
    log::info!("n={} m={} eta={eta}, {} realizations", g.n(), g.m(), phis.len());

    let out = &a.run.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    report::write_realizations(&out.join("realizations"), &phis)?;
    let (grouped, failures) = execute(g, eta, &a.run, &policies, &phis);
    let summaries: Vec<PolicySummary> = policies.iter().zip(&grouped).map(|(&p, runs)| summarize(p, runs)).collect();
    let rows: Vec<Row> = grouped
        .iter()
        .flatten()
        .map(|r| Row {
            policy: r.report.policy.label(),
            realization_id: r.realization_id,
            report: &r.report,
        })
        .collect();
    report::write_summary(&out.join("summary.csv"), &rows, a.run.no_timing)?;
    report::write_rounds(&out.join("rounds.csv"), &rows, &loaded, a.run.no_timing)?;
    report::write_trim_trace(&out.join("trim_trace.csv"), &rows)?;
    report::write_sample_sizes(&out.join("sample_sizes.csv"), &rows)?;
    report::write_spread_distribution(&out.join("spread_distribution.csv"), &summaries)?;
    if loaded.original_ids.is_some() {
        report::write_node_ids(&out.join("node_ids.csv"), &loaded)?;
    }
    let mut manifest = common_manifest(&a.run, &a.graph, g, &policies);
    manifest.push(("eta", eta.to_string()));
    manifest.push(("realizations", phis.len().to_string()));
    manifest.push(("replayed_from", a.replay.as_ref().map_or("none".into(), |d| d.display().to_string())));
    manifest.push(("runs_ok", rows.len().to_string()));
    manifest.push(("runs_failed", failures.len().to_string()));
    report::write_manifest(&out.join("MANIFEST"), &manifest, &failures)?;

    println!("n={} m={} eta={eta} realizations={}", g.n(), g.m(), phis.len());
    for s in summaries.iter().filter(|s| s.runs > 0) {
        println!(
            "{:<10} mean seeds {:.2} (min {}, max {}), mean spread {:.1}, mean wall {:.1} ms",
            s.policy.label(),
            s.mean_seeds,
            s.min_seeds,
            s.max_seeds,
            s.mean_spread,
            s.mean_wall.as_secs_f64() * 1e3
        );
    }
    report_failures(&failures);
    Ok(failures.is_empty())
}

fn report_failures(failures: &[String]) {
    for f in failures {
        eprintln!("run failed: {f}");
    }
}

fn bench(a: BenchArgs) -> Result<bool> {
    a.run.validate()?;
    init_threads(a.run.threads)?;
    let loaded = dataset::load(&a.graph.dataset, a.graph.model, a.graph.weighting, a.graph.undirected, a.graph.compact_ids)?;
    let g = &loaded.graph;
    let etas: Vec<(String, usize)> = a
        .eta
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Ok((s.to_string(), resolve_eta(s, g.n())?)))
        .collect::<Result<_>>()?;
    anyhow::ensure!(!etas.is_empty(), "no eta values given");
    let policies = parse_policies(&a.run.policies, a.run.batch)?;
    let phis = sample_realizations(g, a.run.realizations, a.run.seed);

    let out = &a.run.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut seeds_csv = csv::Writer::from_path(out.join("seeds_vs_eta.csv"))?;
    seeds_csv.write_record(["eta_spec", "eta", "policy", "runs", "mean_seeds", "min_seeds", "max_seeds", "mean_spread"])?;
    let mut time_csv = csv::Writer::from_path(out.join("time_vs_eta.csv"))?;
    time_csv.write_record(["eta_spec", "eta", "policy", "runs", "mean_wall_ms", "mean_samples"])?;
    let mut failures = Vec::new();
    let mut times: Vec<Vec<Duration>> = policies.iter().map(|_| Vec::new()).collect();
    for (spec, eta) in &etas {
        let (grouped, mut failed) = execute(g, *eta, &a.run, &policies, &phis);
        failures.append(&mut failed);
        for (p, runs) in grouped.iter().enumerate() {
            let s = summarize(policies[p], runs);
            let label = s.policy.label();
            seeds_csv.write_record([
                spec.clone(),
                eta.to_string(),
                label.clone(),
                s.runs.to_string(),
                format!("{:.4}", s.mean_seeds),
                s.min_seeds.to_string(),
                s.max_seeds.to_string(),
                format!("{:.4}", s.mean_spread),
            ])?;
            time_csv.write_record([
                spec.clone(),
                eta.to_string(),
                label,
                s.runs.to_string(),
                report::millis(s.mean_wall, a.run.no_timing),
                format!("{:.1}", s.mean_samples),
            ])?;
            times[p].push(s.mean_wall);
            println!(
                "eta={eta:<8} {:<10} mean seeds {:.2}, mean wall {:.1} ms",
                s.policy.label(),
                s.mean_seeds,
                s.mean_wall.as_secs_f64() * 1e3
            );
        }
    }
    seeds_csv.flush()?;
    time_csv.flush()?;
    if !a.run.no_timing {
        for (p, series) in times.iter().enumerate() {
            let adaptive = policies[p].kind == PolicyKind::Truncated;
            if adaptive && series.windows(2).any(|w| w[1] < w[0]) {
                eprintln!("warning: running time of {} is not monotone in eta", policies[p]);
            }
        }
    }
    let mut manifest = common_manifest(&a.run, &a.graph, g, &policies);
    let etas_text: Vec<String> = etas.iter().map(|(_, e)| e.to_string()).collect();
    manifest.push(("eta", etas_text.join(",")));
    manifest.push(("realizations", phis.len().to_string()));
    manifest.push(("runs_failed", failures.len().to_string()));
    report::write_manifest(&out.join("MANIFEST"), &manifest, &failures)?;
    report_failures(&failures);
    Ok(failures.is_empty())
}

fn print_check(c: &CheckResult) {
    println!("{} {:<44} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
}

fn oracle_check(a: OracleArgs) -> Result<bool> {
    let g = fixtures::four_node();
    let table = enumerate_realizations(&g)?;
    let o = Oracle::new(&g, &table)?;
    let values: Vec<String> = (0..4).map(|v| format!("{}", o.expected_truncated(1 << v, 2))).collect();
    println!("four-node fixture, eta=2: truncated spreads {}", values.join(" / "));

    let mut results = checks::four_node_checks()?;
    results.push(checks::sandwich_sweep(Model::Ic, a.graphs, a.seed)?);
    results.push(checks::sandwich_sweep(Model::Lt, a.graphs.div_ceil(2), a.seed)?);
    results.push(checks::greedy_cover_check(200, a.seed));
    if let Some(spec) = &a.dataset {
        results.push(check_dataset(spec, &a)?);
    }
    for c in &results {
        print_check(c);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", results.len() - failed, results.len());
    Ok(failed == 0)
}

/// Exact per-node values and the sandwich bound on a user graph.
fn check_dataset(spec: &str, a: &OracleArgs) -> Result<CheckResult> {
    let loaded = dataset::load(spec, a.model, a.weighting, a.undirected, false)?;
    let g = &loaded.graph;
    let eta = resolve_eta(&a.eta, g.n())?;
    let table = enumerate_realizations(g)?;
    let o = Oracle::new(g, &table)?;
    let factor = 1.0 - 1.0 / std::f64::consts::E;
    println!("{spec}: n={} m={} eta={eta}, {} realizations", g.n(), g.m(), table.len());
    println!("node,expected_spread,expected_truncated,estimator_mean");
    let mut violations = 0;
    for v in g.nodes() {
        let mask = 1u64 << v;
        let truth = o.expected_truncated(mask, eta);
        let est = o.estimator_mean(mask, eta)?;
        println!("{v},{:.9},{truth:.9},{est:.9}", o.expected_spread(mask));
        if est > truth + checks::TOLERANCE || est < factor * truth - checks::TOLERANCE {
            violations += 1;
        }
    }
    Ok(CheckResult {
        name: format!("sandwich bound on {spec}"),
        passed: violations == 0,
        detail: format!("{violations} violations over {} nodes", g.n()),
    })
}
