use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use seedmin_core::asti::{PolicySummary, RunReport};
use seedmin_core::{LoadedGraph, Realization};

/// A finished run with its labels.
pub struct Row<'a> {
    pub policy: String,
    pub realization_id: usize,
    pub report: &'a RunReport,
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn millis(d: Duration, no_timing: bool) -> String {
    if no_timing {
        "0".into()
    } else {
        format!("{:.3}", d.as_secs_f64() * 1e3)
    }
}

pub fn write_summary(path: &Path, rows: &[Row], no_timing: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "realization_id", "seeds", "final_spread", "rounds", "total_samples", "wall_ms"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.realization_id.to_string(),
            r.report.seeds.len().to_string(),
            r.report.final_spread.to_string(),
            r.report.rounds.len().to_string(),
            r.report.total_samples.to_string(),
            millis(r.report.wall, no_timing),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rounds(path: &Path, rows: &[Row], graph: &LoadedGraph, no_timing: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "policy",
        "realization_id",
        "round",
        "n_i",
        "m_i",
        "eta_i",
        "seeds",
        "newly_activated",
        "samples",
        "iterations",
        "stop_reason",
        "traversed_edges",
        "select_ms",
        "observe_ms",
    ])?;
    for r in rows {
        for rd in &r.report.rounds {
            let seeds: Vec<String> = rd.seeds.iter().map(|&v| graph.original_id(v).to_string()).collect();
            w.write_record([
                r.policy.clone(),
                r.realization_id.to_string(),
                rd.round.to_string(),
                rd.n_i.to_string(),
                rd.m_i.to_string(),
                rd.eta_i.to_string(),
                seeds.join(" "),
                rd.newly_activated.to_string(),
                rd.outcome.samples_used.to_string(),
                rd.outcome.iterations.to_string(),
                rd.outcome.stop.as_str().to_string(),
                rd.outcome.traversed_edges.to_string(),
                millis(rd.select_time, no_timing),
                millis(rd.observe_time, no_timing),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trim_trace(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "policy",
        "realization_id",
        "round",
        "t",
        "samples",
        "coverage",
        "lower",
        "upper",
        "ratio",
        "stop_reason",
    ])?;
    for r in rows {
        for rd in &r.report.rounds {
            for it in &rd.outcome.trace {
                w.write_record([
                    r.policy.clone(),
                    r.realization_id.to_string(),
                    rd.round.to_string(),
                    it.t.to_string(),
                    it.samples.to_string(),
                    it.coverage.to_string(),
                    format!("{:.6}", it.lower),
                    format!("{:.6}", it.upper),
                    format!("{:.6}", it.ratio),
                    it.stop.map_or("continue", |s| s.as_str()).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample_sizes(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "realization_id", "round", "size_min", "size_max", "count"])?;
    for r in rows {
        for rd in &r.report.rounds {
            for (b, &count) in rd.outcome.size_histogram.iter().enumerate() {
                if count > 0 {
                    w.write_record([
                        r.policy.clone(),
                        r.realization_id.to_string(),
                        rd.round.to_string(),
                        (1u64 << b).to_string(),
                        ((1u64 << (b + 1)) - 1).to_string(),
                        count.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_spread_distribution(path: &Path, summaries: &[PolicySummary]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "final_spread", "runs"])?;
    for s in summaries {
        for (spread, runs) in &s.spread_distribution {
            w.write_record([s.policy.label(), spread.to_string(), runs.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_node_ids(path: &Path, graph: &LoadedGraph) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["node", "original_id"])?;
    for v in graph.graph.nodes() {
        w.write_record([v.to_string(), graph.original_id(v).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn realization_path(dir: &Path, id: usize) -> std::path::PathBuf {
    dir.join(format!("phi_{id:04}.bin"))
}

pub fn write_realizations(dir: &Path, phis: &[Realization]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, phi) in phis.iter().enumerate() {
        let path = realization_path(dir, i);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        phi.write_to(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

/// Reads `phi_*.bin` files in name order.
pub fn read_realizations(dir: &Path) -> Result<Vec<Realization>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("phi_") && name.ends_with(".bin")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no phi_*.bin files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let file = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            Realization::read_from(std::io::BufReader::new(file)).with_context(|| format!("cannot read {}", p.display()))
        })
        .collect()
}

/// Plain `key=value` lines followed by one `failed=` line per failed run.
pub fn write_manifest(path: &Path, entries: &[(&str, String)], failures: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    for (k, v) in entries {
        writeln!(out, "{k}={v}")?;
    }
    for f in failures {
        writeln!(out, "failed={f}")?;
    }
    out.flush()?;
    Ok(())
}
