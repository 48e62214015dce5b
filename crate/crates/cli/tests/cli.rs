use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use flate2::write::GzEncoder;
use flate2::Compression;

fn seedmin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seedmin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = seedmin(args);
    assert!(
        out.status.success(),
        "seedmin {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

const FIXTURE: [&str; 4] = ["--dataset", "fixture:four-node", "--weighting", "explicit"];

#[test]
fn oracle_check_passes_and_prints_fixture_values() {
    let stdout = ok(&["oracle-check", "--graphs", "30"]);
    assert!(stdout.contains("truncated spreads 1.75 / 2 / 2 / 1"), "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn oracle_check_on_user_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.txt");
    fs::write(&path, "0 1 0.5\n0 2 0.5\n1 3 1\n2 3 1\n").unwrap();
    let stdout = ok(&["oracle-check", "--graphs", "5", "--dataset", path.to_str().unwrap(), "--eta", "2"]);
    assert!(stdout.contains("0,2.750000000,1.750000000,1.750000000"), "{stdout}");
}

#[test]
fn solve_writes_one_row_per_policy_and_realization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["solve"];
    args.extend(FIXTURE);
    args.extend(["--eta", "2", "--policies", "asti,vanilla", "--realizations", "20", "--out", out.to_str().unwrap()]);
    let stdout = ok(&args);
    assert!(stdout.contains("mean seeds"));
    let summary = csv_rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 40);
    for row in &summary {
        let spread: usize = row[3].parse().unwrap();
        assert!(spread >= 2);
    }
    assert_eq!(fs::read_dir(out.join("realizations")).unwrap().count(), 20);
    for name in ["rounds.csv", "trim_trace.csv", "spread_distribution.csv", "sample_sizes.csv", "MANIFEST"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let manifest = fs::read_to_string(out.join("MANIFEST")).unwrap();
    assert!(manifest.contains("runs_ok=40") && manifest.contains("runs_failed=0"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let args = [
            "solve",
            "--dataset",
            "synth:nethept:3",
            "--eta",
            "0.02",
            "--realizations",
            "3",
            "--policies",
            "asti,asti-4,vanilla",
            "--no-timing",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ];
        ok(&args);
        out
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "4");
    for name in ["summary.csv", "rounds.csv", "trim_trace.csv", "spread_distribution.csv", "sample_sizes.csv", "MANIFEST"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs between identical runs");
        if name != "MANIFEST" {
            assert_eq!(x, fs::read(c.join(name)).unwrap(), "{name} depends on thread count");
        }
    }
}

#[test]
fn replay_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let mut args = vec!["solve"];
    args.extend(FIXTURE);
    args.extend(["--eta", "3", "--realizations", "6", "--no-timing", "--seed", "9", "--out", first.to_str().unwrap()]);
    ok(&args);
    let replay = first.join("realizations");
    let mut args = vec!["solve"];
    args.extend(FIXTURE);
    args.extend([
        "--eta",
        "3",
        "--no-timing",
        "--seed",
        "9",
        "--replay",
        replay.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    ok(&args);
    assert_eq!(fs::read(first.join("summary.csv")).unwrap(), fs::read(second.join("summary.csv")).unwrap());
}

#[test]
fn eta_fraction_and_gzip_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt.gz");
    let mut enc = GzEncoder::new(fs::File::create(&path).unwrap(), Compression::default());
    for i in 0..30 {
        writeln!(enc, "{} {}", i, (i * 7 + 3) % 31).unwrap();
    }
    enc.finish().unwrap();
    let out = dir.path().join("out");
    ok(&[
        "solve",
        "--dataset",
        path.to_str().unwrap(),
        "--undirected",
        "--eta",
        "0.1",
        "--realizations",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let manifest = fs::read_to_string(out.join("MANIFEST")).unwrap();
    assert!(manifest.contains("nodes=31"), "{manifest}");
    assert!(manifest.contains("eta=3\n"), "{manifest}");
}

#[test]
fn compacted_ids_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    fs::write(&path, "100 200\n200 300\n300 100\n").unwrap();
    let out = dir.path().join("out");
    ok(&[
        "solve",
        "--dataset",
        path.to_str().unwrap(),
        "--compact-ids",
        "--eta",
        "3",
        "--realizations",
        "2",
        "--policies",
        "asti",
        "--out",
        out.to_str().unwrap(),
    ]);
    let ids = csv_rows(&out.join("node_ids.csv"));
    assert_eq!(ids, vec![vec!["0", "100"], vec!["1", "200"], vec!["2", "300"]]);
    for row in csv_rows(&out.join("rounds.csv")) {
        for seed in row[6].split(' ') {
            assert!(["100", "200", "300"].contains(&seed), "{seed}");
        }
    }
}

#[test]
fn bench_writes_aggregated_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let mut args = vec!["bench"];
    args.extend(FIXTURE);
    args.extend(["--eta", "0.25,0.5", "--realizations", "8", "--policies", "asti,vanilla", "--out", out.to_str().unwrap()]);
    ok(&args);
    let seeds = csv_rows(&out.join("seeds_vs_eta.csv"));
    let times = csv_rows(&out.join("time_vs_eta.csv"));
    assert_eq!(seeds.len(), 4);
    assert_eq!(times.len(), 4);
    for pair in seeds.chunks(2) {
        let asti: f64 = pair[0][4].parse().unwrap();
        let vanilla: f64 = pair[1][4].parse().unwrap();
        assert!(asti <= vanilla + 0.5, "{asti} vs {vanilla}");
    }
}

#[test]
fn bad_input_fails_with_message() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--dataset", "/nonexistent/graph.txt", "--eta", "2", "--out", "/tmp/unused-seedmin"],
        vec!["solve", "--dataset", "fixture:four-node", "--weighting", "explicit", "--eta", "9", "--out", "/tmp/unused-seedmin"],
        vec!["solve", "--dataset", "fixture:four-node", "--eta", "2", "--policies", "greedy", "--out", "/tmp/unused-seedmin"],
        vec!["solve", "--dataset", "fixture:four-node", "--eta", "2", "--eps", "1.5", "--out", "/tmp/unused-seedmin"],
        vec!["solve", "--dataset", "fixture:four-node", "--model", "lt", "--eta", "2", "--out", "/tmp/unused-seedmin"],
        vec!["solve", "--dataset", "fixture:four-node", "--model", "xx", "--eta", "2", "--out", "/tmp/unused-seedmin"],
    ];
    for args in cases {
        let out = seedmin(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
