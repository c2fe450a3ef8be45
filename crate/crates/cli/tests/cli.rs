use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bt_ident_cli::{fixed, FitReport};
use tempfile::TempDir;

fn btident(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btident")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_fit(path: &Path, constraint: &str) -> FitReport {
    let o = btident(&["fit", path.to_str().unwrap(), "--constraint", constraint, "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

const TWO: &str = "winner,loser,count\nA,B,3\nB,A,1\n";

#[test]
fn fit_two_objects_sum_constraint() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "two.csv", TWO);
    let rep = json_fit(&p, "sum");
    assert_eq!(rep.labels, ["A", "B"]);
    assert!((rep.estimates[0] - 0.549306).abs() < 1e-6);
    assert!((rep.estimates[1] + 0.549306).abs() < 1e-6);
    for se in &rep.se {
        assert!((se - 0.577350).abs() < 1e-6);
    }
    assert_eq!(rep.n_comparisons, 4);
    assert_eq!(rep.constraint, "sum");
}

#[test]
fn fit_two_objects_reference_constraint() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "two.csv", TWO);
    let rep = json_fit(&p, "ref:A");
    assert_eq!(rep.labels, ["A", "B"]);
    assert_eq!(rep.estimates[0], 0.0);
    assert_eq!(rep.se[0], 0.0);
    assert!((rep.estimates[1] + 1.098612).abs() < 1e-6);
    let sum = json_fit(&p, "sum");
    assert!((sum.loglik - rep.loglik).abs() < 1e-8);
}

#[test]
fn disconnected_input_exits_two_naming_partition() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "d.csv", "winner,loser,count\nA,B,1\n");
    let o = btident(&["fit", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("{B}") && err.contains("{A}"), "{err}");

    let o = btident(&["check", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("strongly connected: no"));
    assert!(out.contains("{A}") && out.contains("{B}"));
}

#[test]
fn io_and_usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(btident(&["fit", missing.to_str().unwrap()]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.csv", "winner,loser,count\nA,B,x\n");
    assert_eq!(btident(&["fit", bad.to_str().unwrap()]).status.code(), Some(1));
    let p = write(dir.path(), "two.csv", TWO);
    let path = p.to_str().unwrap();
    assert_eq!(btident(&["fit", path, "--constraint", "ref:Z"]).status.code(), Some(1));
    assert_eq!(btident(&["fit", path, "--constraint", "alpha:1,-1"]).status.code(), Some(1));
    assert_eq!(btident(&["fit", path, "--constraint", "bogus"]).status.code(), Some(1));
    assert_eq!(btident(&["nonsense"]).status.code(), Some(1));
    assert_eq!(btident(&["--help"]).status.code(), Some(0));
}

#[test]
fn check_reports_counts_and_flags_rare_objects() {
    let dir = TempDir::new().unwrap();
    let body = "winner,loser,count\nA,B,10\nB,A,8\nB,C,1\nC,A,1\n";
    let p = write(dir.path(), "c.csv", body);
    let o = btident(&["check", p.to_str().unwrap(), "--rare-below", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("strongly connected: yes"));
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("  ") && !l.contains('{')).collect();
    let total: u64 = lines.iter().map(|l| l.split_whitespace().nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2 * 20);
    let c_line = lines.iter().find(|l| l.trim_start().starts_with('C')).unwrap();
    assert!(c_line.ends_with("rare"));
    assert!(!lines.iter().find(|l| l.trim_start().starts_with('A')).unwrap().ends_with("rare"));
}

#[test]
fn table_and_csv_agree_with_json() {
    let dir = TempDir::new().unwrap();
    let body = "winner,loser,count\nA,B,4\nB,C,3\nC,A,2\nB,A,1\nC,B,5\nA,C,2\nD,A,1\nB,D,2\n";
    let p = write(dir.path(), "m.csv", body);
    let path = p.to_str().unwrap();
    let out_json = dir.path().join("report.json");
    let o = btident(&["fit", path, "--constraint", "ref:C", "--out", out_json.to_str().unwrap()]);
    assert!(o.status.success());
    let table = stdout(&o);
    let rep: FitReport = serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    assert!(rep.estimates.windows(2).all(|w| w[0] >= w[1]));

    let rows: Vec<Vec<&str>> = table.lines().skip(4).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), rep.labels.len());
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], rep.labels[k]);
        assert_eq!(row[1], fixed(rep.estimates[k]));
        assert_eq!(row[2], fixed(rep.se[k]));
        assert_eq!(row[3], fixed(rep.ci[k][0]));
        assert_eq!(row[4], fixed(rep.ci[k][1]));
    }

    let csv_out = stdout(&btident(&["fit", path, "--constraint", "ref:C", "--format", "csv"]));
    let parsed: Vec<Vec<String>> = csv_out.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    for (k, row) in parsed.iter().enumerate() {
        assert_eq!(row[0], rep.labels[k]);
        assert_eq!(row[1].parse::<f64>().unwrap(), rep.estimates[k]);
        assert_eq!(row[2].parse::<f64>().unwrap(), rep.se[k]);
    }
}

#[test]
fn constraints_report_same_differences() {
    let dir = TempDir::new().unwrap();
    let body = "winner,loser,count\nA,B,4\nB,C,3\nC,A,2\nB,A,1\nC,B,5\nA,C,2\n";
    let p = write(dir.path(), "m.csv", body);
    let reports = [json_fit(&p, "sum"), json_fit(&p, "ref:B"), json_fit(&p, "alpha:0.2,1.5,-0.3")];
    let value = |r: &FitReport, l: &str| r.estimates[r.labels.iter().position(|x| x == l).unwrap()];
    for r in &reports[1..] {
        assert!((r.loglik - reports[0].loglik).abs() < 1e-8);
        for (a, b) in [("A", "B"), ("B", "C"), ("A", "C")] {
            let d0 = value(&reports[0], a) - value(&reports[0], b);
            assert!((value(r, a) - value(r, b) - d0).abs() < 1e-8);
        }
    }
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = btident(&[
            "simulate",
            "consistency",
            "--subjects",
            "30,120",
            "--replications",
            "30",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (stdout(&o), fs::read(out.join("consistency.csv")).unwrap(), fs::read(out.join("consistency_replications.csv")).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert!(a.0.contains("PASS consistency") || a.0.contains("FAIL consistency"));
}

#[test]
fn simulate_coverage_summary() {
    let dir = TempDir::new().unwrap();
    let o = btident(&[
        "simulate",
        "coverage",
        "--subjects",
        "500",
        "--replications",
        "100",
        "--ci-multiplier",
        "10",
        "--coverage-low",
        "0.99",
        "--coverage-high",
        "1",
        "--max-z",
        "100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS coverage: aggregate 1.0000"));
    assert!(dir.path().join("coverage.csv").exists());
    assert_eq!(btident(&["simulate", "coverage", "--per-subject", "fixed:0"]).status.code(), Some(1));
}

#[test]
fn demo_writes_two_interval_files() {
    let dir = TempDir::new().unwrap();
    let o = btident(&["demo", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("total variance"));
    let read = |name: &str| -> Vec<(String, f64, f64, f64)> {
        let body = fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("label,center,low,high"));
        lines
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
            })
            .collect()
    };
    let reference = read("demo_reference.csv");
    let sum = read("demo_sum.csv");
    assert_eq!(reference.len(), 21);
    assert_eq!(sum.len(), 21);
    let zero_width: Vec<&String> = reference.iter().filter(|r| r.3 - r.2 == 0.0).map(|r| &r.0).collect();
    assert_eq!(zero_width.len(), 1);
    let widest = sum.iter().max_by(|a, b| (a.3 - a.2).total_cmp(&(b.3 - b.2))).unwrap();
    assert_eq!(&widest.0, zero_width[0]);
}
