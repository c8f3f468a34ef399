use std::path::Path;
use std::process::{Command, Output};

use kcum_cli::report::RunReport;

fn kcum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcum"))
        .args(args)
        .env("KCUM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(o: &Output) -> RunReport {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout holds a JSON report")
}

/// Two labelled groups of 4-column rows; group `b` is shifted by `shift`.
fn labelled_csv(dir: &Path, rows: usize, shift: f64) -> String {
    let mut text = String::from("label,a,b,c,d\n");
    for (label, offset) in [("a", 0.0), ("b", shift)] {
        for i in 0..rows {
            let t = (i as f64 * 0.618_033_988_75).fract();
            let u = (i as f64 * 0.414_213_562_37).fract();
            text.push_str(&format!("{label},{},{},{},{}\n", t + offset, u, 1.0 - t, t * u));
        }
    }
    let path = dir.join("groups.csv");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const QUICK: &[&str] = &["--reps", "10", "--replicates", "2", "--perms", "20", "--bandwidth", "0.5,1"];

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(QUICK.iter().copied()).collect()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&kcum(&["two-sample", "--x", "gen:uniform"])), 2);
    assert_eq!(code(&kcum(&["two-sample", "--x", "gen:uniform", "--y", "gen:uniform", "--n", "10", "--stat", "d9"])), 2);
    assert_eq!(code(&kcum(&["oracle-check", "--degree", "5"])), 2);
    assert_eq!(code(&kcum(&["oracle-check", "--n", "9"])), 2);
    let bad_alpha = kcum(&["two-sample", "--x", "gen:uniform", "--y", "gen:uniform", "--n", "10", "--alpha", "1.5"]);
    assert_eq!(code(&bad_alpha), 2);
    assert!(String::from_utf8_lossy(&bad_alpha.stderr).contains("--alpha"));
}

#[test]
fn missing_file_exits_3() {
    let o = kcum(&["two-sample", "--x", "/nonexistent/x.csv", "--y", "gen:uniform", "--n", "10"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&kcum(&["--help"])), 0);
    assert_eq!(code(&kcum(&["two-sample", "--help"])), 0);
}

#[test]
fn oracle_check_passes_at_small_sizes() {
    for n in ["1", "2", "6"] {
        let o = kcum(&["oracle-check", "--n", n, "--trials", "5"]);
        assert_eq!(code(&o), 0, "n = {n}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("max observed discrepancy"));
    }
    assert_eq!(code(&kcum(&["oracle-check", "--degree", "4", "--trials", "3"])), 0);
}

#[test]
fn out_writes_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let args = with_quick(&[
        "two-sample", "--x", "gen:uniform", "--y", "gen:mixture", "--n", "12,16", "--out", path.to_str().unwrap(),
    ]);
    let o = kcum(&args);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("run.json") && stdout.contains("run.csv"));

    let r: RunReport = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(r.config.sample_sizes, vec![12, 16]);
    assert_eq!(r.config.bandwidth_grid, vec![0.5, 1.0]);
    assert_eq!(r.power_curves.len(), 2);
    for c in &r.power_curves {
        for p in &c.points {
            assert_eq!(p.best.replicates.len(), 2);
            assert_eq!(p.grid.len(), 2);
        }
    }
    let table = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("statistic,n,bandwidth,replicate,power,mean_power"));
    // Two statistics, two sizes, two replicates.
    assert_eq!(lines.count(), 8);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "no temporary files left: {names:?}");
}

#[test]
fn single_mode_reports_one_test_per_bandwidth() {
    let o = kcum(&[
        "independence", "--pairs", "gen:chi2:p=1", "--n", "30", "--stat", "hsic,csic12", "--single", "--bandwidth",
        "0.5,1",
    ]);
    let r = report(&o);
    assert!(r.power_curves.is_empty());
    assert_eq!(r.single_tests.len(), 4);
    for t in &r.single_tests {
        assert!(t.p_value > 0.0 && t.p_value <= 1.0);
        assert_eq!((t.n, t.m), (30, 30));
    }
}

#[test]
fn d3_with_unequal_sizes_is_noted() {
    let args = with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:mixture", "--n", "12", "--m", "16", "--stat", "mmd,d3"]);
    let o = kcum(&args);
    let r = report(&o);
    assert!(r.notes.iter().any(|n| n.contains("d3 needs equal sample sizes")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(r.config.second_sample_sizes, vec![16]);
    let stats: Vec<&str> = r.power_curves.iter().map(|c| c.statistic.as_str()).collect();
    assert_eq!(stats, ["mmd", "d3"]);
}

#[test]
fn runs_are_deterministic_and_sizes_independent() {
    let a = kcum(&with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:mixture", "--n", "12,16", "--seed", "4"]));
    let b = kcum(&with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:mixture", "--n", "12,16", "--seed", "4"]));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let alone = report(&kcum(&with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:mixture", "--n", "16", "--seed", "4"])));
    let both = report(&a);
    for (c_alone, c_both) in alone.power_curves.iter().zip(&both.power_curves) {
        assert_eq!(c_alone.points[0], c_both.points[1]);
    }
}

#[test]
fn timing_is_opt_in() {
    let plain = report(&kcum(&with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:uniform", "--n", "10"])));
    assert!(plain.timings.is_empty());
    let timed = report(&kcum(&with_quick(&["two-sample", "--x", "gen:uniform", "--y", "gen:uniform", "--n", "10", "--timing"])));
    assert_eq!(timed.timings.len(), 1);
}

#[test]
fn label_groups_select_rows() {
    let dir = tempfile::tempdir().unwrap();
    let file = labelled_csv(dir.path(), 40, 2.0);
    let o = kcum(&[
        "two-sample", "--x", &file, "--y", &file, "--header", "--label-col", "0", "--cols", "1-4", "--x-group", "a",
        "--y-group", "b", "--single", "--bandwidth", "0.5", "--stat", "mmd",
    ]);
    let r = report(&o);
    assert_eq!(r.single_tests.len(), 1);
    assert_eq!((r.single_tests[0].n, r.single_tests[0].m), (40, 40));
    assert!(r.single_tests[0].reject, "shifted groups differ");
    assert!(r.sources[0].description.contains("[a]"));

    let missing = kcum(&[
        "two-sample", "--x", &file, "--y", &file, "--header", "--label-col", "0", "--cols", "1-4", "--x-group", "a",
        "--y-group", "zz", "--single",
    ]);
    assert_eq!(code(&missing), 3);
    let no_group = kcum(&["two-sample", "--x", &file, "--y", &file, "--header", "--label-col", "0", "--single"]);
    assert_eq!(code(&no_group), 2);
}

#[test]
fn same_file_against_itself_is_calibrated() {
    let dir = tempfile::tempdir().unwrap();
    let file = labelled_csv(dir.path(), 60, 0.0);
    let o = kcum(&[
        "two-sample", "--x", &file, "--y", &file, "--header", "--cols", "1-4", "--n", "15", "--reps", "100",
        "--replicates", "1", "--bandwidth", "0.5", "--stat", "mmd",
    ]);
    let r = report(&o);
    let rate = r.power_curves[0].points[0].best.mean;
    assert!(rate <= 0.15, "rejection rate {rate}");
    assert!(r.notes.iter().any(|n| n.contains("without replacement")));
}

#[test]
fn paired_file_needs_both_column_sets() {
    let dir = tempfile::tempdir().unwrap();
    let file = labelled_csv(dir.path(), 20, 0.0);
    let o = kcum(&["independence", "--pairs", &file, "--header", "--x-cols", "1,2", "--single"]);
    assert_eq!(code(&o), 2);
    let o = kcum(&[
        "independence", "--pairs", &file, "--header", "--x-cols", "1,2", "--y-cols", "3-4", "--single",
        "--bandwidth", "1", "--n", "20",
    ]);
    let r = report(&o);
    assert_eq!(r.single_tests.len(), 2);
}

#[test]
fn bench_prints_a_table() {
    let o = kcum(&["bench", "--stat", "mmd,hsic", "--sizes", "20,40", "--reps", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("mmd") && text.contains("hsic"));
}
