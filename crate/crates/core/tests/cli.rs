mod common;

use std::path::Path;
use std::process::{Command, Output};

use leaklint::report::{AnalysisResult, CorpusStats, STATS_SCHEMA_VERSION};

fn leaklint(args: &[&str], paths: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leaklint"))
        .env_remove("LEAKLINT_SPECS")
        .args(args)
        .args(paths)
        .output()
        .expect("run leaklint")
}

fn json_lines(out: &Output) -> Vec<AnalysisResult> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn exit_codes() {
    let clean = common::figure("fig4b");
    let leaky = common::figure("fig1");
    let broken = common::misc("syntax_error.py");
    assert_eq!(leaklint(&[], &[&clean]).status.code(), Some(0));
    assert_eq!(leaklint(&[], &[&leaky]).status.code(), Some(1));
    assert_eq!(leaklint(&[], &[&broken]).status.code(), Some(2));
    assert_eq!(leaklint(&[], &[&leaky, &broken]).status.code(), Some(2));
    assert_eq!(
        leaklint(&[], &[Path::new("/nonexistent/x.py")])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn clean_file_prints_nothing_in_text_mode() {
    let out = leaklint(&[], &[&common::figure("fig4b")]);
    assert!(out.stdout.is_empty());
}

#[test]
fn json_mode_prints_one_result_per_file() {
    let files = [
        common::figure("fig1"),
        common::figure("fig4b"),
        common::misc("syntax_error.py"),
    ];
    let refs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
    let results = json_lines(&leaklint(&["--format", "json"], &refs));
    let statuses: Vec<&str> = results.iter().map(|r| r.status.as_str()).collect();
    assert_eq!(statuses, ["ok", "ok", "syntax_error"]);
    assert_eq!(results[0].findings.len(), 1);
    assert!(results[1].findings.is_empty());
}

#[test]
fn directories_are_walked_in_sorted_order() {
    let dir = common::fixtures().join("figures");
    let results = json_lines(&leaklint(&["--format", "json"], &[&dir]));
    let names: Vec<String> = results
        .iter()
        .map(|r| {
            Path::new(&r.file)
                .file_name()
                .unwrap()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    assert_eq!(
        names,
        ["fig1.py", "fig3a.py", "fig3b.py", "fig3c.py", "fig4a.py", "fig4b.py"]
    );
}

#[test]
fn batch_mode_writes_stats() {
    let dir = common::fixtures().join("corpus");
    let tmp = tempfile::tempdir().unwrap();
    let stats_path = tmp.path().join("stats.json");
    let out = leaklint(
        &[
            "--batch",
            "--format",
            "json",
            "--stats-out",
            stats_path.to_str().unwrap(),
        ],
        &[&dir],
    );
    assert_eq!(out.status.code(), Some(1));
    let printed: CorpusStats = serde_json::from_slice(&out.stdout).unwrap();
    let written: CorpusStats =
        serde_json::from_str(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(printed.schema_version, STATS_SCHEMA_VERSION);
    assert_eq!(printed.n_files, common::files_in("corpus").len());
    assert!(
        printed.pct_preprocessing > 0.0 && printed.pct_overlap > 0.0 && printed.pct_multitest > 0.0
    );
}

#[test]
fn specs_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("specs.json");
    std::fs::write(&bad, "not json").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_leaklint"))
        .env("LEAKLINT_SPECS", &bad)
        .arg(common::figure("fig1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("leaklint: "));
}

#[test]
fn job_count_does_not_change_output() {
    let dir = common::fixtures().join("corpus");
    let one = leaklint(&["--format", "json", "--jobs", "1"], &[&dir]);
    let four = leaklint(&["--format", "json", "--jobs", "4"], &[&dir]);
    assert_eq!(one.stdout, four.stdout);
}
