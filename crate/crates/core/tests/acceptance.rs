//! Acceptance criteria 1-8, one PASS/FAIL line each.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use leaklint::frontend::load_source;
use leaklint::leakage::LeakageKind;
use leaklint::report::{
    analyze_file, analyze_source, run_pipeline, Analysis, AnalysisResult, Config, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIGURE_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_CASES: u64 = 200;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const FIXTURE_BUDGET: Duration = Duration::from_secs(1);
const MAX_FIXTURE_LINES: usize = 1000;
const BATCH_COPIES: usize = 100;
const SCALING_JOBS: usize = 2;
/// Allowed relative deviation of the measured speedup from `SCALING_JOBS`.
const SCALING_TOLERANCE: f64 = 0.30;
const FUZZ_CASES: u64 = 1000;
const FUZZ_BYTES: usize = 1024;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn kinds(r: &AnalysisResult) -> BTreeSet<LeakageKind> {
    r.findings.iter().map(|f| f.kind).collect()
}

fn timed(path: &Path, config: &Config) -> (AnalysisResult, Duration) {
    let start = Instant::now();
    let r = analyze_file(path, config);
    (r, start.elapsed())
}

fn pipeline(path: &Path, config: &Config) -> Analysis {
    let unit = load_source(path).expect("fixture loads");
    run_pipeline(&unit, config).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()))
}

/// (model, train, validation, test) by display name.
fn tuples(a: &Analysis) -> Vec<(String, String, Vec<String>, Vec<String>)> {
    let name = |v| a.facts.display_name(v);
    a.leakage
        .tuples
        .iter()
        .map(|t| {
            (
                t.model.clone(),
                name(t.train),
                t.validation.iter().map(|&v| name(v)).collect(),
                t.test.iter().map(|&v| name(v)).collect(),
            )
        })
        .collect()
}

fn tuple(
    m: &str,
    tr: &str,
    va: &[&str],
    te: &[&str],
) -> (String, String, Vec<String>, Vec<String>) {
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    (m.into(), tr.into(), owned(va), owned(te))
}

fn ensure(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn figures(config: &Config) -> Check {
    use LeakageKind::*;
    let expect: [(&str, &[LeakageKind]); 6] = [
        ("fig1", &[Preprocessing]),
        ("fig3a", &[Overlap]),
        ("fig3b", &[MultiTest]),
        ("fig3c", &[Preprocessing]),
        ("fig4a", &[Preprocessing, Overlap, MultiTest]),
        ("fig4b", &[]),
    ];
    let mut slowest = Duration::ZERO;
    for (name, want) in expect {
        let (r, took) = timed(&common::figure(name), config);
        slowest = slowest.max(took);
        let want: BTreeSet<LeakageKind> = want.iter().copied().collect();
        // 3a/3b/3c only require their own kind to be present
        let ok = if name.starts_with("fig3") {
            want.is_subset(&kinds(&r))
        } else {
            kinds(&r) == want
        };
        ensure(ok, format!("{name}: got {:?}", kinds(&r)))?;
        ensure(took < FIGURE_BUDGET, format!("{name}: took {took:?}"))?;
    }

    let fig1 = analyze_file(&common::figure("fig1"), config);
    let pre: Vec<u32> = fig1
        .findings
        .iter()
        .filter(|f| f.kind == LeakageKind::Preprocessing)
        .map(|f| f.line)
        .collect();
    ensure(pre == [9], format!("fig1 preprocessing lines {pre:?}"))?;

    let a = pipeline(&common::figure("fig4a"), config);
    let want_a = [
        tuple("lr", "X_train", &["X_test"], &[]),
        tuple("ridge", "X", &["X_test"], &[]),
    ];
    ensure(
        tuples(&a) == want_a,
        format!("fig4a tuples {:?}", tuples(&a)),
    )?;
    let b = pipeline(&common::figure("fig4b"), config);
    let want_b = [
        tuple("lr", "X_train", &["X_test"], &["X_test_new"]),
        tuple("ridge", "X", &["X_test"], &["X_test_new"]),
    ];
    ensure(
        tuples(&b) == want_b,
        format!("fig4b tuples {:?}", tuples(&b)),
    )?;
    Ok(format!("6 figures, tuples exact, slowest {slowest:?}"))
}

fn oracle() -> Check {
    let start = Instant::now();
    let bad: Vec<String> = (0..ORACLE_CASES).filter_map(common::disagreement).collect();
    let took = start.elapsed();
    ensure(
        bad.is_empty(),
        format!(
            "{} disagreements, first: {}",
            bad.len(),
            bad.first().cloned().unwrap_or_default()
        ),
    )?;
    ensure(took < ORACLE_BUDGET, format!("took {took:?}"))?;
    Ok(format!("{ORACLE_CASES} cases, 0 disagreements, {took:?}"))
}

fn related(a: &Analysis, x: &str, y: &str) -> bool {
    let f = |n| a.facts.find(n).unwrap_or_else(|| panic!("no variable {n}"));
    a.leakage.rel.contains(f(x), f(y))
}

fn fig6(config: &Config) -> Check {
    let a = pipeline(&common::misc("fig6a_split_siblings.py"), config);
    ensure(
        related(&a, "train", "data")
            && related(&a, "test", "data")
            && !related(&a, "train", "test"),
        "6a: split parts must relate to the origin only",
    )?;
    let b = pipeline(&common::misc("fig6b_map_sibling.py"), config);
    ensure(
        related(&b, "filled", "train")
            && related(&b, "filled", "test")
            && !related(&b, "train", "test"),
        "6b: map image must relate to both parts",
    )?;
    let c = pipeline(&common::misc("fig6c_dup_origin.py"), config);
    ensure(
        related(&c, "train", "test"),
        "6c: parts of duplicated data must relate",
    )?;
    Ok("6a unrelated siblings, 6b map sibling related, 6c dup siblings related".into())
}

fn pipelines(config: &Config) -> Check {
    let count = |name| {
        analyze_file(&common::misc(name), config)
            .findings
            .iter()
            .filter(|f| f.kind == LeakageKind::Preprocessing)
            .count()
    };
    let clean = count("pipeline_clean.py");
    let leaky = count("pipeline_leaky.py");
    ensure(
        clean == 0 && leaky == 1,
        format!("clean {clean}, leaky {leaky}"),
    )?;
    Ok("pipeline on train: 0, transforms before split: 1".into())
}

fn corpus(config: &Config) -> Check {
    let files = common::files_in("corpus");
    let mut leaky = 0;
    let mut clean = 0;
    let mut covered = BTreeSet::new();
    let mut wrong = Vec::new();
    for f in &files {
        let want = common::expected_kinds(f);
        let got = kinds(&analyze_file(f, config));
        if want.is_empty() {
            clean += 1;
        } else {
            leaky += 1;
        }
        covered.extend(want.iter().copied());
        if want != got {
            wrong.push(format!(
                "{}: want {want:?} got {got:?}",
                f.file_name().unwrap().to_string_lossy()
            ));
        }
    }
    ensure(
        files.len() >= 20 && leaky >= 10 && clean >= 10,
        format!("{} files, {leaky} leaky, {clean} clean", files.len()),
    )?;
    ensure(covered.len() == 3, format!("kinds covered {covered:?}"))?;
    ensure(wrong.is_empty(), wrong.join("; "))?;
    Ok(format!(
        "{}/{} agree ({leaky} leaky, {clean} clean)",
        files.len(),
        files.len()
    ))
}

fn run_batch(dir: &Path, jobs: usize) -> Duration {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_leaklint"))
        .args(["--batch", "--format", "json", "--jobs", &jobs.to_string()])
        .arg(dir)
        .output()
        .expect("run leaklint");
    assert!(out.status.code().is_some_and(|c| c < 2), "batch run failed");
    start.elapsed()
}

fn performance(config: &Config) -> Check {
    let mut slowest = (Duration::ZERO, PathBuf::new());
    for f in common::all_fixtures() {
        let lines = std::fs::read_to_string(&f).unwrap().lines().count();
        if lines > MAX_FIXTURE_LINES {
            continue;
        }
        let (_, took) = timed(&f, config);
        if took > slowest.0 {
            slowest = (took, f);
        }
    }
    let name = slowest
        .1
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    ensure(
        slowest.0 < FIXTURE_BUDGET,
        format!("{name} took {:?}", slowest.0),
    )?;

    let dir = tempfile::tempdir().unwrap();
    let sources = common::files_in("corpus");
    for i in 0..BATCH_COPIES {
        let src = &sources[i % sources.len()];
        std::fs::copy(src, dir.path().join(format!("copy_{i:03}.py"))).unwrap();
    }
    run_batch(dir.path(), 1); // warm the file cache
    let one = run_batch(dir.path(), 1);
    let many = run_batch(dir.path(), SCALING_JOBS);
    let speedup = one.as_secs_f64() / many.as_secs_f64();
    let ratio = speedup / SCALING_JOBS as f64;
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "slowest fixture {name} {:?}; batch x{BATCH_COPIES}: jobs=1 {one:?}, jobs={SCALING_JOBS} {many:?}, speedup {speedup:.2} ({cpus} logical CPU)",
        slowest.0
    );
    ensure((ratio - 1.0).abs() <= SCALING_TOLERANCE, detail.clone())?;
    Ok(detail)
}

fn fixture_json_run() -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_leaklint"))
        .args(["--format", "json", "--jobs", "4"])
        .args(common::all_fixtures())
        .output()
        .expect("run leaklint");
    out.stdout
}

fn determinism() -> Check {
    let a = fixture_json_run();
    let b = fixture_json_run();
    ensure(!a.is_empty() && a == b, "outputs differ")?;
    Ok(format!(
        "{} fixtures, {} identical bytes",
        common::all_fixtures().len(),
        a.len()
    ))
}

const VOCAB: &[&str] = &[
    "import ",
    "from ",
    "def ",
    "class ",
    "return ",
    "for ",
    " in ",
    "if ",
    "else:",
    "while ",
    "lambda ",
    "with ",
    "try:",
    "except",
    "yield ",
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    ":",
    ",",
    ".",
    "=",
    "==",
    "+",
    "-",
    "*",
    "**",
    "/",
    "@",
    "'",
    "\"",
    "\"\"\"",
    "#",
    "\n",
    "\n    ",
    "    ",
    "X",
    "y",
    "df",
    "model",
    "fit",
    "predict",
    "score",
    "transform",
    "fit_transform",
    "train_test_split",
    "pd",
    "np",
    "read_csv",
    "0",
    "1",
    "0.5",
    "None",
    "True",
    "*args",
    "**kw",
    "async ",
    "await ",
    "f\"{x}\"",
    "\\",
    ";",
    "del ",
    "global ",
    "nonlocal ",
];

fn fuzz_input(seed: u64, corpus: &[String]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = match seed % 4 {
        0 => {
            let bytes: Vec<u8> = (0..rng.gen_range(0..=FUZZ_BYTES))
                .map(|_| rng.gen())
                .collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        1 => {
            let mut s = String::new();
            while s.len() < rng.gen_range(1..FUZZ_BYTES) {
                s.push_str(VOCAB[rng.gen_range(0..VOCAB.len())]);
            }
            s
        }
        2 => {
            let mut chars: Vec<char> = corpus[rng.gen_range(0..corpus.len())].chars().collect();
            for _ in 0..rng.gen_range(1..20) {
                if chars.is_empty() {
                    break;
                }
                let at = rng.gen_range(0..chars.len());
                match rng.gen_range(0..3) {
                    0 => {
                        chars.remove(at);
                    }
                    1 => chars.insert(
                        at,
                        VOCAB[rng.gen_range(0..VOCAB.len())].chars().next().unwrap(),
                    ),
                    _ => {
                        let other = rng.gen_range(0..chars.len());
                        chars.swap(at, other)
                    }
                }
            }
            chars.into_iter().collect()
        }
        _ => {
            let depth = rng.gen_range(1..FUZZ_BYTES / 2);
            let (open, close) =
                [("(", ")"), ("[", "]"), ("f(", ")"), ("-", "")][rng.gen_range(0..4)];
            format!("x = {}1{}\n", open.repeat(depth), close.repeat(depth))
        }
    };
    let mut cut = s.len().min(FUZZ_BYTES);
    while !s.is_char_boundary(cut) {
        cut -= 1;
    }
    s.truncate(cut);
    s
}

fn robustness(config: &Config) -> Check {
    let path = common::misc("syntax_error.py");
    let out = Command::new(env!("CARGO_BIN_EXE_leaklint"))
        .args(["--format", "json"])
        .arg(&path)
        .output()
        .expect("run leaklint");
    let r: AnalysisResult = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(
        out.status.code() == Some(2),
        format!("exit code {:?}", out.status.code()),
    )?;
    ensure(
        r.status == Status::SyntaxError && r.findings.is_empty(),
        format!("status {:?}", r.status),
    )?;

    let corpus: Vec<String> = common::files_in("corpus")
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    let mut panics = 0;
    let mut statuses = BTreeSet::new();
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for seed in 0..FUZZ_CASES {
        let input = fuzz_input(seed, &corpus);
        match std::panic::catch_unwind(|| analyze_source("fuzz.py", &input, config)) {
            Ok(r) => {
                statuses.insert(r.status);
            }
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(hook);
    ensure(
        panics == 0,
        format!("{panics} of {FUZZ_CASES} fuzz inputs panicked"),
    )?;
    Ok(format!(
        "syntax error exits 2; {FUZZ_CASES} fuzz inputs, 0 panics, statuses {statuses:?}"
    ))
}

fn main() {
    let config = Config::default();
    let criteria: [Criterion; 8] = [
        ("figure reproduction", Box::new(|| figures(&config))),
        ("rule engine matches oracle", Box::new(oracle)),
        ("related-data fixtures", Box::new(|| fig6(&config))),
        ("pipeline behavior", Box::new(|| pipelines(&config))),
        ("labeled corpus", Box::new(|| corpus(&config))),
        ("performance and scaling", Box::new(|| performance(&config))),
        ("determinism", Box::new(determinism)),
        ("robustness", Box::new(|| robustness(&config))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
