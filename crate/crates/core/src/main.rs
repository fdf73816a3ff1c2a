use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use walkdir::WalkDir;

use leaklint::dataflow::DEFAULT_BUDGET;
use leaklint::report::{
    analyze_all, render_result, render_stats, Config, CorpusStats, Format, Status,
};
use leaklint::specs::{load_specs, BUILTIN};

/// Find train/test data leakage in Python scripts and notebooks.
#[derive(Debug, Parser)]
#[command(name = "leaklint", version)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// API specification file layered over the bundled one.
    #[arg(long, env = "LEAKLINT_SPECS", default_value = BUILTIN)]
    specs: String,

    /// Points-to constraint budget per file.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,

    /// Worker threads (defaults to the number of logical CPUs).
    #[arg(long)]
    jobs: Option<usize>,

    /// Print corpus statistics instead of per-file findings.
    #[arg(long)]
    batch: bool,

    /// Also write corpus statistics as JSON to this path.
    #[arg(long)]
    stats_out: Option<PathBuf>,

    /// Files or directories (searched for .py and .ipynb).
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(p)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().is_file() && is_source(e.path()))
                .map(|e| e.into_path())
                .collect();
            found.sort();
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("{}: no such file or directory", p.display());
        }
    }
    Ok(out)
}

fn is_source(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("py" | "ipynb"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let specs = load_specs(&cli.specs)?;
    let config = Config {
        specs,
        budget: cli.budget,
        ..Config::default()
    };
    let files = collect(&cli.paths)?;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let results = pool.install(|| analyze_all(&files, &config));

    let mut out = std::io::stdout().lock();
    let stats = CorpusStats::from_results(&results);
    if cli.batch {
        writeln!(out, "{}", render_stats(&stats, cli.format).trim_end())?;
    } else {
        for r in &results {
            let text = render_result(r, cli.format);
            match cli.format {
                Format::Json => writeln!(out, "{text}")?,
                Format::Text => write!(out, "{text}")?,
            }
        }
    }
    if let Some(path) = &cli.stats_out {
        std::fs::write(path, render_stats(&stats, Format::Json) + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let code = if results.iter().any(|r| r.status != Status::Ok) {
        2
    } else if results.iter().any(|r| !r.findings.is_empty()) {
        1
    } else {
        0
    };
    Ok(ExitCode::from(code))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("leaklint: {e:#}");
            ExitCode::from(2)
        }
    }
}
