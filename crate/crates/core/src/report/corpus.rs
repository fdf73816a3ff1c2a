//! Batch analysis and corpus-level statistics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::leakage::LeakageKind;

use super::analyze::{analyze_file, AnalysisResult, Config, Status};

pub const STATS_SCHEMA_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub schema_version: u32,
    pub n_files: usize,
    /// Files analyzed with status ok; the denominator of the percentages.
    pub n_analyzed: usize,
    pub pct_preprocessing: f64,
    pub pct_overlap: f64,
    pub pct_multitest: f64,
    pub pct_any: f64,
    /// Counts over ten equal bins of distance / file length in `[0, 1]`.
    pub distance_histogram_pre: Vec<u64>,
    pub distance_histogram_multitest: Vec<u64>,
    /// Mean distance in lines, absent when nothing was measured.
    pub avg_distance_pre: Option<f64>,
    pub avg_distance_multitest: Option<f64>,
    pub error_breakdown: BTreeMap<Status, usize>,
}

/// Results come back in input order whatever the pool size.
pub fn analyze_all(paths: &[PathBuf], config: &Config) -> Vec<AnalysisResult> {
    paths.par_iter().map(|p| analyze_file(p, config)).collect()
}

pub fn analyze_corpus(paths: &[PathBuf], config: &Config) -> CorpusStats {
    CorpusStats::from_results(&analyze_all(paths, config))
}

#[derive(Default)]
struct Distances {
    lines: Vec<u32>,
    histogram: Vec<u64>,
}

impl Distances {
    fn new() -> Self {
        Distances {
            lines: Vec::new(),
            histogram: vec![0; HISTOGRAM_BINS],
        }
    }

    fn add(&mut self, d: u32, line_count: u32) {
        self.lines.push(d);
        let frac = d as f64 / line_count.max(1) as f64;
        let bin = ((frac * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        self.histogram[bin] += 1;
    }

    fn mean(&self) -> Option<f64> {
        (!self.lines.is_empty())
            .then(|| self.lines.iter().map(|&d| d as f64).sum::<f64>() / self.lines.len() as f64)
    }
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

impl CorpusStats {
    /// Pure reduction over per-file results. Each file counts at most once
    /// per leakage kind, and only its first finding of a kind contributes a
    /// distance.
    pub fn from_results(results: &[AnalysisResult]) -> Self {
        let ok: Vec<&AnalysisResult> = results.iter().filter(|r| r.status == Status::Ok).collect();
        let count = |kind| ok.iter().filter(|r| r.has(kind)).count();
        let any = ok.iter().filter(|r| !r.findings.is_empty()).count();

        let mut pre = Distances::new();
        let mut multi = Distances::new();
        for r in &ok {
            for (kind, acc) in [
                (LeakageKind::Preprocessing, &mut pre),
                (LeakageKind::MultiTest, &mut multi),
            ] {
                if let Some(f) = r.findings.iter().find(|f| f.kind == kind) {
                    for d in f.distances() {
                        acc.add(d, r.line_count);
                    }
                }
            }
        }

        let mut error_breakdown = BTreeMap::new();
        for r in results.iter().filter(|r| r.status != Status::Ok) {
            *error_breakdown.entry(r.status).or_insert(0) += 1;
        }

        CorpusStats {
            schema_version: STATS_SCHEMA_VERSION,
            n_files: results.len(),
            n_analyzed: ok.len(),
            pct_preprocessing: pct(count(LeakageKind::Preprocessing), ok.len()),
            pct_overlap: pct(count(LeakageKind::Overlap), ok.len()),
            pct_multitest: pct(count(LeakageKind::MultiTest), ok.len()),
            pct_any: pct(any, ok.len()),
            avg_distance_pre: pre.mean(),
            avg_distance_multitest: multi.mean(),
            distance_histogram_pre: pre.histogram,
            distance_histogram_multitest: multi.histogram,
            error_breakdown,
        }
    }
}
