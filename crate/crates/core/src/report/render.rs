use std::fmt::Write;

use super::analyze::{AnalysisResult, ReportFinding, Status, WitnessReport};
use super::corpus::CorpusStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Compact JSON for one file (one line), or the text report.
pub fn render_result(r: &AnalysisResult, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string(r).expect("results serialize"),
        Format::Text => render_text(r),
    }
}

pub fn render_stats(s: &CorpusStats, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(s).expect("stats serialize"),
        Format::Text => stats_text(s),
    }
}

fn kind_label(f: &ReportFinding) -> &'static str {
    match f.kind {
        crate::leakage::LeakageKind::Preprocessing => "preprocessing",
        crate::leakage::LeakageKind::Overlap => "overlap",
        crate::leakage::LeakageKind::MultiTest => "multi-test",
    }
}

fn render_text(r: &AnalysisResult) -> String {
    let mut out = String::new();
    if r.status != Status::Ok {
        let why = r.error.as_deref().unwrap_or("");
        let _ = writeln!(
            out,
            "{}: {}: {why}",
            r.file,
            r.status.as_str().replace('_', " ")
        );
        return out;
    }
    for f in &r.findings {
        let _ = write!(
            out,
            "{}:{}: {} leakage — {}",
            r.file,
            f.line,
            kind_label(f),
            f.message
        );
        if let Some(c) = f.cell {
            let _ = write!(out, " (cell {}, line {})", c.cell, c.line);
        }
        out.push('\n');
        trace(&mut out, &f.witness);
    }
    out
}

fn trace(out: &mut String, w: &WitnessReport) {
    match w {
        WitnessReport::Preprocessing {
            source,
            target,
            reduce_line,
            eval,
            train,
            train_line,
            path,
            ..
        } => {
            let _ = writeln!(
                out,
                "    {reduce_line}: {source} -> {target} [reduce]  ({eval} is related to {source})"
            );
            for s in path {
                let _ = writeln!(
                    out,
                    "    {}: {} -> {} [{}]",
                    s.line,
                    s.src,
                    s.dst,
                    kind_name(s.kind)
                );
            }
            let _ = writeln!(out, "    {train_line}: trains on {train}");
        }
        WitnessReport::Overlap {
            train,
            train_line,
            evaluated,
        } => {
            let _ = writeln!(out, "    {train_line}: trains on {train}");
            for e in evaluated {
                let lines: Vec<String> = e.lines.iter().map(u32::to_string).collect();
                let how = match e.related_by.edge_line() {
                    Some(l) => format!("{} at line {l}", rule_name(&e.related_by)),
                    None => rule_name(&e.related_by).to_string(),
                };
                let _ = writeln!(
                    out,
                    "    {}: evaluates {} (related by {how})",
                    lines.join(","),
                    e.dataset
                );
            }
        }
        WitnessReport::MultiTest { tuples, .. } => {
            for t in tuples {
                let lines: Vec<String> = t.eval_lines.iter().map(u32::to_string).collect();
                let _ = writeln!(
                    out,
                    "    {}: {} trained on {}; validated on {} at line(s) {}",
                    t.train_line,
                    t.model,
                    t.train,
                    t.validation.join(", "),
                    lines.join(", ")
                );
            }
        }
    }
}

fn kind_name(k: crate::dataflow::EdgeKind) -> &'static str {
    use crate::dataflow::EdgeKind::*;
    match k {
        Flow => "flow",
        Map => "map",
        Reduce => "reduce",
        Dup => "dup",
        Filter => "filter",
    }
}

fn rule_name(d: &crate::leakage::Derivation) -> &'static str {
    use crate::leakage::Derivation::*;
    match d {
        Ref => "identity",
        Flow => "data flow",
        Sym => "symmetry",
        Map { .. } => "map",
        Dup { .. } => "duplication",
    }
}

fn fmt_avg(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |d| format!("{d:.1}"))
}

fn stats_text(s: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "files: {} ({} analyzed)", s.n_files, s.n_analyzed);
    let _ = writeln!(out, "preprocessing: {:.1}%", s.pct_preprocessing);
    let _ = writeln!(out, "overlap: {:.1}%", s.pct_overlap);
    let _ = writeln!(out, "multi-test: {:.1}%", s.pct_multitest);
    let _ = writeln!(out, "any: {:.1}%", s.pct_any);
    let _ = writeln!(
        out,
        "avg distance (preprocessing): {}",
        fmt_avg(s.avg_distance_pre)
    );
    let _ = writeln!(
        out,
        "avg distance (multi-test): {}",
        fmt_avg(s.avg_distance_multitest)
    );
    for (status, n) in &s.error_breakdown {
        let _ = writeln!(out, "{}: {n}", status.as_str());
    }
    out
}
