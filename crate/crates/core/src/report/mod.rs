//! Per-file orchestration, rendering and corpus statistics.

mod analyze;
mod corpus;
mod render;

pub use analyze::{
    analyze_file, analyze_source, analyze_unit, run_pipeline, Analysis, AnalysisResult, CellRef,
    Config, EvaluatedData, Metrics, PathStep, ReportFinding, Status, TupleRef, WitnessReport,
};
pub use corpus::{analyze_all, analyze_corpus, CorpusStats, HISTOGRAM_BINS, STATS_SCHEMA_VERSION};
pub use render::{render_result, render_stats, Format};
