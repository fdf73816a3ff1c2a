//! Static detection of train/test data leakage in data-science code.
//!
//! The pipeline runs per source unit:
//!
//! 1. [`frontend`] loads a script or notebook, parses it, lowers it to a
//!    three-address core language and builds SSA facts.
//! 2. [`dataflow::pointer_analysis`] resolves which abstract objects each
//!    variable may hold.
//! 3. [`typeinf::infer`] partitions variables into datasets, models and
//!    scalars using the API specifications in [`specs`].
//! 4. [`dataflow::build_flow_graph`] labels data-flow edges as flow, map,
//!    reduce, dup or filter.
//! 5. [`leakage`] evaluates the related-data relation and the three
//!    leakage rules (preprocessing, overlap, multi-test).
//! 6. [`report`] orchestrates files, renders findings and aggregates
//!    corpus statistics.

pub mod dataflow;
pub mod frontend;
pub mod leakage;
pub mod report;
pub mod specs;
pub mod typeinf;

pub use report::{analyze_file, analyze_source, AnalysisResult, Config, Status};
